"""
The plug-in baseline
====================

Replace each probability in the estimand by empirical frequencies.
Accuracy improves with the sample size, but slowly once the estimand
touches many variables.
"""

import numpy as np

from cbnlearn.causal import broadcast_to, eval_estimand_plugin, identify, interventional_table, mad
from cbnlearn.model import project_to_admg
from cbnlearn.sampling import forward_sample, random_cpts, structure_spec

for name in ("model1", "15-cc"):
    s = structure_spec(name)
    d = s.diagram(2, 2)
    expr = identify(project_to_admg(d), s.targets, s.interventions)
    targets = [d.id_of(v) for v in s.targets]
    do_vars = [d.id_of(v) for v in s.interventions]
    print(name)
    for m in (100, 1_000, 10_000):
        errors = []
        for seed in range(5):
            cbn = random_cpts(d, seed=seed)
            truth = interventional_table(cbn, targets, do_vars)
            out = eval_estimand_plugin(expr, forward_sample(cbn, m, seed=seed))
            errors.append(mad(broadcast_to(out.factor, truth.scope, truth.cards), truth))
        print(f"   m={m:>6}  mad={np.mean(errors):.4f}")
