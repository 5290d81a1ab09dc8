"""
Identifying causal effects
==========================

The ID algorithm turns P(Y | do(X)) into an expression over the
observational distribution, or reports a hedge when none exists.
"""

import numpy as np

from cbnlearn.causal import eval_estimand_exact, identify, interventional_table, broadcast_to, to_text
from cbnlearn.model import Admg, project_to_admg
from cbnlearn.sampling import random_cpts, structure_spec

for name in ["model1", "model3", "model6", "7-ch"]:
    s = structure_spec(name)
    expr = identify(project_to_admg(s.diagram()), s.targets, s.interventions)
    print(f"{name}: P({','.join(s.targets)} | do({','.join(s.interventions)}))")
    print("   ", to_text(expr))

# the estimand evaluated on the true model matches the truncated factorization
s = structure_spec("model5")
d = s.diagram()
expr = identify(project_to_admg(d), s.targets, s.interventions)
cbn = random_cpts(d, seed=1)
truth = interventional_table(cbn, [d.id_of("Y")], [d.id_of("X")])
est = broadcast_to(eval_estimand_exact(expr, cbn), truth.scope, truth.cards)
print("model5 max gap:", np.abs(est.values - truth.values).max())

# X -> Y with X <-> Y has no estimand
bow = Admg.build(["X", "Y"], [("X", "Y")], [("X", "Y")])
hedge = identify(bow, ["Y"], ["X"])
print("bow graph:", hedge)
