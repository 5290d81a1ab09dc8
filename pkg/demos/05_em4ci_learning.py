"""
Learning a full model with latent confounders
=============================================

EM fits the CPTs of every variable, latents included. BIC picks the
shared latent cardinality, and queries are then answered on the learned
model by truncation.
"""

from cbnlearn.causal import broadcast_to, eval_estimand_plugin, identify, interventional_table, mad
from cbnlearn.learning import EmConfig, em4ci_learn
from cbnlearn.model import project_to_admg
from cbnlearn.sampling import forward_sample, random_cpts, structure_spec

s = structure_spec("9-ch")
truth_diagram = s.diagram(d=4, k=10)
truth = random_cpts(truth_diagram, seed=0)
data = forward_sample(truth, 1000, seed=0)

y, x = truth_diagram.id_of("V8"), truth_diagram.id_of("V0")
target = interventional_table(truth, [y], [x])

result = em4ci_learn(truth_diagram, data, schedule=[2, 4, 6], config=EmConfig(restarts=5))
for c in result.candidates:
    print(f"k={c.k:>2}  LL={c.log_likelihood:10.2f}  BIC={c.bic:10.2f}")
print(f"selected k={result.k_lrn} in {result.seconds:.1f}s")

learned = interventional_table(result.cbn, [y], [x])
print("EM4CI   mad:", round(mad(learned, target), 4))

expr = identify(project_to_admg(truth_diagram), s.targets, s.interventions)
plug = broadcast_to(eval_estimand_plugin(expr, data).factor, target.scope, target.cards)
print("plug-in mad:", round(mad(plug, target), 4))
