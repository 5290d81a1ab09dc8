"""
Ground-truth generation and forward sampling
============================================

Random CPTs are drawn near the edges of the simplex. Samples drawn in
topological order converge to the exact observational distribution.
"""

import numpy as np

from cbnlearn import GenSpec, forward_sample, generate_structure, marginal, random_cpts

diagram = generate_structure(GenSpec("9-ch", d=2, k=2))
cbn = random_cpts(diagram, seed=3)

# a few CPT rows: most mass sits on one state
print(np.round(cbn.cpts[diagram.id_of("V4")].rows(), 3))

observed = list(diagram.observed)
exact = marginal(cbn, observed).values


def total_variation(data):
    rows, counts = data.unique()
    empirical = np.zeros_like(exact)
    empirical[tuple(rows.T)] = counts / data.m
    return 0.5 * np.abs(empirical - exact).sum()


for m in (1_000, 10_000, 100_000):
    tv = np.mean([total_variation(forward_sample(cbn, m, seed=s)) for s in range(5)])
    print(f"m={m:>7}  mean TV to P(V) = {tv:.4f}")

data = forward_sample(cbn, 5, seed=0)
print(data.to_frame())
