"""Benchmark causal diagrams: small literature models and scalable families.

Every diagram lists observed variables first (ids 0..n-1) followed by latent
confounders ``U0, U1, ...``; each latent is a parentless common cause of the
observed variables it points to.

Chain(n), n odd
    Directed path V0 -> V1 -> ... -> V_{n-1}; latent U_j confounds V_{2j} and
    V_{2j+2}, giving (n-1)/2 latents.
Diamond(n), n = 4b + 1
    V0 feeds a sequence of b diamonds (top, left, right, bottom); the bottom
    of one diamond feeds the top of the next. Latents confound V_{2j} and
    V_{2j+2} as in the chain.
ConeCloud(n), n = R(R+1)/2
    Inverted pyramid of R rows; row r holds r+1 variables and each variable
    has the two adjacent variables of the row below as parents, so V0 is the
    apex sink. The "cloud" confounds the end variables of rows r and r+2 on
    each side of the cone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import UnsupportedSize
from .model import CausalDiagram, Kind, Variable

__all__ = [
    "StructureSpec",
    "chain",
    "diamond",
    "cone_cloud",
    "small_model",
    "SMALL_MODELS",
    "cone_rows",
]


@dataclass(frozen=True)
class StructureSpec:
    """Observed names, directed edges, latent children lists and a default query."""

    observed: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    confounders: tuple[tuple[str, ...], ...]
    targets: tuple[str, ...]
    interventions: tuple[str, ...]

    def diagram(self, d: int = 2, k: int = 2) -> CausalDiagram:
        names = list(self.observed) + [f"U{j}" for j in range(len(self.confounders))]
        index = {n: i for i, n in enumerate(names)}
        parents: list[list[int]] = [[] for _ in names]
        for a, b in self.edges:
            parents[index[b]].append(index[a])
        for j, children in enumerate(self.confounders):
            u = len(self.observed) + j
            for c in children:
                parents[index[c]].append(u)
        variables = [Variable(i, n, d, Kind.OBSERVED) for i, n in enumerate(self.observed)]
        variables += [
            Variable(len(self.observed) + j, f"U{j}", k, Kind.LATENT)
            for j in range(len(self.confounders))
        ]
        return CausalDiagram(variables, parents)


def _v(i: int) -> str:
    return f"V{i}"


def chain(n: int) -> StructureSpec:
    if n < 3 or n % 2 == 0:
        raise UnsupportedSize(f"chains need an odd size >= 3, got {n}")
    observed = tuple(_v(i) for i in range(n))
    edges = tuple((_v(i), _v(i + 1)) for i in range(n - 1))
    confounders = tuple((_v(2 * j), _v(2 * j + 2)) for j in range((n - 1) // 2))
    return StructureSpec(observed, edges, confounders, (_v(n - 1),), (_v(0),))


def diamond(n: int) -> StructureSpec:
    if n < 5 or (n - 1) % 4:
        raise UnsupportedSize(f"diamonds need n = 4b + 1 with b >= 1, got {n}")
    observed = tuple(_v(i) for i in range(n))
    edges = []
    for b in range((n - 1) // 4):
        top, left, right, bottom = 4 * b + 1, 4 * b + 2, 4 * b + 3, 4 * b + 4
        edges += [
            (_v(4 * b), _v(top)),
            (_v(top), _v(left)),
            (_v(top), _v(right)),
            (_v(left), _v(bottom)),
            (_v(right), _v(bottom)),
        ]
    confounders = tuple((_v(2 * j), _v(2 * j + 2)) for j in range((n - 1) // 2))
    return StructureSpec(observed, tuple(edges), confounders, (_v(n - 1),), (_v(0),))


def cone_rows(n: int) -> int:
    rows = (math.isqrt(8 * n + 1) - 1) // 2
    if rows * (rows + 1) // 2 != n or rows < 3:
        raise UnsupportedSize(f"cone-clouds need a triangular size >= 6, got {n}")
    return rows


_CONE_QUERIES = {
    6: ((0,), (5,)),
    15: ((0,), (14,)),
    45: ((0,), (14, 36, 44)),
}


def cone_cloud(n: int) -> StructureSpec:
    rows = cone_rows(n)

    def node(r: int, i: int) -> str:
        return _v(r * (r + 1) // 2 + i)

    observed = tuple(_v(i) for i in range(n))
    edges = []
    for r in range(rows - 1):
        for i in range(r + 1):
            edges += [(node(r + 1, i), node(r, i)), (node(r + 1, i + 1), node(r, i))]
    confounders = []
    for r in range(rows - 2):
        confounders.append((node(r, 0), node(r + 2, 0)))
        confounders.append((node(r, r), node(r + 2, r + 2)))
    targets, interventions = _CONE_QUERIES.get(n, ((0,), (n - 1,)))
    return StructureSpec(
        observed,
        tuple(edges),
        tuple(confounders),
        tuple(_v(t) for t in targets),
        tuple(_v(x) for x in interventions),
    )


def _model(observed, edges, confounders, targets, interventions) -> StructureSpec:
    pairs = tuple(tuple(e.split("->")) for e in edges)
    return StructureSpec(
        tuple(observed),
        pairs,
        tuple(tuple(c) for c in confounders),
        tuple(targets),
        tuple(interventions),
    )


SMALL_MODELS: dict[str, StructureSpec] = {
    # napkin
    "model1": _model(
        ["W", "R", "X", "Y"],
        ["W->R", "R->X", "X->Y"],
        [("W", "X"), ("W", "Y")],
        ["Y"],
        ["X"],
    ),
    "model2": _model(
        ["X1", "R", "Z", "X2", "Y"],
        ["X1->R", "R->Z", "R->Y", "Z->Y", "X2->Y"],
        [("X1", "Z"), ("Z", "Y")],
        ["Y"],
        ["X1", "X2"],
    ),
    "model3": _model(
        ["X", "Y", "Z"],
        ["X->Z", "Y->Z"],
        [("X", "Y")],
        ["Y"],
        ["X"],
    ),
    "model3prime": _model(
        ["X", "Z", "Y"],
        ["X->Z", "Z->Y"],
        [("X", "Y")],
        ["Y"],
        ["X"],
    ),
    "model4": _model(
        ["X1", "Z", "X2", "X3", "R", "S", "Y"],
        ["X1->R", "R->Y", "Z->X3", "X2->X3", "X2->Y", "X3->Y", "X1->S", "X2->S", "X3->S", "Z->S"],
        [("X1", "Z"), ("X1", "X3"), ("Z", "Y"), ("S", "Y")],
        ["Y"],
        ["X1", "X2"],
    ),
    "model5": _model(
        ["Z2", "X", "Z1", "Z3", "Y"],
        ["Z2->X", "Z2->Z3", "X->Z1", "Z3->Y", "Z1->Y"],
        [("X", "Z3"), ("X", "Y")],
        ["Y"],
        ["X"],
    ),
    "model6": _model(
        ["Z2", "X1", "X2", "Y"],
        ["Z2->X1", "Z2->X2", "Z2->Y", "X1->X2", "X1->Y", "X2->Y"],
        [("Z2", "X1"), ("Z2", "X2")],
        ["Y"],
        ["X1", "X2"],
    ),
    "model7": _model(
        ["Z2", "Z3", "X1", "X2", "Y"],
        ["Z2->X1", "Z3->X2", "Z2->Y", "Z3->Y", "X1->Y", "X2->Y"],
        [("Z2", "Z3"), ("Z2", "X1")],
        ["Y"],
        ["X1", "X2"],
    ),
    "model8": _model(
        ["W", "R", "X", "Z", "Y"],
        ["W->R", "R->X", "W->X", "X->Z", "R->Z", "W->Z", "Z->Y", "R->Y", "W->Y"],
        [("X", "Y"), ("W", "Y")],
        ["Y"],
        ["X"],
    ),
}


def small_model(name: str) -> StructureSpec:
    key = name.lower().replace("'", "prime").replace("_", "")
    if key not in SMALL_MODELS:
        raise UnsupportedSize(f"unknown model {name!r}")
    return SMALL_MODELS[key]
