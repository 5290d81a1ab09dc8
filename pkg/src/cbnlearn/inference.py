"""Exact inference by bucket (variable) elimination.

Orders come from a greedy min-fill heuristic with ascending-id tie breaking.
A brute-force joint enumeration is provided as a test oracle.
"""
from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import ScopeNotCovered, TooLarge, UnknownVariable, ZeroProbabilityEvidence
from .factor import Factor, factor_marginalize, factor_product, factor_restrict
from .model import Cbn, CausalDiagram

__all__ = [
    "EliminationOrder",
    "Factor",
    "factor_product",
    "factor_marginalize",
    "factor_restrict",
    "min_fill_order",
    "min_fill_from_scopes",
    "induced_width",
    "eliminate",
    "marginal",
    "brute_force_marginal",
]

UNDERFLOW = 1e-300
BRUTE_FORCE_LIMIT = 2**24


@dataclass(frozen=True)
class EliminationOrder:
    order: tuple[int, ...]
    induced_width: int

    def __iter__(self):
        return iter(self.order)

    def __len__(self):
        return len(self.order)


def _interaction_graph(scopes: Iterable[Iterable[int]]) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {}
    for scope in scopes:
        scope = list(scope)
        for v in scope:
            adj.setdefault(v, set()).update(w for w in scope if w != v)
    return adj


def _moral_scopes(diagram: CausalDiagram) -> list[tuple[int, ...]]:
    scopes = [ps + (i,) for i, ps in enumerate(diagram.parents)]
    return scopes


def min_fill_from_scopes(
    scopes: Iterable[Iterable[int]], keep: Iterable[int] = ()
) -> EliminationOrder:
    """Greedy min-fill order over all variables in `scopes` except `keep`."""
    adj = _interaction_graph(scopes)
    keep = set(keep)
    remaining = set(adj) - keep
    order, width = [], 0
    while remaining:
        best, best_fill = None, None
        for v in sorted(remaining):
            nbrs = list(adj[v])
            fill = 0
            for i in range(len(nbrs)):
                ai = adj[nbrs[i]]
                for j in range(i + 1, len(nbrs)):
                    if nbrs[j] not in ai:
                        fill += 1
            if best_fill is None or fill < best_fill:
                best, best_fill = v, fill
                if fill == 0:
                    break
        nbrs = adj.pop(best)
        width = max(width, len(nbrs))
        for a in nbrs:
            adj[a].discard(best)
            adj[a].update(w for w in nbrs if w != a)
        remaining.discard(best)
        order.append(best)
    return EliminationOrder(tuple(order), width)


def min_fill_order(diagram: CausalDiagram, keep: Iterable[int] = ()) -> EliminationOrder:
    """Min-fill order on the moral graph of `diagram`, leaving `keep` uneliminated."""
    scopes = _moral_scopes(diagram)
    scopes += [(i,) for i in range(len(diagram))]
    return min_fill_from_scopes(scopes, keep)


def induced_width(scopes: Iterable[Iterable[int]], order: Sequence[int]) -> int:
    """Width of `order` recomputed by simulating elimination on the interaction graph."""
    adj = _interaction_graph(scopes)
    width = 0
    for v in order:
        nbrs = adj.pop(v, set())
        width = max(width, len(nbrs))
        for a in nbrs:
            adj[a].discard(v)
            adj[a].update(w for w in nbrs if w != a)
    return width


def _bucket(factors: list[Factor], var: int) -> Factor:
    """Sum `var` out of the product of `factors` in a single einsum call."""
    scope = sorted({v for f in factors for v in f.scope})
    local = {v: i for i, v in enumerate(scope)}
    args: list = []
    for f in factors:
        args.append(f.values)
        args.append([local[v] for v in f.scope])
    out = [local[v] for v in scope if v != var]
    values = np.einsum(*args, out, optimize=len(factors) > 2)
    return Factor([v for v in scope if v != var], values)


def _eliminate_scaled(
    factors: Sequence[Factor],
    order: Iterable[int],
    evidence: Mapping[int, int],
    variables: set[int] | None = None,
) -> tuple[Factor, float]:
    order = list(order)
    if set(order) & set(evidence):
        raise ScopeNotCovered("evidence variables cannot be eliminated")
    pool: list[Factor] = []
    for f in factors:
        if variables is not None and not set(f.scope) <= variables:
            raise ScopeNotCovered(f"factor {f.scope} mentions unknown variables")
        ev = {v: s for v, s in evidence.items() if v in f.scope}
        pool.append(factor_restrict(f, ev))
    log_scale = 0.0
    for var in order:
        bucket = [f for f in pool if var in f.scope]
        if not bucket:
            continue
        pool = [f for f in pool if var not in f.scope]
        msg = _bucket(bucket, var)
        peak = msg.values.max(initial=0.0)
        if 0.0 < peak < UNDERFLOW:
            msg = Factor(msg.scope, msg.values / peak)
            log_scale += math.log(peak)
        pool.append(msg)
    result = Factor.scalar(1.0)
    for f in pool:
        result = factor_product(result, f)
        peak = result.values.max(initial=0.0)
        if 0.0 < peak < UNDERFLOW:
            result = Factor(result.scope, result.values / peak)
            log_scale += math.log(peak)
    return result, log_scale


def eliminate(
    factors: Sequence[Factor],
    order: EliminationOrder | Iterable[int],
    evidence: Mapping[int, int] | None = None,
    variables: set[int] | None = None,
) -> Factor:
    """Sum the variables in `order` out of the product of `factors` restricted to `evidence`.

    The result is unnormalized and covers every remaining, non-evidence variable.
    """
    result, log_scale = _eliminate_scaled(factors, order, evidence or {}, variables)
    if log_scale:
        result = Factor(result.scope, result.values * math.exp(log_scale))
    return result


def _ancestral_set(diagram: CausalDiagram, seeds: Iterable[int]) -> set[int]:
    out, stack = set(), list(seeds)
    while stack:
        v = stack.pop()
        if v in out:
            continue
        out.add(v)
        stack.extend(diagram.parents[v])
    return out


def _check_ids(diagram: CausalDiagram, ids: Iterable[int]) -> None:
    for v in ids:
        if not 0 <= v < len(diagram):
            raise UnknownVariable(f"no variable with id {v}")


def posterior(
    factors: Sequence[Factor], targets: Iterable[int], evidence: Mapping[int, int] | None = None
) -> Factor:
    """Normalized distribution over `targets` for an arbitrary factor set."""
    targets = set(targets)
    evidence = dict(evidence or {})
    scopes = [f.scope for f in factors]
    everything = {v for s in scopes for v in s}
    reduced = [tuple(v for v in s if v not in evidence) for s in scopes]
    order = min_fill_from_scopes(reduced + [(t,) for t in targets], keep=targets)
    result, _ = _eliminate_scaled(factors, order, evidence, everything | targets)
    missing = targets - set(result.scope)
    if missing:
        raise UnknownVariable(f"targets {sorted(missing)} not covered by any factor")
    total = result.values.sum()
    if not total > 0:
        raise ZeroProbabilityEvidence("evidence has probability zero")
    return Factor(result.scope, result.values / total)


def marginal(cbn: Cbn, targets: Iterable[int], evidence: Mapping[int, int] | None = None) -> Factor:
    """Normalized P(targets | evidence) by variable elimination.

    Only the ancestral closure of targets and evidence is touched; everything
    else sums to one.
    """
    diagram = cbn.diagram
    targets = [diagram.id_of(t) for t in targets]
    evidence = {diagram.id_of(v): int(s) for v, s in (evidence or {}).items()}
    _check_ids(diagram, targets)
    if set(targets) & set(evidence):
        raise ValueError("targets and evidence overlap")
    relevant = _ancestral_set(diagram, list(targets) + list(evidence))
    factors = [cbn.cpts[i].table for i in sorted(relevant)]
    return posterior(factors, targets, evidence)


def full_joint(cbn: Cbn) -> np.ndarray:
    """Dense joint table with one axis per variable id (product of all CPTs)."""
    cards = cbn.diagram.cards
    size = math.prod(cards)
    if size > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"joint has {size} cells (limit {BRUTE_FORCE_LIMIT})")
    joint = np.ones(cards)
    n = len(cards)
    for cpt in cbn.cpts:
        shape = [1] * n
        for v, c in zip(cpt.table.scope, cpt.table.cards):
            shape[v] = c
        joint = joint * cpt.table.values.reshape(shape)
    return joint


def brute_force_marginal(
    cbn: Cbn, targets: Iterable[int], evidence: Mapping[int, int] | None = None
) -> Factor:
    """Same contract as :func:`marginal`, by enumerating the full joint."""
    diagram = cbn.diagram
    targets = sorted(diagram.id_of(t) for t in targets)
    evidence = {diagram.id_of(v): int(s) for v, s in (evidence or {}).items()}
    joint = full_joint(cbn)
    index = tuple(evidence.get(v, slice(None)) for v in range(joint.ndim))
    sliced = joint[index]
    rest = [v for v in range(joint.ndim) if v not in evidence]
    drop = tuple(i for i, v in enumerate(rest) if v not in targets)
    table = sliced.sum(axis=drop)
    total = table.sum()
    if not total > 0:
        raise ZeroProbabilityEvidence("evidence has probability zero")
    return Factor(targets, table / total)
