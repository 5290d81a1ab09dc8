"""Interventional queries on explicit-latent CBNs and the mad score."""
from __future__ import annotations

import itertools
from collections.abc import Iterable

import numpy as np

from ..errors import ShapeMismatch
from ..factor import Factor
from ..inference import marginal, posterior
from ..model import Cbn, Query
from .estimand import Expr
from .evaluate import PluginResult, eval_estimand_plugin

__all__ = ["interventional_query", "interventional_table", "plugin_table", "renormalize_over", "broadcast_to", "mad"]


def interventional_query(cbn: Cbn, query: Query) -> Factor:
    """P(targets | do(X=x)) by the truncated factorization.

    CPTs of intervened variables are dropped and every remaining factor is
    clamped at X=x before eliminating all non-targets.
    """
    diagram = cbn.diagram
    query.validate(diagram)
    if not query.interventions:
        return marginal(cbn, query.targets)
    # only ancestors of the targets in the truncated graph matter
    cut = set(query.interventions)
    keep, stack = set(), list(query.targets)
    while stack:
        v = stack.pop()
        if v in keep:
            continue
        keep.add(v)
        if v not in cut:
            stack.extend(diagram.parents[v])
    factors = [cbn.cpts[i].table for i in sorted(keep - cut)]
    evidence = {v: s for v, s in query.interventions.items() if v in keep}
    return posterior(factors, query.targets, evidence)


def _sweep(cbn: Cbn, do_vars: list[int]):
    cards = [cbn.diagram.cards[v] for v in do_vars]
    return itertools.product(*[range(c) for c in cards])


def interventional_table(cbn: Cbn, targets: Iterable[int], do_vars: Iterable[int]) -> Factor:
    """P(targets | do(X=x)) for every x, as one Factor over X and the targets.

    Each slice at a fixed x is normalized over the targets.
    """
    targets = sorted(cbn.diagram.id_of(t) for t in targets)
    do_vars = sorted(cbn.diagram.id_of(v) for v in do_vars)
    scope = sorted(targets + do_vars)
    cards = [cbn.diagram.cards[v] for v in scope]
    values = np.zeros(cards)
    for x in _sweep(cbn, do_vars):
        f = interventional_query(cbn, Query(frozenset(targets), dict(zip(do_vars, x))))
        index = tuple(x[do_vars.index(v)] if v in do_vars else slice(None) for v in scope)
        values[index] = f.values
    return Factor(scope, values)


def plugin_table(expr: Expr, data, targets: Iterable[int], renormalize: bool = False) -> PluginResult:
    """Plug-in estimate of `expr` from `data`, optionally renormalized over `targets`."""
    result = eval_estimand_plugin(expr, data)
    if not renormalize:
        return result
    return PluginResult(renormalize_over(result.factor, targets), result.zero_mass, result.distinct_rows)


def renormalize_over(f: Factor, targets: Iterable[int]) -> Factor:
    """Rescale `f` so it sums to one over `targets` for every other assignment.

    Slices with zero mass stay zero.
    """
    axes = tuple(f.axis(t) for t in targets)
    total = f.values.sum(axis=axes, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(total > 0, f.values / np.where(total > 0, total, 1.0), 0.0)
    return Factor(f.scope, values)


def broadcast_to(f: Factor, scope: Iterable[int], cards: Iterable[int]) -> Factor:
    """Repeat `f` along variables of `scope` it does not mention.

    Estimands whose value does not depend on some intervened variable (for
    example a bare prob(Y)) are broadcast so they align with the truth table.
    """
    pairs = sorted(zip(scope, cards))
    scope, cards = [v for v, _ in pairs], [c for _, c in pairs]
    if not set(f.scope) <= set(scope):
        raise ShapeMismatch(f"{f.scope} is not contained in {scope}")
    shape = [c if v in f.scope else 1 for v, c in zip(scope, cards)]
    values = np.broadcast_to(f.values.reshape(shape), cards).copy()
    return Factor(scope, values)


def mad(estimate: Factor, truth: Factor) -> float:
    """Mean absolute deviation over all cells of the x-by-y table."""
    if estimate.scope != truth.scope or estimate.cards != truth.cards:
        raise ShapeMismatch(
            f"estimate over {estimate.scope}{estimate.cards} vs truth over {truth.scope}{truth.cards}"
        )
    return float(np.mean(np.abs(estimate.values - truth.values)))
