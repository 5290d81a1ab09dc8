"""Identification of P(y | do(x)) on an ADMG.

Recursive ID algorithm (Shpitser & Pearl, building on Tian's c-component
factorization). Distributions passed down the recursion are either a
marginal of the observational distribution, for which conditionals are plain
``prob`` terms, or a general expression, whose conditionals are written as
ratios of partial sums.
"""
from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

from ..model import Admg, CausalDiagram, Query, project_to_admg
from .estimand import Constant, Expr, Product, Prob, Quotient, Sum, free_variables, simplify

__all__ = ["NotIdentifiable", "identify", "identify_query", "c_components", "pin_states"]


@dataclass(frozen=True)
class NotIdentifiable:
    """Hedge witness: two nested c-forests rooted in the outcome set."""

    forest: frozenset[str]
    subforest: frozenset[str]

    def __bool__(self):
        return False


class _Hedge(Exception):
    def __init__(self, forest, subforest):
        super().__init__()
        self.witness = NotIdentifiable(frozenset(forest), frozenset(subforest))


@dataclass(frozen=True)
class _Graph:
    nodes: tuple[str, ...]  # topological order
    directed: frozenset[tuple[str, str]]
    bidirected: frozenset[frozenset[str]]

    def sub(self, keep: Iterable[str]) -> _Graph:
        keep = set(keep)
        return _Graph(
            tuple(n for n in self.nodes if n in keep),
            frozenset((a, b) for a, b in self.directed if a in keep and b in keep),
            frozenset(e for e in self.bidirected if e <= keep),
        )

    def cut_incoming(self, x: set[str]) -> _Graph:
        return _Graph(
            self.nodes,
            frozenset((a, b) for a, b in self.directed if b not in x),
            self.bidirected,
        )

    def ancestors(self, seeds: Iterable[str]) -> set[str]:
        parents: dict[str, list[str]] = {}
        for a, b in self.directed:
            parents.setdefault(b, []).append(a)
        out, stack = set(), list(seeds)
        while stack:
            v = stack.pop()
            if v not in out:
                out.add(v)
                stack.extend(parents.get(v, ()))
        return out


def c_components(nodes: Iterable[str], bidirected: Iterable[frozenset[str]]) -> list[frozenset[str]]:
    """Districts: connected components of the bidirected part, in node order."""
    nodes = list(nodes)
    nbrs: dict[str, set[str]] = {n: set() for n in nodes}
    for e in bidirected:
        a, b = tuple(e)
        if a in nbrs and b in nbrs:
            nbrs[a].add(b)
            nbrs[b].add(a)
    seen: set[str] = set()
    out = []
    for n in nodes:
        if n in seen:
            continue
        comp, stack = set(), [n]
        while stack:
            v = stack.pop()
            if v not in comp:
                comp.add(v)
                stack.extend(nbrs[v] - comp)
        seen |= comp
        out.append(frozenset(comp))
    return out


@dataclass(frozen=True)
class _Dist:
    """Distribution over the current variables ``scope``.

    ``expr is None`` means the observational marginal P(scope).
    """

    scope: frozenset[str]
    expr: Expr | None = None

    def marginal(self, keep: Iterable[str], order: tuple[str, ...]) -> _Dist:
        keep = frozenset(keep)
        if self.expr is None:
            return _Dist(keep)
        drop = tuple(v for v in order if v in self.scope and v not in keep)
        return _Dist(keep, Sum(drop, self.expr) if drop else self.expr)

    def as_expr(self, keep: Iterable[str], order: tuple[str, ...]) -> Expr:
        """Expression for the marginal of this distribution on `keep`."""
        keep = frozenset(keep)
        if self.expr is None:
            return Prob(tuple(v for v in order if v in keep)) if keep else Constant(1)
        drop = tuple(v for v in order if v in self.scope and v not in keep)
        return Sum(drop, self.expr) if drop else self.expr

    def conditional(self, v: str, before: tuple[str, ...], order: tuple[str, ...]) -> Expr:
        """P(v | before) where `before` lists the predecessors of v in `order`."""
        if self.expr is None:
            return Prob((v,), before)
        num = self.as_expr(set(before) | {v}, order)
        if not before:
            return num
        return Quotient(num, self.as_expr(before, order))


def _id(y: frozenset[str], x: frozenset[str], P: _Dist, G: _Graph) -> Expr:
    V = frozenset(G.nodes)
    order = G.nodes
    # line 1
    if not x:
        return P.as_expr(y, order)
    # line 2
    an = G.ancestors(y)
    if an != V:
        return _id(y, x & an, P.marginal(an, order), G.sub(an))
    # line 3
    w = (V - x) - G.cut_incoming(set(x)).ancestors(y)
    if w:
        return _id(y, x | w, P, G)
    rest = V - x
    comps = c_components([n for n in order if n in rest], G.sub(rest).bidirected)
    # line 4
    if len(comps) > 1:
        terms = tuple(_id(s, V - s, P, G) for s in comps)
        bound = tuple(n for n in order if n in V - (y | x))
        return Sum(bound, Product(terms)) if bound else Product(terms)
    S = comps[0]
    top = c_components(order, G.bidirected)
    # line 5
    if len(top) == 1 and top[0] == V:
        raise _Hedge(V, S)
    position = {n: i for i, n in enumerate(order)}

    def q_factor(block: frozenset[str]) -> list[Expr]:
        return [
            P.conditional(v, order[: position[v]], order)
            for v in order
            if v in block
        ]

    # line 6
    if S in top:
        bound = tuple(n for n in order if n in S - y)
        body = Product(tuple(q_factor(S)))
        return Sum(bound, body) if bound else body
    # line 7
    for S2 in top:
        if S < S2:
            P2 = _Dist(S2, Product(tuple(q_factor(S2))))
            return _id(y, x & S2, P2, G.sub(S2))
    raise AssertionError("c-component not contained in any district")  # pragma: no cover


def identify(
    admg: Admg, targets: Iterable[str], interventions: Iterable[str] = (), pin: int = 0
) -> Expr | NotIdentifiable:
    """Estimand for P(targets | do(interventions)) or a hedge witness.

    Free variables outside the query that the estimand provably does not
    depend on are fixed at state `pin`.
    """
    y, x = frozenset(targets), frozenset(interventions)
    unknown = (y | x) - set(admg.nodes)
    if unknown:
        raise KeyError(f"unknown variables {sorted(unknown)}")
    if y & x:
        raise ValueError("targets and interventions overlap")
    G = _Graph(admg.nodes, admg.directed, admg.bidirected)
    try:
        expr = _id(y, x, _Dist(frozenset(admg.nodes)), G)
    except _Hedge as h:
        return h.witness
    expr = simplify(expr)
    extra = free_variables(expr) - (y | x)
    if extra:
        expr = pin_states(expr, {v: pin for v in extra})
    return expr


def pin_states(expr: Expr, states: dict[str, int]) -> Expr:
    """Replace free conditioning variables by fixed states.

    Variables the recursion adds to the intervention set because they cannot
    affect the outcome stay free in the estimand although its value does not
    depend on them. Pinning them keeps the free variables within the query.
    """
    if isinstance(expr, Prob):
        hit = [v for v in expr.given if v in states]
        if set(expr.targets) & set(states):
            raise ValueError(f"cannot pin outcome variables {sorted(set(expr.targets) & set(states))}")
        if not hit:
            return expr
        given = tuple(v for v in expr.given if v not in states)
        return Prob(expr.targets, given, expr.fixed + tuple((v, states[v]) for v in hit))
    if isinstance(expr, Sum):
        inner = {v: s for v, s in states.items() if v not in expr.variables}
        return Sum(expr.variables, pin_states(expr.body, inner))
    if isinstance(expr, Product):
        return Product(tuple(pin_states(t, states) for t in expr.terms))
    if isinstance(expr, Quotient):
        return Quotient(pin_states(expr.numerator, states), pin_states(expr.denominator, states))
    return expr


def identify_query(diagram: CausalDiagram, query: Query) -> Expr | NotIdentifiable:
    names = diagram.names
    return identify(
        project_to_admg(diagram),
        [names[t] for t in query.targets],
        [names[v] for v in query.interventions],
    )
