"""Dense factor tables over discrete variables.

A factor's scope is always kept in ascending variable-id order and its table
is a numpy array whose axes follow that order (row-major when flattened).
"""
from __future__ import annotations

from collections.abc import Iterable, Mapping

import numpy as np

from .errors import CardinalityMismatch, InvalidModel, StateOutOfRange, UnknownVariable


class Factor:
    """Non-negative table over an ordered scope of discrete variables.

    Parameters
    ----------
    scope : iterable of int
        Variable ids. Any order is accepted; the table is transposed so that
        the stored scope is ascending.
    values : array_like
        Table with one axis per scope variable, in the order given by `scope`.
        A flat array is reshaped using `cards` when given.
    cards : iterable of int, optional
        Cardinalities in the order given by `scope`. Inferred from `values`
        when omitted.
    """

    __slots__ = ("scope", "cards", "values")

    def __init__(self, scope: Iterable[int], values, cards: Iterable[int] | None = None):
        scope = tuple(int(v) for v in scope)
        values = np.asarray(values, dtype=float)
        if cards is not None:
            cards = tuple(int(c) for c in cards)
            if len(cards) != len(scope):
                raise InvalidModel("cards and scope differ in length")
            if values.size != int(np.prod(cards, dtype=np.int64)):
                raise InvalidModel(
                    f"table has {values.size} cells, expected {int(np.prod(cards))}"
                )
            values = values.reshape(cards)
        if values.ndim != len(scope):
            raise InvalidModel(f"table rank {values.ndim} does not match scope {scope}")
        if len(set(scope)) != len(scope):
            raise InvalidModel(f"duplicate variables in scope {scope}")
        order = np.argsort(scope, kind="stable")
        if len(scope) > 1 and np.any(np.diff(order) != 1):
            scope = tuple(scope[i] for i in order)
            values = np.transpose(values, order)
        self.scope = scope
        self.cards = tuple(values.shape)
        # ascontiguousarray would promote 0-d tables to shape (1,)
        self.values = values if values.flags.c_contiguous else values.copy(order="C")

    @classmethod
    def scalar(cls, value: float = 1.0) -> Factor:
        return cls((), np.asarray(value, dtype=float))

    def card_map(self) -> dict[int, int]:
        return dict(zip(self.scope, self.cards))

    def axis(self, var: int) -> int:
        try:
            return self.scope.index(var)
        except ValueError:
            raise UnknownVariable(f"variable {var} not in scope {self.scope}") from None

    def total(self) -> float:
        return float(self.values.sum())

    def normalized(self) -> Factor:
        return Factor(self.scope, self.values / self.values.sum())

    def __repr__(self):
        return f"Factor(scope={self.scope}, cards={self.cards})"

    def to_tsv(self, names: Mapping[int, str] | None = None) -> str:
        """Debug dump: one ``assignment<TAB>value`` line per cell."""
        lines = []
        label = (lambda v: names[v]) if names else str
        for idx in np.ndindex(*self.cards):
            assignment = ",".join(f"{label(v)}={s}" for v, s in zip(self.scope, idx))
            lines.append(f"{assignment}\t{float(self.values[idx])!r}")
        return "\n".join(lines) + "\n"


def _aligned(f: Factor, scope: tuple[int, ...]) -> np.ndarray:
    """View of ``f.values`` broadcastable against a table over `scope`."""
    shape = [1] * len(scope)
    for v, c in zip(f.scope, f.cards):
        shape[scope.index(v)] = c
    return f.values.reshape(shape)


def factor_product(a: Factor, b: Factor) -> Factor:
    cards = a.card_map()
    for v, c in zip(b.scope, b.cards):
        if cards.setdefault(v, c) != c:
            raise CardinalityMismatch(f"variable {v}: {cards[v]} vs {c}")
    scope = tuple(sorted(cards))
    return Factor(scope, _aligned(a, scope) * _aligned(b, scope))


def factor_marginalize(f: Factor, drop: Iterable[int]) -> Factor:
    drop = set(drop)
    axes = tuple(f.axis(v) for v in sorted(drop))
    if not axes:
        return f
    keep = tuple(v for v in f.scope if v not in drop)
    return Factor(keep, f.values.sum(axis=axes))


def factor_restrict(f: Factor, assignment: Mapping[int, int]) -> Factor:
    if not assignment:
        return f
    index: list = [slice(None)] * len(f.scope)
    for v, s in assignment.items():
        ax = f.axis(v)
        if not 0 <= s < f.cards[ax]:
            raise StateOutOfRange(f"state {s} out of range for variable {v}")
        index[ax] = int(s)
    keep = tuple(v for v in f.scope if v not in assignment)
    return Factor(keep, f.values[tuple(index)])
