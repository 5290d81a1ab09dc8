"""Numerical evaluation of estimand expressions.

Two backends share one tree walker:

* dense tables with exact conditionals computed from a CBN, and
* sparse tables (pandas frames holding only non-zero cells) with empirical
  conditionals computed from data, i.e. the plug-in estimator.

Bound summation variables are renamed to fresh labels on entry, so a
variable summed inside an expression never collides with a free variable of
the same name outside it. A ratio whose denominator is zero contributes zero.
"""
from __future__ import annotations

import itertools
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..factor import Factor
from ..inference import marginal
from ..model import Cbn
from .estimand import Constant, Expr, Product, Prob, Quotient, Sum, free_variables

__all__ = ["eval_estimand_exact", "eval_estimand_plugin", "PluginResult", "SparseJoint"]


class _Walker:
    """Evaluate an expression tree against a table backend."""

    def __init__(self, cards: Mapping[str, int]):
        self.cards = cards
        self._fresh = itertools.count()

    def run(self, expr: Expr):
        return self.visit(expr, {})

    def visit(self, expr: Expr, env: dict[str, str]):
        if isinstance(expr, Prob):
            return self.prob(expr, env)
        if isinstance(expr, Constant):
            return self.constant(float(expr.value))
        if isinstance(expr, Product):
            return self.product([self.visit(t, env) for t in expr.terms])
        if isinstance(expr, Quotient):
            return self.quotient(self.visit(expr.numerator, env), self.visit(expr.denominator, env))
        if isinstance(expr, Sum):
            inner = dict(env)
            labels = []
            for v in expr.variables:
                label = f"{v}#{next(self._fresh)}"
                inner[v] = label
                labels.append(label)
            self.label_cards.update({lab: self.cards[v] for v, lab in zip(expr.variables, labels)})
            if isinstance(expr.body, Product):
                terms = [self.visit(t, inner) for t in expr.body.terms]
                return self.sum_product(terms, labels)
            return self.sum_product([self.visit(expr.body, inner)], labels)
        raise TypeError(f"not an estimand node: {expr!r}")


# --- dense backend -------------------------------------------------------------


@dataclass
class _Dense:
    labels: tuple[str, ...]
    values: np.ndarray


class _DenseWalker(_Walker):
    def __init__(self, cbn: Cbn):
        names = cbn.diagram.names
        super().__init__({n: c for n, c in zip(names, cbn.diagram.cards)})
        self.cbn = cbn
        self.label_cards = dict(self.cards)
        self._joint_cache: dict[tuple[str, ...], np.ndarray] = {}

    def _joint(self, variables: tuple[str, ...]) -> np.ndarray:
        key = tuple(sorted(variables, key=self.cbn.diagram.id_of))
        if key not in self._joint_cache:
            ids = [self.cbn.diagram.id_of(v) for v in key]
            self._joint_cache[key] = marginal(self.cbn, ids).values if ids else np.array(1.0)
        table = self._joint_cache[key]
        perm = [key.index(v) for v in variables]
        return np.transpose(table, perm) if perm else table

    def prob(self, p: Prob, env):
        fixed = dict(p.fixed)
        cond = tuple(p.given) + tuple(fixed)
        both = tuple(p.targets) + cond
        joint = self._joint(both)
        denom = self._joint(cond)
        nt = len(p.targets)
        denom = denom.reshape((1,) * nt + denom.shape)
        with np.errstate(invalid="ignore", divide="ignore"):
            table = np.where(denom > 0, joint / np.where(denom > 0, denom, 1.0), 0.0)
        if fixed:
            index = tuple([slice(None)] * (nt + len(p.given)) + [fixed[v] for v in fixed])
            table = table[index]
        labels = tuple(env.get(v, v) for v in tuple(p.targets) + tuple(p.given))
        return _Dense(labels, table)

    def constant(self, value):
        return _Dense((), np.array(value))

    def _einsum(self, tables: Sequence[_Dense], out: Sequence[str]) -> _Dense:
        every = sorted({lab for t in tables for lab in t.labels} | set(out))
        idx = {lab: i for i, lab in enumerate(every)}
        args: list = []
        for t in tables:
            args += [t.values, [idx[lab] for lab in t.labels]]
        values = np.einsum(*args, [idx[lab] for lab in out], optimize="greedy")
        return _Dense(tuple(out), np.asarray(values))

    def product(self, tables):
        labels = tuple(dict.fromkeys(lab for t in tables for lab in t.labels))
        return self._einsum(tables, labels)

    def sum_product(self, tables, bound):
        bound = set(bound)
        present = {lab for t in tables for lab in t.labels}
        keep = tuple(dict.fromkeys(lab for t in tables for lab in t.labels if lab not in bound))
        out = self._einsum(tables, keep)
        scale = np.prod([self.label_cards[b] for b in bound - present], dtype=float)
        if scale != 1.0:
            out.values = out.values * scale
        return out

    @staticmethod
    def _expand(t: _Dense, labels: tuple[str, ...]) -> np.ndarray:
        mine = [lab for lab in labels if lab in t.labels]
        values = np.transpose(t.values, [t.labels.index(lab) for lab in mine]) if mine else t.values
        shape = [t.values.shape[t.labels.index(lab)] if lab in t.labels else 1 for lab in labels]
        return values.reshape(shape)

    def quotient(self, num: _Dense, den: _Dense):
        labels = tuple(dict.fromkeys(num.labels + den.labels))
        n, d = self._expand(num, labels), self._expand(den, labels)
        with np.errstate(invalid="ignore", divide="ignore"):
            values = np.where(d > 0, n / np.where(d > 0, d, 1.0), 0.0)
        return _Dense(labels, values)


def _to_factor(labels: Sequence[str], values: np.ndarray, id_of) -> Factor:
    return Factor([id_of(v) for v in labels], values)


def eval_estimand_exact(expr: Expr, cbn: Cbn) -> Factor:
    """Evaluate `expr` on the exact observational distribution of `cbn`."""
    walker = _DenseWalker(cbn)
    out = walker.run(expr)
    free = sorted(free_variables(expr), key=cbn.diagram.id_of)
    out = walker._einsum([out], tuple(free))
    return _to_factor(free, out.values, cbn.diagram.id_of)


# --- sparse backend ------------------------------------------------------------


class SparseJoint:
    """Counts of the distinct observed rows of a dataset."""

    def __init__(self, frame: pd.DataFrame):
        grouped = frame.groupby(list(frame.columns), sort=True).size()
        self.table = grouped.reset_index(name="n")
        self.m = int(len(frame))
        self._cache: dict[tuple, pd.DataFrame] = {}

    def __len__(self):
        return len(self.table)

    def counts(self, variables: Sequence[str], fixed: Mapping[str, int] | None = None) -> pd.DataFrame:
        variables = tuple(variables)
        fixed = dict(fixed or {})
        key = (variables, tuple(sorted(fixed.items())))
        if key not in self._cache:
            t = self.table
            for v, s in fixed.items():
                t = t[t[v] == s]
            if variables:
                out = t.groupby(list(variables), sort=True)["n"].sum().reset_index()
            else:
                out = pd.DataFrame({"n": [t["n"].sum()]})
            self._cache[key] = out[out["n"] > 0]
        return self._cache[key]


def _merge(a: pd.DataFrame, b: pd.DataFrame) -> pd.DataFrame:
    on = [c for c in a.columns if c != "p" and c in b.columns]
    if on:
        return a.merge(b, on=on, suffixes=("_a", "_b"))
    return a.merge(b, how="cross", suffixes=("_a", "_b"))


class _SparseWalker(_Walker):
    def __init__(self, joint: SparseJoint, cards: Mapping[str, int]):
        super().__init__(cards)
        self.joint = joint
        self.label_cards = dict(cards)

    def prob(self, p: Prob, env):
        fixed = dict(p.fixed)
        both = list(p.targets) + list(p.given)
        num = self.joint.counts(both, fixed)
        den = self.joint.counts(list(p.given), fixed)
        if p.given:
            t = num.merge(den, on=list(p.given), suffixes=("", "_den"))
            t = t.assign(p=t["n"] / t["n_den"])[both + ["p"]]
        else:
            total = den["n"].sum() if len(den) else 0
            t = num.assign(p=num["n"] / total if total else 0.0)[both + ["p"]]
        return t.rename(columns={v: env.get(v, v) for v in both}).reset_index(drop=True)

    def constant(self, value):
        return pd.DataFrame({"p": [value]})

    def product(self, tables):
        out = tables[0]
        for t in tables[1:]:
            m = _merge(out, t)
            m["p"] = m["p_a"] * m["p_b"]
            out = m.drop(columns=["p_a", "p_b"])
        return out[out["p"] != 0]

    def sum_product(self, tables, bound):
        # join terms one at a time, summing out a bound label once no later term needs it
        bound = list(bound)
        present = {c for t in tables for c in t.columns if c != "p"}
        out = tables[0]
        for i, t in enumerate(tables[1:], start=1):
            m = _merge(out, t)
            m["p"] = m["p_a"] * m["p_b"]
            out = m.drop(columns=["p_a", "p_b"])
            out = out[out["p"] != 0]
            later = {c for u in tables[i + 1:] for c in u.columns}
            done = [b for b in bound if b in out.columns and b not in later]
            out = self._sum_out(out, done)
        out = self._sum_out(out, [b for b in bound if b in out.columns])
        absent = [b for b in bound if b not in present]
        if absent:
            out = out.assign(p=out["p"] * float(np.prod([self.label_cards[b] for b in absent])))
        return out

    @staticmethod
    def _sum_out(t: pd.DataFrame, labels):
        if not labels:
            return t
        keep = [c for c in t.columns if c != "p" and c not in labels]
        if keep:
            return t.groupby(keep, sort=True)["p"].sum().reset_index()
        return pd.DataFrame({"p": [t["p"].sum()]})

    def quotient(self, num, den):
        m = _merge(num, den)
        m = m[m["p_b"] > 0]
        m = m.assign(p=m["p_a"] / m["p_b"]).drop(columns=["p_a", "p_b"])
        return m[m["p"] != 0]


@dataclass(frozen=True)
class PluginResult:
    """Plug-in estimate plus diagnostics.

    ``zero_mass`` is set when no observed configuration supports the
    estimate, in which case ``factor`` is all zeros.
    """

    factor: Factor
    zero_mass: bool
    distinct_rows: int


def eval_estimand_plugin(expr: Expr, data) -> PluginResult:
    """Evaluate `expr` with empirical conditional frequencies from `data`.

    `data` is a :class:`~cbnlearn.sampling.Dataset`. Only configurations seen
    in the data carry mass, so every table stays linear in the number of
    distinct rows. The raw estimate is returned without renormalization.
    """
    if data.m == 0:
        raise ValueError("empty dataset")
    names = list(data.names)
    cards = dict(zip(names, data.cards))
    joint = SparseJoint(pd.DataFrame(data.rows, columns=names))
    walker = _SparseWalker(joint, cards)
    out = walker.run(expr)
    free = sorted(free_variables(expr), key=names.index)
    out = walker._sum_out(out, [c for c in out.columns if c not in free and c != "p"])
    values = np.zeros([cards[v] for v in free])
    if len(out):
        if free:
            idx = tuple(out[v].to_numpy(dtype=np.int64) for v in free)
            np.add.at(values, idx, out["p"].to_numpy())
        else:
            values = np.asarray(out["p"].sum())
    ids = [data.columns[names.index(v)] for v in free]
    return PluginResult(Factor(ids, values), not np.any(values), len(joint))
