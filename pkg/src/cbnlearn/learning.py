"""EM with latent confounders, BIC scoring and the latent-cardinality search.

Latents are parentless and every observed variable is seen in each row, so
the posterior over latents given a row factorizes into one small factor per
observed variable (its CPT sliced at the row) times the latent priors. The
E-step runs exact two-pass message passing on a junction tree of the latent
interaction graph, vectorized over the distinct data rows.
"""
from __future__ import annotations

import math
import time
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateData, InvalidModel
from .inference import eliminate, min_fill_from_scopes, posterior
from .model import Cbn, CausalDiagram, Cpt
from .sampling import Dataset, make_rng

__all__ = [
    "EmConfig",
    "EmFit",
    "LearnResult",
    "EStep",
    "log_likelihood",
    "free_parameters",
    "bic_score",
    "em_fit",
    "em4ci_learn",
    "k_schedule",
    "frequency_estimate",
]

PSEUDOCOUNT = 1e-9


@dataclass(frozen=True)
class EmConfig:
    max_iterations: int = 500
    ll_rel_tolerance: float = 1e-6
    restarts: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if not self.ll_rel_tolerance > 0:
            raise ValueError("ll_rel_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


def _table_shape(diagram: CausalDiagram, v: int) -> tuple[int, ...]:
    return tuple(diagram.cards[p] for p in diagram.parents[v]) + (diagram.cards[v],)


def tables_of(cbn: Cbn) -> list[np.ndarray]:
    """CPTs as arrays shaped (parent cards..., child card), parents ascending."""
    return [c.rows().reshape(_table_shape(cbn.diagram, c.child)) for c in cbn.cpts]


def cbn_from_tables(diagram: CausalDiagram, tables: Sequence[np.ndarray]) -> Cbn:
    cpts = [Cpt.from_rows(diagram, v, t.reshape(-1, diagram.cards[v])) for v, t in enumerate(tables)]
    return Cbn(diagram, cpts, validate=False)


def _elimination_cliques(scopes, order):
    adj: dict[int, set[int]] = {}
    for s in scopes:
        for v in s:
            adj.setdefault(v, set()).update(w for w in s if w != v)
    cliques = []
    for v in order:
        nbrs = adj.pop(v, set())
        for a in nbrs:
            adj[a].discard(v)
            adj[a].update(w for w in nbrs if w != a)
        cliques.append((v, frozenset(nbrs)))
    return cliques


@dataclass
class _Clique:
    var: int
    scope: tuple[int, ...]  # sorted latent ids, var included
    sep: tuple[int, ...]  # scope without var
    parent: int | None
    children: list[int] = field(default_factory=list)
    factors: list[int] = field(default_factory=list)  # observed ids or ~latent for priors


class EStep:
    """Expected sufficient statistics and log-likelihood for one diagram and dataset."""

    def __init__(self, diagram: CausalDiagram, data: Dataset):
        if data.m == 0:
            raise DegenerateData("dataset is empty")
        if tuple(data.columns) != tuple(diagram.observed):
            raise InvalidModel("dataset columns do not match the diagram's observed variables")
        cards = diagram.cards
        if any(c != cards[v] for v, c in zip(data.columns, data.cards)):
            raise InvalidModel("dataset cardinalities do not match the diagram")
        self.diagram = diagram
        self.m = data.m
        rows, counts = data.unique()
        self.rows = rows
        self.weights = counts.astype(float)
        self.n_rows = rows.shape[0]
        full = np.zeros((self.n_rows, len(diagram)), dtype=np.int64)
        full[:, list(diagram.observed)] = rows
        self.latents = tuple(diagram.latents)
        latent_set = set(self.latents)

        # per observed variable: flat table index of each (row, latent-parent config)
        self.shapes = [_table_shape(diagram, v) for v in range(len(diagram))]
        self.flat: dict[int, np.ndarray] = {}
        self.latent_parents: dict[int, tuple[int, ...]] = {}
        for v in diagram.observed:
            shape = self.shapes[v]
            strides = np.cumprod((1,) + shape[::-1])[::-1][1:]
            members = diagram.parents[v] + (v,)
            base = np.zeros(self.n_rows, dtype=np.int64)
            lat, lat_strides = [], []
            for p, stride in zip(members, strides):
                if p in latent_set:
                    lat.append(p)
                    lat_strides.append(stride)
                else:
                    base += full[:, p] * stride
            offsets = np.zeros(1, dtype=np.int64)
            for p, stride in zip(lat, lat_strides):
                offsets = (offsets[:, None] + np.arange(cards[p]) * stride).ravel()
            self.flat[v] = base[:, None] + offsets[None, :]
            self.latent_parents[v] = tuple(lat)
        self._build_tree()

    def _build_tree(self):
        scopes = [(u,) for u in self.latents]
        scopes += [lp for lp in self.latent_parents.values() if lp]
        order = min_fill_from_scopes(scopes).order if self.latents else ()
        position = {v: i for i, v in enumerate(order)}
        cliques = []
        for v, nbrs in _elimination_cliques(scopes, order):
            sep = tuple(sorted(nbrs))
            parent = min(nbrs, key=position.__getitem__) if nbrs else None
            cliques.append(_Clique(v, tuple(sorted(nbrs | {v})), sep, parent))
        for c in cliques:
            if c.parent is not None:
                c.parent = position[c.parent]
                cliques[c.parent].children.append(position[c.var])
        for u in self.latents:
            cliques[position[u]].factors.append(~u)
        for v, lp in self.latent_parents.items():
            if lp:
                first = min(lp, key=position.__getitem__)
                cliques[position[first]].factors.append(v)
        self.cliques = cliques
        self.label = {u: i + 1 for i, u in enumerate(self.latents)}

    def _labels(self, scope) -> list[int]:
        return [0] + [self.label[u] for u in scope]

    def run(self, tables: Sequence[np.ndarray], want_counts: bool = True):
        """Return (log-likelihood, expected counts shaped like `tables`)."""
        diagram = self.diagram
        w = self.weights
        counts = [np.zeros_like(t, dtype=float) for t in tables] if want_counts else None
        log_rows = np.zeros(self.n_rows)

        values: dict[int, np.ndarray] = {}
        for v in diagram.observed:
            gathered = np.ravel(tables[v])[self.flat[v]]
            lp = self.latent_parents[v]
            if lp:
                values[v] = gathered.reshape((self.n_rows,) + tuple(diagram.cards[u] for u in lp))
            else:
                with np.errstate(divide="ignore"):
                    log_rows += np.log(gathered[:, 0])
                if want_counts:
                    counts[v] += np.bincount(
                        self.flat[v][:, 0], weights=w, minlength=tables[v].size
                    ).reshape(tables[v].shape)

        pots, ups = [], []
        for c in self.cliques:
            args: list = []
            for f in c.factors:
                if f < 0:
                    args += [tables[~f], [self.label[~f]]]
                else:
                    args += [values[f], self._labels(self.latent_parents[f])]
            for ch in c.children:
                args += [ups[ch], self._labels(self.cliques[ch].sep)]
            batched = any(0 in lab for lab in args[1::2])
            out = self._labels(c.scope)
            pot = np.einsum(*args, out if batched else out[1:], optimize=len(args) > 4)
            if not batched:
                pot = np.broadcast_to(pot, (self.n_rows,) + pot.shape).copy()
            axis = 1 + c.scope.index(c.var)
            up = pot.sum(axis=axis)
            peak = up.reshape(self.n_rows, -1).max(axis=1)
            safe = np.where(peak > 0, peak, 1.0)
            up = up / safe.reshape((-1,) + (1,) * (up.ndim - 1))
            with np.errstate(divide="ignore"):
                log_rows += np.log(np.where(peak > 0, safe, 0.0))
            pots.append(pot)
            ups.append(up)
        # a root's up message is a per-row scalar already folded into log_rows
        ll = float(np.dot(w, log_rows)) if np.all(np.isfinite(log_rows)) else -math.inf
        if not want_counts:
            return ll, None

        downs: list[np.ndarray | None] = [None] * len(self.cliques)
        for i in reversed(range(len(self.cliques))):
            c = self.cliques[i]
            belief = pots[i]
            if c.parent is not None:
                belief = belief * self._expand(downs[i], c.sep, c.scope)
            for ch in c.children:
                cs = self.cliques[ch]
                up = self._expand(ups[ch], cs.sep, c.scope)
                with np.errstate(invalid="ignore", divide="ignore"):
                    ratio = np.where(up > 0, belief / np.where(up > 0, up, 1.0), 0.0)
                drop = tuple(1 + c.scope.index(u) for u in c.scope if u not in cs.sep)
                msg = ratio.sum(axis=drop)
                peak = msg.reshape(self.n_rows, -1).max(axis=1)
                downs[ch] = msg / np.where(peak > 0, peak, 1.0).reshape((-1,) + (1,) * (msg.ndim - 1))
            total = belief.reshape(self.n_rows, -1).sum(axis=1)
            belief = belief / np.where(total > 0, total, 1.0).reshape((-1,) + (1,) * (belief.ndim - 1))
            for f in c.factors:
                scope = (~f,) if f < 0 else self.latent_parents[f]
                drop = tuple(1 + c.scope.index(u) for u in c.scope if u not in scope)
                q = belief.sum(axis=drop) if drop else belief
                q = q.reshape(self.n_rows, -1)
                if f < 0:
                    counts[~f] += w @ q
                else:
                    counts[f] += np.bincount(
                        self.flat[f].ravel(), weights=(w[:, None] * q).ravel(), minlength=tables[f].size
                    ).reshape(tables[f].shape)
        return ll, counts

    @staticmethod
    def _expand(t: np.ndarray, scope, full) -> np.ndarray:
        shape = (t.shape[0],) + tuple(t.shape[1 + scope.index(u)] if u in scope else 1 for u in full)
        return t.reshape(shape)

    def reference(self, tables: Sequence[np.ndarray]):
        """Same contract as :meth:`run`, one exact elimination per distinct row."""
        diagram = self.diagram
        cbn = cbn_from_tables(diagram, tables)
        factors = cbn.factors()
        counts = [np.zeros_like(t, dtype=float) for t in tables]
        obs = list(diagram.observed)
        ll = 0.0
        for r in range(self.n_rows):
            evidence = dict(zip(obs, (int(x) for x in self.rows[r])))
            lat = list(self.latents)
            if lat:
                post = posterior(factors, lat, evidence)
            p_row = _row_probability(factors, evidence, lat)
            ll += self.weights[r] * (math.log(p_row) if p_row > 0 else -math.inf)
            for v in range(len(diagram)):
                members = diagram.parents[v] + (v,)
                hidden = [u for u in members if u in self.latents]
                if not hidden:
                    idx = tuple(evidence[u] for u in members)
                    counts[v][idx] += self.weights[r]
                    continue
                fam = post.values.sum(axis=tuple(i for i, u in enumerate(post.scope) if u not in hidden))
                for config in np.ndindex(*fam.shape):
                    assign = dict(evidence)
                    assign.update(zip(hidden, config))
                    counts[v][tuple(assign[u] for u in members)] += self.weights[r] * fam[config]
        return ll, counts


def _row_probability(factors, evidence, latents) -> float:
    scopes = [tuple(v for v in f.scope if v not in evidence) for f in factors]
    order = min_fill_from_scopes(scopes).order
    return float(eliminate(factors, order, evidence).total())


def _mstep(counts: Sequence[np.ndarray]) -> list[np.ndarray]:
    out = []
    for c in counts:
        c = c + PSEUDOCOUNT
        out.append(c / c.sum(axis=-1, keepdims=True))
    return out


def _random_tables(diagram: CausalDiagram, rng: np.random.Generator) -> list[np.ndarray]:
    tables = []
    for v in range(len(diagram)):
        shape = _table_shape(diagram, v)
        rows = rng.dirichlet(np.ones(shape[-1]), size=int(np.prod(shape[:-1], dtype=np.int64)))
        tables.append(rows.reshape(shape))
    return tables


def log_likelihood(cbn: Cbn, data: Dataset) -> float:
    """Natural-log likelihood of the observed rows with latents summed out."""
    ll, _ = EStep(cbn.diagram, data).run(tables_of(cbn), want_counts=False)
    return ll


def free_parameters(diagram: CausalDiagram) -> int:
    cards = diagram.cards
    return sum((cards[v] - 1) * math.prod(cards[p] for p in ps) for v, ps in enumerate(diagram.parents))


def bic_score(ll: float, cbn: Cbn | CausalDiagram, m: int) -> float:
    """-2 LL + p ln m, with p the number of free CPT parameters."""
    if m < 1:
        raise ValueError("m must be positive")
    diagram = cbn.diagram if isinstance(cbn, Cbn) else cbn
    return -2.0 * ll + free_parameters(diagram) * math.log(m)


def frequency_estimate(diagram: CausalDiagram, data: Dataset) -> Cbn:
    """Closed-form ML with the EM pseudocount, for diagrams without latents."""
    if diagram.latents:
        raise InvalidModel("closed-form estimation needs a fully observed diagram")
    estep = EStep(diagram, data)
    shapes = [_table_shape(diagram, v) for v in range(len(diagram))]
    _, counts = estep.run([np.full(s, 1.0 / s[-1]) for s in shapes])
    return cbn_from_tables(diagram, _mstep(counts))


@dataclass(frozen=True)
class EmFit:
    log_likelihood: float
    cbn: Cbn
    iterations: int
    trace: tuple[float, ...]  # LL of the parameters at each E-step


def em_fit(
    diagram: CausalDiagram,
    data: Dataset,
    k: int | None = None,
    init=0,
    config: EmConfig = EmConfig(),
    *,
    initial: Cbn | None = None,
    estep: EStep | None = None,
) -> EmFit:
    """Run EM from random (or given) parameters until the relative LL gain is small.

    `init` seeds the Dirichlet(1) initialization; `initial` overrides it. The
    returned log-likelihood is that of the returned parameters.
    """
    if data.m == 0:
        raise DegenerateData("dataset is empty")
    if k is not None:
        diagram = diagram.with_latent_cardinality(k)
    estep = estep or EStep(diagram, data)
    if initial is not None:
        tables = tables_of(initial)
    else:
        rng = init if isinstance(init, np.random.Generator) else make_rng(init)
        tables = _random_tables(diagram, rng)
    trace: list[float] = []
    for it in range(config.max_iterations):
        ll, counts = estep.run(tables)
        trace.append(ll)
        if it > 0:
            gain = (ll - trace[-2]) / (1.0 + abs(ll))
            if gain < config.ll_rel_tolerance:
                break
        if it + 1 == config.max_iterations:
            break
        tables = _mstep(counts)
    return EmFit(trace[-1], cbn_from_tables(diagram, tables), len(trace), tuple(trace))


def k_schedule(data_cards: Iterable[int], step: int = 2, k_max: int | None = None, start: int = 2):
    """2, 2+step, ... up to k_max (default twice the squared largest observed cardinality)."""
    cards = list(data_cards)
    if k_max is None:
        k_max = 2 * max(cards) ** 2 if cards else 2
    return list(range(start, k_max + 1, step))


@dataclass(frozen=True)
class Candidate:
    k: int
    log_likelihood: float
    bic: float
    iterations: tuple[int, ...]


@dataclass(frozen=True)
class LearnResult:
    cbn: Cbn
    log_likelihood: float
    bic: float
    k_lrn: int
    restarts_used: int
    iterations_per_restart: tuple[int, ...]
    candidates: tuple[Candidate, ...] = ()
    log: tuple[tuple[int, int, int, float], ...] = ()  # (k, restart, iteration, LL)
    seconds: float = 0.0

    def log_csv(self) -> str:
        lines = ["restart,k,iteration,log_likelihood"]
        lines += [f"{r},{k},{i},{ll!r}" for k, r, i, ll in self.log]
        return "\n".join(lines) + "\n"


def em4ci_learn(
    diagram: CausalDiagram,
    data: Dataset,
    schedule: Sequence[int] | None = None,
    config: EmConfig = EmConfig(),
) -> LearnResult:
    """BIC-guided search over a shared latent cardinality.

    For each k in `schedule` the best of ``config.restarts`` EM runs is kept.
    The search continues while the candidate's BIC is at most the incumbent's
    and returns the incumbent at the first increase.
    """
    start = time.perf_counter()
    if data.m == 0:
        raise DegenerateData("dataset is empty")
    if schedule is None:
        schedule = k_schedule(data.cards)
    schedule = list(schedule)
    if not schedule or any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("k schedule must be a non-empty increasing sequence")
    best: LearnResult | None = None
    candidates: list[Candidate] = []
    log: list[tuple[int, int, int, float]] = []
    for k in schedule:
        dk = diagram.with_latent_cardinality(k)
        estep = EStep(dk, data)
        top: EmFit | None = None
        iters = []
        for r in range(config.restarts):
            fit = em_fit(dk, data, None, make_rng(config.seed, k, r), config, estep=estep)
            iters.append(fit.iterations)
            log += [(k, r, i, ll) for i, ll in enumerate(fit.trace)]
            if top is None or fit.log_likelihood > top.log_likelihood:
                top = fit
        bic = bic_score(top.log_likelihood, dk, data.m)
        candidates.append(Candidate(k, top.log_likelihood, bic, tuple(iters)))
        if best is None or bic <= best.bic:
            best = LearnResult(top.cbn, top.log_likelihood, bic, k, config.restarts, tuple(iters))
        else:
            break
        if not diagram.latents:
            break
    return LearnResult(
        best.cbn,
        best.log_likelihood,
        best.bic,
        best.k_lrn,
        best.restarts_used,
        best.iterations_per_restart,
        tuple(candidates),
        tuple(log),
        time.perf_counter() - start,
    )
