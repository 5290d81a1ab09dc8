"""Causal diagrams, CPTs, causal Bayesian networks and queries.

Latent variables are stored explicitly as parentless nodes. The mixed-graph
view (:class:`Admg`) is derived on demand and only used for identification.
"""
from __future__ import annotations

import heapq
import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import CyclicGraph, InvalidModel, LatentWithParents, StateOutOfRange, UnknownVariable
from .factor import Factor

CPT_TOLERANCE = 1e-9


class Kind(str, Enum):
    OBSERVED = "observed"
    LATENT = "latent"


@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    cardinality: int
    kind: Kind = Kind.OBSERVED

    @property
    def latent(self) -> bool:
        return self.kind is Kind.LATENT


class CausalDiagram:
    """DAG over observed and latent variables with finite domains.

    Parent lists are stored in ascending id order.
    """

    def __init__(self, variables: Sequence[Variable], parents: Sequence[Iterable[int]]):
        variables = tuple(variables)
        if len(parents) != len(variables):
            raise InvalidModel("need one parent list per variable")
        for i, v in enumerate(variables):
            if v.id != i:
                raise InvalidModel(f"variable ids must be 0..n-1, got {v.id} at {i}")
            if v.cardinality < 1:
                raise InvalidModel(f"{v.name}: cardinality must be positive")
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise InvalidModel("duplicate variable names")
        plist = []
        for i, ps in enumerate(parents):
            ps = list(ps)
            if len(set(ps)) != len(ps):
                raise InvalidModel(f"{variables[i].name}: duplicate parents")
            for p in ps:
                if not 0 <= p < len(variables) or p == i:
                    raise InvalidModel(f"{variables[i].name}: bad parent id {p}")
            if ps and variables[i].latent:
                raise LatentWithParents(f"latent {variables[i].name} has parents")
            plist.append(tuple(sorted(ps)))
        self.variables = variables
        self.parents = tuple(plist)
        self._index = {v.name: v.id for v in variables}
        self.order = topological_order(self)

    @classmethod
    def from_edges(
        cls,
        names: Sequence[str],
        edges: Iterable[tuple[str, str]],
        cards: Mapping[str, int] | int = 2,
        latent: Iterable[str] = (),
    ) -> CausalDiagram:
        latent = set(latent)
        index = {n: i for i, n in enumerate(names)}
        parents: list[list[int]] = [[] for _ in names]
        for a, b in edges:
            parents[index[b]].append(index[a])
        card = (lambda n: cards[n]) if isinstance(cards, Mapping) else (lambda n: cards)
        variables = [
            Variable(i, n, card(n), Kind.LATENT if n in latent else Kind.OBSERVED)
            for i, n in enumerate(names)
        ]
        return cls(variables, parents)

    def __len__(self):
        return len(self.variables)

    def __eq__(self, other):
        return (
            isinstance(other, CausalDiagram)
            and self.variables == other.variables
            and self.parents == other.parents
        )

    def __hash__(self):
        return hash((self.variables, self.parents))

    def __repr__(self):
        return f"CausalDiagram({len(self.observed)} observed, {len(self.latents)} latent)"

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def cards(self) -> tuple[int, ...]:
        return tuple(v.cardinality for v in self.variables)

    @property
    def observed(self) -> tuple[int, ...]:
        return tuple(v.id for v in self.variables if not v.latent)

    @property
    def latents(self) -> tuple[int, ...]:
        return tuple(v.id for v in self.variables if v.latent)

    def id_of(self, name: str | int) -> int:
        if isinstance(name, (int, np.integer)):
            if not 0 <= name < len(self.variables):
                raise UnknownVariable(f"no variable with id {name}")
            return int(name)
        try:
            return self._index[name]
        except KeyError:
            raise UnknownVariable(f"no variable named {name!r}") from None

    def children(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.variables]
        for child, ps in enumerate(self.parents):
            for p in ps:
                out[p].append(child)
        return out

    def edges(self) -> list[tuple[int, int]]:
        return [(p, c) for c, ps in enumerate(self.parents) for p in ps]

    def with_cardinalities(self, cards: Mapping[int, int]) -> CausalDiagram:
        variables = [
            Variable(v.id, v.name, cards.get(v.id, v.cardinality), v.kind) for v in self.variables
        ]
        return CausalDiagram(variables, self.parents)

    def with_latent_cardinality(self, k: int) -> CausalDiagram:
        return self.with_cardinalities({u: k for u in self.latents})


def topological_order(diagram: CausalDiagram) -> list[int]:
    """Kahn's algorithm with ascending-id tie breaking."""
    n = len(diagram.variables)
    indegree = [len(ps) for ps in diagram.parents]
    children: list[list[int]] = [[] for _ in range(n)]
    for c, ps in enumerate(diagram.parents):
        for p in ps:
            children[p].append(c)
    heap = [i for i in range(n) if indegree[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for c in children[v]:
            indegree[c] -= 1
            if indegree[c] == 0:
                heapq.heappush(heap, c)
    if len(order) != n:
        raise CyclicGraph("diagram contains a directed cycle")
    return order


def truncate(diagram: CausalDiagram, interventions: Iterable[int]) -> CausalDiagram:
    """Remove every arrow into the intervened variables."""
    cut = {diagram.id_of(x) for x in interventions}
    if not cut:
        return diagram
    parents = [() if i in cut else ps for i, ps in enumerate(diagram.parents)]
    return CausalDiagram(diagram.variables, parents)


def latentify_sources(diagram: CausalDiagram) -> CausalDiagram:
    """Mark every parentless variable with at least two children as latent."""
    children = diagram.children()
    variables = [
        Variable(v.id, v.name, v.cardinality, Kind.LATENT)
        if not diagram.parents[v.id] and len(children[v.id]) >= 2
        else v
        for v in diagram.variables
    ]
    return CausalDiagram(variables, diagram.parents)


@dataclass(frozen=True)
class Admg:
    """Acyclic directed mixed graph over observed variable names.

    ``nodes`` is kept in a topological order of the directed part.
    """

    nodes: tuple[str, ...]
    directed: frozenset[tuple[str, str]]
    bidirected: frozenset[frozenset[str]] = field(default_factory=frozenset)

    def __post_init__(self):
        nodes = set(self.nodes)
        for a, b in self.directed:
            if a not in nodes or b not in nodes:
                raise UnknownVariable(f"edge {a}->{b} references unknown node")
        for e in self.bidirected:
            if len(e) != 2 or not e <= nodes:
                raise InvalidModel(f"bad bidirected edge {set(e)}")

    @classmethod
    def build(cls, nodes, directed=(), bidirected=()) -> Admg:
        directed = frozenset((a, b) for a, b in directed)
        bidirected = frozenset(frozenset(e) for e in bidirected)
        return cls(_topo_names(nodes, directed), directed, bidirected)

    def parents(self, v: str) -> set[str]:
        return {a for a, b in self.directed if b == v}

    def siblings(self, v: str) -> set[str]:
        return {w for e in self.bidirected if v in e for w in e if w != v}


def _topo_names(nodes: Iterable[str], directed: frozenset[tuple[str, str]]) -> tuple[str, ...]:
    nodes = list(nodes)
    rank = {n: i for i, n in enumerate(nodes)}
    indeg = {n: 0 for n in nodes}
    children: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in directed:
        indeg[b] += 1
        children[a].append(b)
    heap = [(rank[n], n) for n in nodes if indeg[n] == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        _, v = heapq.heappop(heap)
        out.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, (rank[c], c))
    if len(out) != len(nodes):
        raise CyclicGraph("directed part of the ADMG is cyclic")
    return tuple(out)


def project_to_admg(diagram: CausalDiagram) -> Admg:
    """Replace each multi-child latent by pairwise bidirected edges among its children."""
    names = diagram.names
    children = diagram.children()
    for u in diagram.latents:
        if diagram.parents[u]:
            raise LatentWithParents(f"latent {names[u]} has parents")
    observed = [names[i] for i in diagram.observed]
    directed = []
    for c, ps in enumerate(diagram.parents):
        for p in ps:
            if not diagram.variables[p].latent and not diagram.variables[c].latent:
                directed.append((names[p], names[c]))
    bidirected = set()
    for u in diagram.latents:
        for a, b in combinations(children[u], 2):
            if not diagram.variables[a].latent and not diagram.variables[b].latent:
                bidirected.add(frozenset((names[a], names[b])))
    return Admg.build(observed, directed, bidirected)


@dataclass(frozen=True)
class Cpt:
    """P(child | parents); ``table`` is a Factor over parents plus child."""

    child: int
    parents: tuple[int, ...]
    table: Factor

    def validate(self, atol: float = CPT_TOLERANCE) -> None:
        t = self.table.values
        if not np.all(np.isfinite(t)) or t.min(initial=0.0) < 0 or t.max(initial=0.0) > 1 + atol:
            raise InvalidModel(f"CPT of {self.child} has entries outside [0, 1]")
        sums = t.sum(axis=self.table.axis(self.child))
        if not np.allclose(sums, 1.0, rtol=0, atol=atol):
            raise InvalidModel(f"CPT of {self.child} is not normalized")

    def rows(self) -> np.ndarray:
        """Child distributions, one row per parent configuration (row-major, ascending ids)."""
        t = self.table.values
        axis = self.table.axis(self.child)
        return np.moveaxis(t, axis, -1).reshape(-1, t.shape[axis])

    @classmethod
    def from_rows(cls, diagram: CausalDiagram, child: int, rows) -> Cpt:
        parents = diagram.parents[child]
        cards = diagram.cards
        shape = [cards[p] for p in parents] + [cards[child]]
        table = np.asarray(rows, dtype=float)
        if table.size != int(np.prod(shape)):
            raise InvalidModel(
                f"CPT of {diagram.names[child]} has {table.size} entries, expected {int(np.prod(shape))}"
            )
        return cls(child, parents, Factor(parents + (child,), table.reshape(shape)))


class Cbn:
    """Causal diagram plus one CPT per variable."""

    def __init__(self, diagram: CausalDiagram, cpts: Sequence[Cpt], validate: bool = True):
        cpts = tuple(cpts)
        if len(cpts) != len(diagram):
            raise InvalidModel("need exactly one CPT per variable")
        for i, cpt in enumerate(cpts):
            if cpt.child != i or cpt.parents != diagram.parents[i]:
                raise InvalidModel(f"CPT {i} does not match the diagram's parent list")
            expected = tuple(diagram.cards[v] for v in sorted(cpt.parents + (i,)))
            if cpt.table.cards != expected:
                raise InvalidModel(f"CPT {i} has shape {cpt.table.cards}, expected {expected}")
            if validate:
                cpt.validate()
        self.diagram = diagram
        self.cpts = cpts

    def __repr__(self):
        return f"Cbn({self.diagram!r})"

    def factors(self) -> list[Factor]:
        return [c.table for c in self.cpts]

    def with_diagram(self, diagram: CausalDiagram) -> Cbn:
        """Same CPTs on a diagram differing only in variable kinds."""
        return Cbn(diagram, self.cpts, validate=False)


@dataclass(frozen=True)
class Query:
    """P(targets | do(interventions)); interventions map id -> state."""

    targets: frozenset[int]
    interventions: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "targets", frozenset(self.targets))
        object.__setattr__(self, "interventions", dict(self.interventions))

    def validate(self, diagram: CausalDiagram) -> None:
        if not self.targets:
            raise InvalidModel("query needs at least one target")
        if self.targets & set(self.interventions):
            raise InvalidModel("targets and interventions overlap")
        for v in list(self.targets) + list(self.interventions):
            var = diagram.variables[diagram.id_of(v)]
            if var.latent:
                raise InvalidModel(f"{var.name} is latent")
        for v, s in self.interventions.items():
            if not 0 <= s < diagram.cards[v]:
                raise StateOutOfRange(f"state {s} out of range for {diagram.names[v]}")


# --- model JSON --------------------------------------------------------------

_VAR_KEYS = {"name", "kind", "cardinality", "parents"}
_CPT_KEYS = {"child", "rows"}


def diagram_to_json(diagram: CausalDiagram) -> dict:
    names = diagram.names
    return {
        "variables": [
            {
                "name": v.name,
                "kind": v.kind.value,
                "cardinality": v.cardinality,
                "parents": [names[p] for p in diagram.parents[v.id]],
            }
            for v in diagram.variables
        ]
    }


def cbn_to_json(cbn: Cbn) -> dict:
    doc = diagram_to_json(cbn.diagram)
    names = cbn.diagram.names
    doc["cpts"] = [
        {"child": names[c.child], "rows": [[float(p) for p in row] for row in c.rows()]}
        for c in cbn.cpts
    ]
    return doc


def _check_keys(obj: dict, allowed: set[str], what: str) -> None:
    if not isinstance(obj, dict):
        raise InvalidModel(f"{what} must be an object")
    extra = set(obj) - allowed
    if extra:
        raise InvalidModel(f"unknown field(s) in {what}: {sorted(extra)}")
    missing = allowed - set(obj)
    if missing:
        raise InvalidModel(f"missing field(s) in {what}: {sorted(missing)}")


def diagram_from_json(doc: dict) -> CausalDiagram:
    if not isinstance(doc, dict) or set(doc) - {"variables", "cpts"} or "variables" not in doc:
        raise InvalidModel("model JSON must have 'variables' and optionally 'cpts' only")
    entries = doc["variables"]
    for e in entries:
        _check_keys(e, _VAR_KEYS, "variable")
    index = {e["name"]: i for i, e in enumerate(entries)}
    variables, parents = [], []
    for i, e in enumerate(entries):
        try:
            kind = Kind(e["kind"])
        except ValueError:
            raise InvalidModel(f"bad kind {e['kind']!r}") from None
        card = e["cardinality"]
        if not isinstance(card, int) or isinstance(card, bool):
            raise InvalidModel("cardinality must be an integer")
        variables.append(Variable(i, str(e["name"]), card, kind))
        try:
            parents.append([index[p] for p in e["parents"]])
        except KeyError as exc:
            raise UnknownVariable(f"unknown parent {exc.args[0]!r}") from None
    return CausalDiagram(variables, parents)


def cbn_from_json(doc: dict) -> Cbn:
    diagram = diagram_from_json(doc)
    if "cpts" not in doc:
        raise InvalidModel("model JSON has no 'cpts'")
    by_child = {}
    for c in doc["cpts"]:
        _check_keys(c, _CPT_KEYS, "cpt")
        by_child[diagram.id_of(c["child"])] = c["rows"]
    if len(by_child) != len(diagram) or len(doc["cpts"]) != len(diagram):
        raise InvalidModel("need exactly one CPT per variable")
    cpts = [Cpt.from_rows(diagram, i, by_child[i]) for i in range(len(diagram))]
    return Cbn(diagram, cpts)


def save_model(obj: Cbn | CausalDiagram, path: str | Path) -> None:
    doc = cbn_to_json(obj) if isinstance(obj, Cbn) else diagram_to_json(obj)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path: str | Path) -> Cbn:
    return cbn_from_json(json.loads(Path(path).read_text()))


def load_diagram(path: str | Path) -> CausalDiagram:
    return diagram_from_json(json.loads(Path(path).read_text()))
