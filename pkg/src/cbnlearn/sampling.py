"""Ground-truth generation, forward sampling and observational datasets.

All randomness comes from numpy's Philox-4x64-10 counter-based generator
seeded through ``SeedSequence``; a (seed, call) pair reproduces the same
stream on every platform.
"""
from __future__ import annotations

import io
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import InvalidModel, StateOutOfRange, UnsupportedSize
from .model import Cbn, CausalDiagram, Cpt, Kind, topological_order
from .structures import StructureSpec, chain, cone_cloud, diamond, small_model

__all__ = [
    "RNG_ALGORITHM",
    "ALPHA_FLOOR",
    "make_rng",
    "Dataset",
    "GenSpec",
    "structure_spec",
    "generate_structure",
    "random_cpts",
    "forward_sample",
]

RNG_ALGORITHM = "numpy.Philox4x64-10"
ALPHA_FLOOR = 1e-3


def make_rng(seed, *stream: int) -> np.random.Generator:
    """Philox generator for `seed`, optionally on an independent sub-stream."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(stream))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Dataset:
    """Observed rows as state indices; ``columns`` are diagram ids, ascending."""

    columns: tuple[int, ...]
    names: tuple[str, ...]
    cards: tuple[int, ...]
    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[1] != len(self.columns):
            raise InvalidModel(f"rows must have shape (m, {len(self.columns)})")
        if list(self.columns) != sorted(self.columns):
            raise InvalidModel("dataset columns must be in ascending id order")
        if rows.size:
            if rows.min() < 0 or np.any(rows.max(axis=0) >= np.asarray(self.cards)):
                raise StateOutOfRange("state index outside the variable's cardinality")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def m(self) -> int:
        return int(self.rows.shape[0])

    @classmethod
    def for_diagram(cls, diagram: CausalDiagram, rows) -> Dataset:
        obs = diagram.observed
        return cls(
            tuple(obs),
            tuple(diagram.names[i] for i in obs),
            tuple(diagram.cards[i] for i in obs),
            np.asarray(rows, dtype=np.int64).reshape(-1, len(obs)),
        )

    def unique(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct rows in lexicographic order and their multiplicities."""
        if self.m == 0:
            return self.rows, np.zeros(0, dtype=np.int64)
        rows, counts = np.unique(self.rows, axis=0, return_counts=True)
        return rows, counts

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=list(self.names))

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.names) + "\n")
        for row in self.rows:
            buf.write(",".join(map(str, row)) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source, diagram: CausalDiagram) -> Dataset:
        """Read a data CSV whose header names the diagram's observed variables."""
        frame = pd.read_csv(source, dtype=np.int64)
        obs = diagram.observed
        expected = [diagram.names[i] for i in obs]
        if list(frame.columns) != expected:
            raise InvalidModel(f"CSV header {list(frame.columns)} does not match {expected}")
        return cls.for_diagram(diagram, frame.to_numpy())


@dataclass(frozen=True)
class GenSpec:
    """Which benchmark structure to build and how to parameterize it."""

    family: str
    n: int | None = None
    d: int = 2
    k: int = 2
    seed: int = 0


_FAMILIES = {"chain": chain, "diamond": diamond, "cone_cloud": cone_cloud}
_ALIASES = {"ch": "chain", "dm": "diamond", "cc": "cone_cloud", "conecloud": "cone_cloud"}


def structure_spec(family: str, n: int | None = None) -> StructureSpec:
    """Resolve a family name such as ``chain`` with size 9, ``9-CH`` or ``model3prime``."""
    name = family.strip().lower().replace("-", "_")
    if "_" in name and name.split("_", 1)[0].isdigit():
        size, rest = name.split("_", 1)
        name, n = rest, int(size)
    name = _ALIASES.get(name, name)
    if name in _FAMILIES:
        if n is None:
            raise UnsupportedSize(f"{family} needs a size")
        return _FAMILIES[name](n)
    return small_model(name)


def generate_structure(spec: GenSpec) -> CausalDiagram:
    return structure_spec(spec.family, spec.n).diagram(spec.d, spec.k)


def random_cpts(diagram: CausalDiagram, d: int | None = None, k: int | None = None, seed=0) -> Cbn:
    """Dirichlet-random CPTs; observed variables get `d` states and latents `k`.

    Every parent configuration gets a fresh concentration vector with entries
    uniform on [ALPHA_FLOOR, 1), which pushes rows towards the simplex edges.
    Passing None for `d` or `k` keeps the diagram's own cardinalities.
    """
    if (d is not None and d < 2) or (k is not None and k < 2):
        raise InvalidModel("cardinalities must be at least 2")
    cards = {}
    for v in diagram.variables:
        want = k if v.kind is Kind.LATENT else d
        if want is not None:
            cards[v.id] = want
    diagram = diagram.with_cardinalities(cards)
    rng = make_rng(seed)
    cpts = []
    for i in range(len(diagram)):
        n_rows = int(np.prod([diagram.cards[p] for p in diagram.parents[i]], dtype=np.int64))
        card = diagram.cards[i]
        alpha = rng.uniform(ALPHA_FLOOR, 1.0, size=(n_rows, card))
        rows = np.array([rng.dirichlet(a) for a in alpha])
        rows /= rows.sum(axis=1, keepdims=True)
        cpts.append(Cpt.from_rows(diagram, i, rows))
    return Cbn(diagram, cpts)


def _parent_index(cpt: Cpt, cards: Sequence[int], states: np.ndarray) -> np.ndarray:
    idx = np.zeros(states.shape[0], dtype=np.int64)
    for p in cpt.parents:
        idx = idx * cards[p] + states[:, p]
    return idx


def forward_sample(cbn: Cbn, m: int, seed=0) -> Dataset:
    """Draw `m` ancestral samples and drop the latent columns."""
    if m < 1:
        raise InvalidModel("need at least one sample")
    diagram = cbn.diagram
    rng = make_rng(seed)
    states = np.zeros((m, len(diagram)), dtype=np.int64)
    for v in topological_order(diagram):
        cpt = cbn.cpts[v]
        cum = np.cumsum(cpt.rows(), axis=1)
        u = rng.random(m)
        rows = cum[_parent_index(cpt, diagram.cards, states)]
        drawn = (u[:, None] >= rows).sum(axis=1)
        states[:, v] = np.minimum(drawn, diagram.cards[v] - 1)
    return Dataset.for_diagram(diagram, states[:, list(diagram.observed)])
