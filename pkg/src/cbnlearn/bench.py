"""Experiment orchestration: generate, sample, learn, query and score.

Results go to ``results.csv`` (deterministic columns only, so identical
specs give byte-identical files) and ``timings.csv`` (wall-clock seconds,
joined back on the row index when read).
"""
from __future__ import annotations

import csv
import io
import math
import re
import statistics
import time
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .causal import broadcast_to, eval_estimand_plugin, identify, interventional_table, mad, renormalize_over
from .errors import CbnError, ParseError
from .factor import Factor
from .learning import EmConfig, em4ci_learn, k_schedule
from .model import Cbn, CausalDiagram, load_diagram, load_model, project_to_admg
from .sampling import forward_sample, random_cpts, structure_spec

__all__ = [
    "QuerySpec",
    "parse_query",
    "ExperimentSpec",
    "ResultRow",
    "run_experiment",
    "emit_report",
    "read_report",
    "format_rows",
    "parse_rows",
    "summarize",
]

METHODS = ("em4ci", "plugin", "exact")


@dataclass(frozen=True)
class QuerySpec:
    """Targets and interventions by name; a state of None sweeps every value."""

    targets: tuple[str, ...]
    interventions: tuple[tuple[str, int | None], ...]

    def __str__(self):
        do = ",".join(n if s is None else f"{n}={s}" for n, s in self.interventions)
        head = ",".join(self.targets)
        return f"P({head} | do({do}))" if do else f"P({head})"

    def ids(self, diagram: CausalDiagram) -> tuple[list[int], list[int], dict[int, int]]:
        targets = sorted(diagram.id_of(t) for t in self.targets)
        do_vars = sorted(diagram.id_of(n) for n, _ in self.interventions)
        fixed = {diagram.id_of(n): s for n, s in self.interventions if s is not None}
        return targets, do_vars, fixed


_QUERY = re.compile(r"^\s*P\s*\(\s*([^|()]+?)\s*(?:\|\s*do\s*\(\s*([^()]*?)\s*\)\s*)?\)\s*$")


def parse_query(text: str) -> QuerySpec:
    """Parse ``P(Y | do(X=1))``, ``P(Y | do(X))`` or ``P(Y1,Y2 | do(X1,X2=0))``."""
    m = _QUERY.match(text)
    if not m:
        raise ParseError(f"cannot parse query {text!r}")
    targets = tuple(t.strip() for t in m.group(1).split(",") if t.strip())
    interventions = []
    for item in (m.group(2) or "").split(","):
        item = item.strip()
        if not item:
            continue
        if "=" in item:
            name, state = item.split("=", 1)
            interventions.append((name.strip(), int(state)))
        else:
            interventions.append((item, None))
    if not targets:
        raise ParseError(f"query {text!r} has no targets")
    return QuerySpec(targets, tuple(interventions))


def slice_table(table: Factor, fixed: dict[int, int]) -> Factor:
    """Restrict a swept table to the given intervention states."""
    if not fixed:
        return table
    index = tuple(fixed.get(v, slice(None)) for v in table.scope)
    return Factor([v for v in table.scope if v not in fixed], table.values[index])


@dataclass(frozen=True)
class ExperimentSpec:
    model: str  # family name such as "9-ch", "model3", or a model JSON path
    samples: tuple[int, ...] = (1000,)
    queries: tuple[str, ...] = ()  # empty: the structure's default query
    methods: tuple[str, ...] = ("em4ci", "plugin")
    seeds: tuple[int, ...] = (0,)
    em: EmConfig = field(default_factory=EmConfig)
    d: int = 2
    k: int = 2
    k_step: int = 2
    k_max: int | None = None
    renormalize: bool = False
    out: str | None = None

    def __post_init__(self):
        if not self.methods or not self.seeds or not self.samples:
            raise ValueError("need at least one method, seed and sample size")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")


@dataclass(frozen=True)
class ResultRow:
    model: str
    query: str
    method: str
    m: int
    seed: int
    mad: float
    k_lrn: int | None
    status: str = "ok"
    learn_time_s: float = 0.0
    inference_time_s: float = 0.0


_DETERMINISTIC = ("model", "query", "method", "m", "seed", "mad", "k_lrn", "status")
_TIMES = ("learn_time_s", "inference_time_s")


def _ground_truth(spec: ExperimentSpec, seed: int) -> tuple[Cbn, list[QuerySpec]]:
    path = Path(spec.model)
    if path.suffix == ".json" and path.exists():
        try:
            cbn = load_model(path)
        except CbnError:
            cbn = random_cpts(load_diagram(path), spec.d, spec.k, seed)
        queries = [parse_query(q) for q in spec.queries]
        if not queries:
            raise ValueError("a model file needs explicit queries")
        return cbn, queries
    structure = structure_spec(spec.model)
    cbn = random_cpts(structure.diagram(spec.d, spec.k), spec.d, spec.k, seed)
    queries = [parse_query(q) for q in spec.queries] or [
        QuerySpec(structure.targets, tuple((x, None) for x in structure.interventions))
    ]
    return cbn, queries


def _timed(fn, *args):
    start = time.perf_counter()
    out = fn(*args)
    return out, round(time.perf_counter() - start, 3)


def run_experiment(spec: ExperimentSpec) -> list[ResultRow]:
    """Every (seed, m, method, query) combination, in that nesting order.

    em4ci learns once per (seed, m) and reports that learning time on every
    query row; plug-in work is charged to the query as inference time. A
    method that raises yields a ``failed`` row instead of aborting the run.
    """
    rows: list[ResultRow] = []
    for seed in spec.seeds:
        truth_cbn, queries = _ground_truth(spec, seed)
        diagram = truth_cbn.diagram
        for m in spec.samples:
            data = forward_sample(truth_cbn, m, (seed, m))
            truths = []
            for q in queries:
                targets, do_vars, fixed = q.ids(diagram)
                truths.append(slice_table(interventional_table(truth_cbn, targets, do_vars), fixed))
            for method in spec.methods:
                rows += _run_method(spec, method, seed, m, truth_cbn, data, queries, truths)
    return rows


def _run_method(spec, method, seed, m, truth_cbn, data, queries, truths) -> list[ResultRow]:
    diagram = truth_cbn.diagram
    out = []

    def row(q, **kw):
        return ResultRow(spec.model, str(q), method, m, seed, **kw)

    if method == "em4ci":
        config = replace(spec.em, seed=seed)
        schedule = k_schedule(data.cards, spec.k_step, spec.k_max)
        try:
            learned, learn_time = _timed(em4ci_learn, diagram, data, schedule, config)
        except Exception as exc:  # noqa: BLE001 - recorded as a failed row
            return [row(q, mad=math.nan, k_lrn=None, status=_failure(exc)) for q in queries]
        for q, truth in zip(queries, truths):
            targets, do_vars, fixed = q.ids(diagram)
            try:
                table, inf_time = _timed(interventional_table, learned.cbn, targets, do_vars)
                score = mad(slice_table(table, fixed), truth)
                out.append(
                    row(q, mad=score, k_lrn=learned.k_lrn, learn_time_s=learn_time, inference_time_s=inf_time)
                )
            except Exception as exc:  # noqa: BLE001
                out.append(row(q, mad=math.nan, k_lrn=learned.k_lrn, status=_failure(exc)))
        return out

    for q, truth in zip(queries, truths):
        targets, do_vars, fixed = q.ids(diagram)
        try:
            start = time.perf_counter()
            if method == "exact":
                table = slice_table(interventional_table(truth_cbn, targets, do_vars), fixed)
            else:
                table = _plugin(diagram, data, q, targets, do_vars, fixed, spec.renormalize)
            elapsed = round(time.perf_counter() - start, 3)
            out.append(row(q, mad=mad(table, truth), k_lrn=None, inference_time_s=elapsed))
        except Exception as exc:  # noqa: BLE001
            out.append(row(q, mad=math.nan, k_lrn=None, status=_failure(exc)))
    return out


def _plugin(diagram, data, q, targets, do_vars, fixed, renormalize) -> Factor:
    names = diagram.names
    expr = identify(project_to_admg(diagram), [names[t] for t in targets], [names[x] for x in do_vars])
    if not expr:
        raise ValueError(f"{q} is not identifiable")
    cards = [diagram.cards[v] for v in sorted(targets + do_vars)]
    table = broadcast_to(eval_estimand_plugin(expr, data).factor, sorted(targets + do_vars), cards)
    if renormalize:
        table = renormalize_over(table, targets)
    return slice_table(table, fixed)


def _failure(exc: Exception) -> str:
    return "failed: " + f"{type(exc).__name__}: {exc}".replace("\n", " ").replace(",", ";")


# --- report ------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_rows(rows: Sequence[ResultRow]) -> str:
    """The deterministic columns of `rows` as CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_DETERMINISTIC)
    for r in rows:
        writer.writerow([_fmt(getattr(r, c)) for c in _DETERMINISTIC])
    return buf.getvalue()


def _timings_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("row",) + _TIMES)
    for i, r in enumerate(rows):
        writer.writerow([i, f"{r.learn_time_s:.3f}", f"{r.inference_time_s:.3f}"])
    return buf.getvalue()


def parse_rows(results_csv: str, timings_csv: str | None = None) -> list[ResultRow]:
    types = {f.name: f.type for f in fields(ResultRow)}
    rows = []
    for rec in csv.DictReader(io.StringIO(results_csv)):
        kw = {}
        for name, text in rec.items():
            if name in ("m", "seed"):
                kw[name] = int(text)
            elif name == "k_lrn":
                kw[name] = int(text) if text else None
            elif name == "mad":
                kw[name] = float(text)
            elif name in types:
                kw[name] = text
        rows.append(ResultRow(**kw))
    if timings_csv:
        for rec in csv.DictReader(io.StringIO(timings_csv)):
            i = int(rec["row"])
            rows[i] = replace(
                rows[i],
                learn_time_s=float(rec["learn_time_s"]),
                inference_time_s=float(rec["inference_time_s"]),
            )
    return rows


def _stats(values: Iterable[float]) -> tuple[float, float]:
    values = [v for v in values if not math.isnan(v)]
    if not values:
        return math.nan, math.nan
    return statistics.fmean(values), statistics.pstdev(values) if len(values) > 1 else 0.0


def summarize(rows: Sequence[ResultRow]) -> str:
    """Plain-text table grouped by model, query, sample size and method."""
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.model, r.query, r.m, r.method), []).append(r)
    header = f"{'model':<12} {'query':<28} {'m':>7} {'method':<7} {'runs':>4} {'k_lrn':>6} " \
             f"{'mad':>8} {'±':>8} {'learn(s)':>9} {'inf(s)':>8}"
    lines = [header, "-" * len(header)]
    for (model, query, m, method), group in groups.items():
        ok = [r for r in group if r.status == "ok"]
        mean_mad, sd_mad = _stats(r.mad for r in ok)
        ks = [r.k_lrn for r in ok if r.k_lrn is not None]
        k_text = f"{statistics.median(ks):g}" if ks else "-"
        learn = statistics.fmean(r.learn_time_s for r in ok) if ok else math.nan
        inf = statistics.fmean(r.inference_time_s for r in ok) if ok else math.nan
        lines.append(
            f"{model:<12} {query:<28} {m:>7} {method:<7} {len(ok):>2}/{len(group):<1} {k_text:>6} "
            f"{mean_mad:>8.4f} {sd_mad:>8.4f} {learn:>9.3f} {inf:>8.3f}"
        )
    return "\n".join(lines) + "\n"


def emit_report(rows: Sequence[ResultRow], out: str | Path | None = None) -> str:
    """Write results.csv, timings.csv and summary.txt under `out`; return the summary."""
    if not rows:
        raise ValueError("no rows to report")
    summary = summarize(rows)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(format_rows(rows), newline="\n")
        (out / "timings.csv").write_text(_timings_csv(rows), newline="\n")
        (out / "summary.txt").write_text(summary, newline="\n")
    return summary


def read_report(out: str | Path) -> list[ResultRow]:
    out = Path(out)
    timings = out / "timings.csv"
    return parse_rows(
        (out / "results.csv").read_text(),
        timings.read_text() if timings.exists() else None,
    )
