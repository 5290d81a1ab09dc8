"""Command-line entry point: ``cbnlearn <command> ...``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import ExperimentSpec, emit_report, parse_query, run_experiment, slice_table
from .causal import (
    broadcast_to,
    eval_estimand_plugin,
    identify,
    interventional_table,
    parse,
    renormalize_over,
    to_text,
)
from .errors import CbnError
from .learning import EmConfig, em4ci_learn, k_schedule
from .model import Cbn, latentify_sources, load_diagram, load_model, project_to_admg, save_model
from .sampling import Dataset, forward_sample, random_cpts, structure_spec


def _int_list(text: str) -> tuple[int, ...]:
    """``1000,10000`` or a range ``0-9``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out += range(int(lo), int(hi) + 1)
        elif part:
            out.append(int(part))
    return tuple(out)


def _em_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k-step", type=int, default=2, help="latent cardinality increment (default 2)")
    p.add_argument("--k-max", type=int, default=None, help="largest latent cardinality tried "
                   "(default 2 * largest observed cardinality squared)")
    p.add_argument("--restarts", type=int, default=10, help="EM restarts per cardinality (default 10)")
    p.add_argument("--tol", type=float, default=1e-6, help="relative log-likelihood tolerance (default 1e-6)")
    p.add_argument("--max-iter", type=int, default=500, help="EM iteration cap per restart (default 500)")


def _em_config(args) -> EmConfig:
    return EmConfig(args.max_iter, args.tol, args.restarts, args.seed)


def _load_model_or_diagram(path: str):
    try:
        return load_model(path)
    except CbnError:
        return load_diagram(path)


def _diagram_of(obj):
    return obj.diagram if isinstance(obj, Cbn) else obj


def _print_table(table, diagram, out) -> None:
    out.write(table.to_tsv(dict(enumerate(diagram.names))))


def cmd_generate(args) -> None:
    if args.model:
        source = _load_model_or_diagram(args.model)
        diagram = _diagram_of(source)
        if args.latentify:
            diagram = latentify_sources(diagram)
        cbn = source.with_diagram(diagram) if isinstance(source, Cbn) and not args.latentify else None
        if cbn is None:
            cbn = random_cpts(diagram, args.d, args.k, args.seed)
    else:
        if not args.family:
            raise ValueError("give --family or --model")
        diagram = structure_spec(args.family, args.n).diagram(args.d, args.k)
        cbn = random_cpts(diagram, args.d, args.k, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(cbn, out / "model.json")
    written = [str(out / "model.json")]
    if args.samples:
        data = forward_sample(cbn, args.samples, args.seed)
        data.to_csv(out / "data.csv")
        written.append(str(out / "data.csv"))
    print("\n".join(written))


def cmd_learn(args) -> None:
    diagram = _diagram_of(_load_model_or_diagram(args.diagram))
    data = Dataset.from_csv(args.data, diagram)
    schedule = k_schedule(data.cards, args.k_step, args.k_max)
    result = em4ci_learn(diagram, data, schedule, _em_config(args))
    save_model(result.cbn, args.out)
    if args.log:
        Path(args.log).write_text(result.log_csv(), newline="\n")
    for c in result.candidates:
        print(f"k={c.k}\tLL={c.log_likelihood:.6f}\tBIC={c.bic:.6f}")
    print(f"selected k={result.k_lrn}\tlearn_time={result.seconds:.3f}s")


def cmd_query(args) -> None:
    cbn = load_model(args.model)
    q = parse_query(args.query)
    targets, do_vars, fixed = q.ids(cbn.diagram)
    table = slice_table(interventional_table(cbn, targets, do_vars), fixed)
    _print_table(table, cbn.diagram, sys.stdout)


def _identify(diagram, q):
    return identify(project_to_admg(diagram), list(q.targets), [n for n, _ in q.interventions])


def cmd_identify(args) -> None:
    diagram = _diagram_of(_load_model_or_diagram(args.model))
    expr = _identify(diagram, parse_query(args.query))
    if not expr:
        raise ValueError(
            f"not identifiable (hedge {sorted(expr.forest)} over {sorted(expr.subforest)})"
        )
    print(to_text(expr))


def cmd_plugin(args) -> None:
    diagram = _diagram_of(_load_model_or_diagram(args.model))
    data = Dataset.from_csv(args.data, diagram)
    q = parse_query(args.query)
    targets, do_vars, fixed = q.ids(diagram)
    expr = parse(args.estimand) if args.estimand else _identify(diagram, q)
    if not expr:
        raise ValueError("not identifiable")
    result = eval_estimand_plugin(expr, data)
    scope = sorted(targets + do_vars)
    table = broadcast_to(result.factor, scope, [diagram.cards[v] for v in scope])
    if args.renormalize:
        table = renormalize_over(table, targets)
    if result.zero_mass:
        print("warning: no observed configuration supports the estimand", file=sys.stderr)
    _print_table(slice_table(table, fixed), diagram, sys.stdout)


def cmd_bench(args) -> None:
    spec = ExperimentSpec(
        model=args.model,
        samples=_int_list(args.samples),
        queries=tuple(args.query or ()),
        methods=tuple(m.strip() for m in args.methods.split(",")),
        seeds=_int_list(args.seeds),
        em=_em_config(args),
        d=args.d,
        k=args.k,
        k_step=args.k_step,
        k_max=args.k_max,
        renormalize=args.renormalize,
        out=args.out,
    )
    rows = run_experiment(spec)
    print(emit_report(rows, args.out), end="")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbnlearn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build a ground-truth model and sample data from it")
    p.add_argument("--family", help="structure such as 9-ch, 17-dm, 15-cc, model1 ... model8, model3prime")
    p.add_argument("--n", type=int, help="size for chain, diamond or cone_cloud families")
    p.add_argument("--model", help="start from a model JSON instead of a family")
    p.add_argument("--latentify", action="store_true",
                   help="mark parentless variables with two or more children as latent")
    p.add_argument("--d", type=int, default=2, help="observed cardinality (default 2)")
    p.add_argument("--k", type=int, default=2, help="latent cardinality (default 2)")
    p.add_argument("--samples", type=int, default=0, help="rows to sample into data.csv (default none)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("learn", help="fit a full CBN with EM and the BIC cardinality search")
    p.add_argument("--diagram", required=True, help="model or diagram JSON giving the structure")
    p.add_argument("--data", required=True, help="data CSV")
    _em_flags(p)
    p.add_argument("--seed", type=int, default=0, help="seed for EM initializations (default 0)")
    p.add_argument("--log", help="write the per-iteration log-likelihood CSV here")
    p.add_argument("--out", required=True, help="learned model JSON")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("query", help="answer P(Y | do(X)) on a model by truncation")
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("query", help="e.g. 'P(V6 | do(V0=0))'; omit the state to sweep all values")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("identify", help="print the estimand for a query")
    p.add_argument("--model", required=True, help="model or diagram JSON")
    p.add_argument("query")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("plugin", help="evaluate an estimand on data with empirical frequencies")
    p.add_argument("--model", required=True, help="model or diagram JSON")
    p.add_argument("--data", required=True, help="data CSV")
    p.add_argument("--estimand", help="estimand text; derived from the diagram when omitted")
    p.add_argument("--renormalize", action="store_true", help="rescale each x slice to sum to one")
    p.add_argument("query")
    p.set_defaults(func=cmd_plugin)

    p = sub.add_parser("bench", help="run an experiment and write results.csv, timings.csv, summary.txt")
    p.add_argument("--model", required=True, help="family name or model JSON path")
    p.add_argument("--samples", default="1000", help="comma-separated sample sizes (default 1000)")
    p.add_argument("--seeds", default="0", help="seeds, e.g. 0-9 or 1,2,3 (default 0)")
    p.add_argument("--seed", type=int, default=0, help=argparse.SUPPRESS)
    p.add_argument("--methods", default="em4ci,plugin", help="subset of em4ci,plugin,exact")
    p.add_argument("--query", action="append", help="query; repeat for several (default: the family's)")
    p.add_argument("--d", type=int, default=2, help="observed cardinality (default 2)")
    p.add_argument("--k", type=int, default=2, help="ground-truth latent cardinality (default 2)")
    _em_flags(p)
    p.add_argument("--renormalize", action="store_true", help="renormalize plug-in estimates")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (CbnError, ValueError, KeyError, OSError) as exc:
        message = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        print(f"cbnlearn {args.command}: error: {message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
