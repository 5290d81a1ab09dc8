"""
Benchmark runs and reports
==========================

run_experiment sweeps seeds, sample sizes, methods and queries.
One learned model answers several queries, so its learning time is paid once.
"""

import tempfile
from pathlib import Path

from cbnlearn.bench import ExperimentSpec, emit_report, run_experiment
from cbnlearn.learning import EmConfig

spec = ExperimentSpec(
    "15-cc",
    samples=(1000,),
    seeds=(0, 1),
    queries=("P(V0 | do(V14))", "P(V0 | do(V12))", "P(V1 | do(V13))"),
    em=EmConfig(restarts=3),
)
rows = run_experiment(spec)

with tempfile.TemporaryDirectory() as out:
    print(emit_report(rows, out))
    print((Path(out) / "results.csv").read_text())
