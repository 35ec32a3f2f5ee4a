"""Experiment harness: config parsing, scheme registry, cell execution, CSV output.

A config is a single JSON document with four sections:

    {
      "problems": [{"name": ..., "generator": ..., "params": {...},
                    "x0": {"kind": "zeros" | "gauss" | "explicit", ...}}],
      "schemes":  [{"name": ..., "method": "tr" | "arc",
                    "batching": "fixed" | "growing" | "full",
                    "batch_size": ..., "growth_factor": ..., "growth_period": ...,
                    "overrides": {...solver fields...}}],
      "solver":   {...shared StrConfig / SarcConfig fields...},
      "seeds":    [ints]
    }

``run`` executes every (problem x scheme x seed) cell, writing one trace CSV
per cell plus a summary CSV; cells own independent RNG streams so results are
deterministic and independent of worker count.  Batching follows the scheme
comparison convention: "fixed" estimates gradient and Hessian on a constant
batch, "growing" multiplies the batch by growth_factor every growth_period
iterations (one iteration standing in for one epoch), "full" uses the exact
gradient while subsampling the Hessian.  Cost is measured in component-oracle
calls, not wall time: call counts are reproducible and derive bit-exactly from
the trace sample sizes.
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import json
import time
from dataclasses import dataclass, field, fields

import numpy as np

from ._common import resolve_constants, summarize_checks
from .cubic_reg import SarcConfig, sarc_certify_iteration, sarc_solve
from .problems import (
    FiniteSumProblem,
    make_convex_quadratic,
    make_indefinite_quadratic,
    make_nonconvex_regression,
)
from .trace import CSV_COLUMNS, oracle_calls, read_trace_csv, write_trace_csv
from .trust_region import StrConfig, str_certify_iteration, str_solve

__all__ = [
    "SchemeSpec",
    "RunSummary",
    "ConfigError",
    "PROBLEM_GENERATORS",
    "load_config",
    "dump_config",
    "run_experiment",
    "emit_plot_data",
    "certify_run",
    "cumulative_calls",
    "calls_to_reach",
    "calls_through_best",
]

PROBLEM_GENERATORS = {
    "indefinite_quadratic": make_indefinite_quadratic,
    "convex_quadratic": make_convex_quadratic,
    "nonconvex_regression": make_nonconvex_regression,
}

SUMMARY_COLUMNS = (
    "problem", "scheme", "seed", "method", "status", "iterations",
    "successful_iterations", "calls_f", "calls_grad", "calls_hess",
    "calls_total", "final_exact_f", "final_exact_grad_norm",
    "final_exact_lambda_min", "wall_time_s",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SchemeSpec:
    """One experiment variant: solver family plus batching policy."""

    name: str
    method: str  # "tr" | "arc"
    batching: str  # "fixed" | "growing" | "full"
    batch_size: int = 256
    growth_factor: float = 2.0
    growth_period: int = 10
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in ("tr", "arc"):
            raise ConfigError(f"scheme {self.name!r}: method must be 'tr' or 'arc'")
        if self.batching not in ("fixed", "growing", "full"):
            raise ConfigError(f"scheme {self.name!r}: unknown batching {self.batching!r}")
        if self.batch_size < 1:
            raise ConfigError(f"scheme {self.name!r}: batch_size must be >= 1")
        if self.growth_factor < 1 or self.growth_period < 1:
            raise ConfigError(f"scheme {self.name!r}: growth parameters must be >= 1")

    def schedule(self, n: int):
        b = min(self.batch_size, n)
        if self.batching == "fixed":
            return lambda k: (b, b, None)
        if self.batching == "growing":
            def growing(k):
                size = min(n, int(b * self.growth_factor ** (k // self.growth_period)))
                return (size, size, None)
            return growing
        # "full": exact gradient, subsampled Hessian
        return lambda k: (n, b, None)


@dataclass
class RunSummary:
    """Aggregates of one cell; oracle call counts derive bit-exactly from the trace.

    calls_f counts component function values (each drawn set is evaluated at
    the current and the trial point), calls_grad / calls_hess the component
    gradient and Hessian evaluations.
    """

    problem: str
    scheme: str
    seed: int
    method: str
    status: str
    iterations: int
    successful_iterations: int
    calls_f: int
    calls_grad: int
    calls_hess: int
    final_exact_f: float
    final_exact_grad_norm: float
    final_exact_lambda_min: float
    wall_time_s: float

    @property
    def calls_total(self) -> int:
        return self.calls_f + self.calls_grad + self.calls_hess

    def csv_row(self) -> list[str]:
        vals = []
        for col in SUMMARY_COLUMNS:
            v = getattr(self, col)
            vals.append(repr(v) if isinstance(v, float) else str(v))
        return vals


# ----------------------------------------------------------------------
# config handling
# ----------------------------------------------------------------------


def load_config(path) -> dict:
    """Parse and validate an experiment config; parse errors carry line numbers."""
    with open(path) as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}:{err.colno}: {err.msg}") from None
    return validate_config(raw)


def validate_config(raw: dict) -> dict:
    for section in ("problems", "schemes", "solver", "seeds"):
        if section not in raw:
            raise ConfigError(f"config is missing the [{section}] section")
    if not isinstance(raw["problems"], list) or not raw["problems"]:
        raise ConfigError("[problems] must be a nonempty list")
    if not isinstance(raw["schemes"], list) or not raw["schemes"]:
        raise ConfigError("[schemes] must be a nonempty list")
    if not isinstance(raw["seeds"], list) or not all(isinstance(s, int) for s in raw["seeds"]):
        raise ConfigError("[seeds] must be a list of integers")

    seen = set()
    for spec in raw["problems"]:
        name = spec.get("name")
        if not name or "__" in name or "/" in name:
            raise ConfigError(f"problem name {name!r} missing or not filesystem-safe")
        if name in seen:
            raise ConfigError(f"duplicate problem name {name!r}")
        seen.add(name)
        gen = spec.get("generator")
        if gen not in PROBLEM_GENERATORS:
            raise ConfigError(f"problem {name!r}: unknown generator {gen!r} "
                              f"(have {sorted(PROBLEM_GENERATORS)})")
        if not isinstance(spec.get("params", {}), dict):
            raise ConfigError(f"problem {name!r}: params must be an object")
        x0 = spec.get("x0", {"kind": "zeros"})
        if x0.get("kind") not in ("zeros", "gauss", "explicit"):
            raise ConfigError(f"problem {name!r}: x0 kind must be zeros|gauss|explicit")

    seen = set()
    scheme_fields = {f.name for f in fields(SchemeSpec)}
    for spec in raw["schemes"]:
        name = spec.get("name")
        if not name or "__" in name or "/" in name:
            raise ConfigError(f"scheme name {name!r} missing or not filesystem-safe")
        if name in seen:
            raise ConfigError(f"duplicate scheme name {name!r}")
        seen.add(name)
        unknown = set(spec) - scheme_fields
        if unknown:
            raise ConfigError(f"scheme {name!r}: unknown keys {sorted(unknown)}")
        SchemeSpec(**spec)  # field validation

    solver_fields = ({f.name for f in fields(StrConfig)}
                     | {f.name for f in fields(SarcConfig)})
    unknown = set(raw["solver"]) - solver_fields
    if unknown:
        raise ConfigError(f"[solver]: unknown keys {sorted(unknown)}")
    return raw


def dump_config(config: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_problem(spec: dict) -> FiniteSumProblem:
    return PROBLEM_GENERATORS[spec["generator"]](**spec.get("params", {}))


def build_x0(spec: dict, d: int) -> np.ndarray:
    x0 = spec.get("x0", {"kind": "zeros"})
    kind = x0.get("kind", "zeros")
    if kind == "zeros":
        return np.zeros(d)
    if kind == "gauss":
        rng = np.random.default_rng(int(x0.get("seed", 0)))
        return float(x0.get("scale", 1.0)) * rng.standard_normal(d)
    vals = np.asarray(x0["values"], dtype=float)
    if vals.shape != (d,):
        raise ConfigError(f"explicit x0 has shape {vals.shape}, problem dimension is {d}")
    return vals


def build_solver_config(method: str, solver_section: dict, overrides: dict):
    cls = StrConfig if method == "tr" else SarcConfig
    names = {f.name for f in fields(cls)}
    kwargs = {k: v for k, v in solver_section.items() if k in names}
    for k, v in overrides.items():
        if k not in names:
            raise ConfigError(f"override {k!r} is not a {cls.__name__} field")
        kwargs[k] = v
    return cls(**kwargs)


# ----------------------------------------------------------------------
# execution
# ----------------------------------------------------------------------


def run_cell(problem_spec: dict, scheme: SchemeSpec, solver_section: dict, seed: int):
    """Execute one (problem, scheme, seed) cell; returns (trace, summary)."""
    problem = build_problem(problem_spec)
    x0 = build_x0(problem_spec, problem.d)
    config = build_solver_config(scheme.method, solver_section, scheme.overrides)
    solve = str_solve if scheme.method == "tr" else sarc_solve
    start = time.perf_counter()
    result = solve(problem, config, (seed,), x0=x0, schedule=scheme.schedule(problem.n))
    elapsed = time.perf_counter() - start
    trace = result.trace
    calls_f, calls_g, calls_h = oracle_calls(trace)
    last = trace[-1] if trace else None
    summary = RunSummary(
        problem=problem_spec["name"], scheme=scheme.name, seed=seed,
        method=scheme.method, status=result.status,
        iterations=len(trace),
        successful_iterations=sum(r.success for r in trace),
        calls_f=calls_f, calls_grad=calls_g, calls_hess=calls_h,
        final_exact_f=last.exact_f if last and last.exact_f is not None else 0.0,
        final_exact_grad_norm=last.exact_grad_norm if last and last.exact_grad_norm is not None else 0.0,
        final_exact_lambda_min=last.exact_lambda_min if last and last.exact_lambda_min is not None else 0.0,
        wall_time_s=elapsed,
    )
    return trace, summary


def _cell_task(args):
    config, p_name, s_name, seed, out_dir = args
    problem_spec = next(p for p in config["problems"] if p["name"] == p_name)
    scheme = SchemeSpec(**next(s for s in config["schemes"] if s["name"] == s_name))
    try:
        trace, summary = run_cell(problem_spec, scheme, config["solver"], seed)
    except Exception as err:  # cell failure must not sink the experiment
        summary = RunSummary(
            problem=p_name, scheme=s_name, seed=seed,
            method=scheme.method, status=f"failed: {type(err).__name__}",
            iterations=0, successful_iterations=0,
            calls_f=0, calls_grad=0, calls_hess=0,
            final_exact_f=0.0, final_exact_grad_norm=0.0,
            final_exact_lambda_min=0.0, wall_time_s=0.0,
        )
        return summary
    write_trace_csv(trace_path(out_dir, p_name, s_name, seed), trace)
    return summary


def trace_path(out_dir, problem: str, scheme: str, seed: int):
    from pathlib import Path

    return Path(out_dir) / "traces" / f"{problem}__{scheme}__seed{seed}.csv"


def run_experiment(config_file, output_dir, jobs: int = 1, seed_override: int | None = None) -> int:
    """Run every cell of the config; returns a process exit status."""
    from pathlib import Path

    try:
        config = load_config(config_file)
    except ConfigError as err:
        print(f"config error: {err}")
        return 2
    if seed_override is not None:
        config["seeds"] = [int(seed_override)]
    out = Path(output_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)

    cells = [
        (config, p["name"], s["name"], seed, str(out))
        for p in config["problems"]
        for s in config["schemes"]
        for seed in config["seeds"]
    ]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_cell_task, cells))
    else:
        summaries = [_cell_task(c) for c in cells]

    summaries.sort(key=lambda s: (s.problem, s.scheme, s.seed))
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            writer.writerow(s.csv_row())

    failed = [s for s in summaries if s.status.startswith("failed")]
    for s in failed:
        print(f"cell failed: {s.problem} / {s.scheme} / seed {s.seed}: {s.status}")
    return 1 if failed else 0


# ----------------------------------------------------------------------
# derived outputs
# ----------------------------------------------------------------------


def cumulative_calls(rows) -> np.ndarray:
    """Running total of component-oracle calls after each trace row."""
    per_row = [2 * r["size_h"] + r["size_g"] + r["size_B"] for r in rows]
    return np.cumsum(per_row)


def calls_to_reach(rows, target_f: float) -> int | None:
    """Oracle calls spent up to the first row with exact_f <= target_f."""
    cum = cumulative_calls(rows)
    for i, row in enumerate(rows):
        if row["exact_f"] <= target_f:
            return int(cum[i])
    return None


def calls_through_best(rows) -> tuple[float, int]:
    """(best exact_f, oracle calls through the row achieving it)."""
    cum = cumulative_calls(rows)
    best_i = int(np.argmin([row["exact_f"] for row in rows]))
    return float(rows[best_i]["exact_f"]), int(cum[best_i])


def emit_plot_data(run_dir, out_path) -> int:
    """Tidy long-format CSV: objective value against cumulative oracle calls.

    One row per trace row: (problem, scheme, seed, k, cum_oracle_calls,
    exact_f).  Intended for external plotting; nothing is plotted here.
    """
    from pathlib import Path

    run = Path(run_dir)
    files = sorted((run / "traces").glob("*.csv"))
    if not files:
        print(f"no trace files under {run / 'traces'}")
        return 1
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("problem", "scheme", "seed", "k", "cum_oracle_calls", "exact_f"))
        for path in files:
            problem, scheme, seed_part = path.stem.split("__")
            seed = int(seed_part.removeprefix("seed"))
            rows = read_trace_csv(path)
            cum = cumulative_calls(rows)
            for row, calls in zip(rows, cum):
                writer.writerow((problem, scheme, seed, row["k"], int(calls), repr(row["exact_f"])))
    return 0


# ----------------------------------------------------------------------
# certification
# ----------------------------------------------------------------------


def certify_run(config_file, run_dir) -> int:
    """Re-run every cell deterministically, compare traces, and re-check lemmas.

    Writes certify_report.csv with per-cell check counts.  Exit status is
    nonzero when a stored trace does not match its deterministic re-run or a
    construction-guaranteed decrease bound fails.
    """
    from pathlib import Path

    try:
        config = load_config(config_file)
    except ConfigError as err:
        print(f"config error: {err}")
        return 2
    run = Path(run_dir)
    report_rows = []
    bad = 0
    for p_spec in config["problems"]:
        problem = build_problem(p_spec)
        for s_spec in config["schemes"]:
            scheme = SchemeSpec(**s_spec)
            solver_cfg = build_solver_config(scheme.method, config["solver"], scheme.overrides)
            consts = resolve_constants(problem, solver_cfg)
            for seed in config["seeds"]:
                trace, _ = run_cell(p_spec, scheme, config["solver"], seed)
                path = trace_path(run, p_spec["name"], scheme.name, seed)
                stored = path.read_bytes() if path.exists() else None
                buf = io.StringIO(newline="")
                writer = csv.writer(buf)
                writer.writerow(CSV_COLUMNS)
                for rec in trace:
                    writer.writerow(rec.csv_row())
                match = stored is not None and stored.decode() == buf.getvalue()
                if not match:
                    bad += 1

                if scheme.method == "tr":
                    rows = [str_certify_iteration(r, solver_cfg, consts, n=problem.n) for r in trace]
                else:
                    rows = [
                        sarc_certify_iteration(
                            r, solver_cfg, consts, n=problem.n,
                            next_record=trace[i + 1] if i + 1 < len(trace) else None)
                        for i, r in enumerate(trace)
                    ]
                summary = summarize_checks(rows)
                for check, agg in sorted(summary.items()):
                    report_rows.append((
                        p_spec["name"], scheme.name, seed, check,
                        agg["pass"], agg["fail"], agg["skipped"],
                        "" if agg["worst_margin"] is None else repr(agg["worst_margin"]),
                        int(match),
                    ))
                    if check.startswith(("lemma5_", "lemma8_", "lemma9_decrease")) and agg["fail"]:
                        bad += 1

    with open(run / "certify_report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("problem", "scheme", "seed", "check", "pass", "fail",
                         "skipped", "worst_margin", "trace_match"))
        writer.writerows(report_rows)
    print(f"certify: {len(report_rows)} check rows, {bad} blocking issues")
    return 1 if bad else 0
