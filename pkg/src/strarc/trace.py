"""Per-iteration trace records and their CSV serialization.

The CSV schema (exact column order) is:

    k, delta_or_sigma, rho_tilde, rho, success, size_g, size_B, size_h,
    step_norm, sampled_grad_norm, sampled_lambda_min, exact_f,
    exact_grad_norm, exact_lambda_min, method

Floats are written with shortest round-trip repr so reruns of a deterministic
solve produce byte-identical files.  Records additionally carry diagnostic
scalars (model decrease, sampled spectral norm, function estimates, exact
values at the trial point, step conditions) that certification consumes but
the CSV omits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

CSV_COLUMNS = (
    "k",
    "delta_or_sigma",
    "rho_tilde",
    "rho",
    "success",
    "size_g",
    "size_B",
    "size_h",
    "step_norm",
    "sampled_grad_norm",
    "sampled_lambda_min",
    "exact_f",
    "exact_grad_norm",
    "exact_lambda_min",
    "method",
)

CONVERGED = "converged"
BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass
class IterationRecord:
    """One solver iteration: the CSV schema fields plus certification extras."""

    k: int
    delta_or_sigma: float
    rho_tilde: float
    rho: float
    success: bool
    size_g: int
    size_B: int
    size_h: int
    step_norm: float
    sampled_grad_norm: float
    sampled_lambda_min: float
    exact_f: float | None
    exact_grad_norm: float | None
    exact_lambda_min: float | None
    method: str

    # diagnostics beyond the CSV schema
    model_decrease: float = 0.0
    sampled_B_norm: float = 0.0
    h_x: float = 0.0
    h_xs: float = 0.0
    sh_equals_sg: bool = False
    exact_f_trial: float | None = None
    exact_rho: float | None = None
    theta: float | None = None
    conditions_ok: tuple[bool, bool, bool] | None = None
    lemma_decrease_value: float | None = None
    lemma5_ok: bool | None = None
    forced_unsuccessful: bool = False

    def csv_row(self) -> list[str]:
        vals = []
        for col in CSV_COLUMNS:
            v = getattr(self, col)
            if col == "success":
                vals.append("1" if v else "0")
            elif isinstance(v, float):
                vals.append(repr(v))
            else:
                vals.append(str(v))
        return vals


class SolveResult(NamedTuple):
    x: "np.ndarray"
    trace: list[IterationRecord]
    status: str


def write_trace_csv(path, trace: list[IterationRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in trace:
            writer.writerow(rec.csv_row())


def read_trace_csv(path) -> list[dict]:
    """Parse a trace CSV back into dicts with numeric fields restored."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, val in row.items():
                if key in ("k", "size_g", "size_B", "size_h"):
                    parsed[key] = int(val)
                elif key == "success":
                    parsed[key] = val == "1"
                elif key == "method":
                    parsed[key] = val
                else:
                    parsed[key] = float(val)
            rows.append(parsed)
    return rows


def oracle_calls(trace) -> tuple[int, int, int]:
    """(f_i, grad f_i, hess f_i) call counts implied by a trace.

    Each drawn function subset is evaluated at both the current point and the
    trial point, so f_i calls are twice the summed size_h; gradient and
    Hessian subsets are evaluated once per iteration.  Works on records and on
    parsed CSV rows alike.
    """

    def get(row, key):
        return getattr(row, key) if isinstance(row, IterationRecord) else row[key]

    calls_f = 2 * sum(get(r, "size_h") for r in trace)
    calls_g = sum(get(r, "size_g") for r in trace)
    calls_h = sum(get(r, "size_B") for r in trace)
    return calls_f, calls_g, calls_h
