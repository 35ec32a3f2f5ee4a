"""Shared plumbing for the two stochastic solvers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .problems import FiniteSumProblem, eval_full

# (size_g, size_B, size_h_override or None) for iteration k
BatchSchedule = Callable[[int], tuple[int, int, int | None]]


class CheckResult(NamedTuple):
    """One certification check: name, "pass"/"fail"/"skipped", margin (bound minus value)."""

    name: str
    status: str
    margin: float | None


@dataclass(frozen=True)
class ResolvedConstants:
    """Problem bound constants after config overrides; None when unavailable."""

    kappa_f: float | None
    kappa_grad: float | None
    kappa_hess: float | None
    H1: float | None
    H2: float | None
    L_grad: float | None
    L_hess: float | None


def resolve_constants(problem: FiniteSumProblem, config) -> ResolvedConstants:
    pc = problem.constants

    def pick(name):
        override = getattr(config, name, None)
        return override if override is not None else getattr(pc, name, None)

    return ResolvedConstants(*(pick(n) for n in
                               ("kappa_f", "kappa_grad", "kappa_hess", "H1", "H2", "L_grad", "L_hess")))


def require(value, name: str, context: str) -> float:
    if value is None:
        raise ValueError(f"{context} needs the constant {name}; supply it via the problem or config")
    return float(value)


def exact_diagnostics(problem: FiniteSumProblem, x: np.ndarray) -> tuple[float, float, float]:
    """(f(x), ||grad f(x)||, lambda_min(hess f(x))) from the full sum."""
    fx = eval_full(problem, x, "value")
    gx = eval_full(problem, x, "gradient")
    hx = eval_full(problem, x, "hessian")
    return fx, float(np.linalg.norm(gx)), float(np.linalg.eigvalsh(hx)[0])


def summarize_checks(rows: list[list[CheckResult]]) -> dict[str, dict]:
    """Aggregate per-iteration check lists into pass/fail/skip counts and worst margins."""
    out: dict[str, dict] = {}
    for checks in rows:
        for name, status, margin in checks:
            agg = out.setdefault(name, {"pass": 0, "fail": 0, "skipped": 0, "worst_margin": None})
            agg[status] += 1
            if margin is not None:
                worst = agg["worst_margin"]
                agg["worst_margin"] = margin if worst is None else min(worst, margin)
    return out
