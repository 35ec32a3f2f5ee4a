"""Stochastic trust-region and adaptive cubic regularization for finite sums.

Subsampled function values, gradients, and Hessians with Bernstein-style
sample sizing, noise-adjusted acceptance ratios, saddle-escaping subproblem
solvers, and per-iteration certification of the decrease and gap guarantees.
"""

from ._common import CheckResult, ResolvedConstants, resolve_constants, summarize_checks
from .cubic_reg import SarcConfig, sarc_certify_iteration, sarc_complexity_budget, sarc_solve
from .harness import (
    PROBLEM_GENERATORS,
    ConfigError,
    RunSummary,
    SchemeSpec,
    calls_through_best,
    calls_to_reach,
    certify_run,
    cumulative_calls,
    dump_config,
    emit_plot_data,
    load_config,
    run_experiment,
)
from .problems import (
    EvaluationError,
    FiniteSumProblem,
    ProblemConstants,
    eval_full,
    make_convex_quadratic,
    make_indefinite_quadratic,
    make_nonconvex_regression,
)
from .sampling import (
    SamplePlan,
    SampleSet,
    draw_subset,
    estimate,
    function_sample_size,
    gradient_sample_size,
    hessian_sample_size,
    stream_rng,
    subset_variance_bound,
    subset_variance_exact,
)
from .subproblem import (
    CubicModel,
    QuadraticModel,
    StepOutcome,
    cubic_cauchy_step,
    cubic_exact_step,
    model_decrease,
    smallest_eigenpair,
    tr_cauchy_step,
    tr_eigen_step,
    tr_exact_step,
)
from .trace import (
    BUDGET_EXHAUSTED,
    CONVERGED,
    CSV_COLUMNS,
    IterationRecord,
    SolveResult,
    oracle_calls,
    read_trace_csv,
    write_trace_csv,
)
from .trust_region import StrConfig, str_certify_iteration, str_complexity_budget, str_solve

__version__ = "0.1.0"

__all__ = [
    "BUDGET_EXHAUSTED",
    "CONVERGED",
    "CSV_COLUMNS",
    "CheckResult",
    "ConfigError",
    "CubicModel",
    "EvaluationError",
    "FiniteSumProblem",
    "IterationRecord",
    "PROBLEM_GENERATORS",
    "ProblemConstants",
    "QuadraticModel",
    "ResolvedConstants",
    "RunSummary",
    "SamplePlan",
    "SampleSet",
    "SarcConfig",
    "SchemeSpec",
    "SolveResult",
    "StepOutcome",
    "StrConfig",
    "calls_through_best",
    "calls_to_reach",
    "certify_run",
    "cumulative_calls",
    "dump_config",
    "emit_plot_data",
    "load_config",
    "run_experiment",
    "cubic_cauchy_step",
    "cubic_exact_step",
    "draw_subset",
    "estimate",
    "eval_full",
    "function_sample_size",
    "gradient_sample_size",
    "hessian_sample_size",
    "make_convex_quadratic",
    "make_indefinite_quadratic",
    "make_nonconvex_regression",
    "model_decrease",
    "oracle_calls",
    "read_trace_csv",
    "resolve_constants",
    "sarc_certify_iteration",
    "sarc_complexity_budget",
    "sarc_solve",
    "smallest_eigenpair",
    "str_certify_iteration",
    "str_complexity_budget",
    "str_solve",
    "stream_rng",
    "subset_variance_bound",
    "subset_variance_exact",
    "summarize_checks",
    "tr_cauchy_step",
    "tr_eigen_step",
    "tr_exact_step",
    "write_trace_csv",
]
