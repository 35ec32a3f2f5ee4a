"""Stochastic trust region with subsampled function, gradient, and Hessian.

Each iteration draws gradient and Hessian subsets (Bernstein-sized by default,
or as dictated by an explicit batch schedule), solves the trust-region
subproblem, then measures progress with a subsampled function difference.  The
acceptance ratio is noise-adjusted:

    rho_tilde = (h(x) - h(x + s)) / (m(0) - m(s))
    rho       = rho_tilde - 2 eps_h ||s||^2 / (m(0) - m(s))

Steps are accepted when rho >= eta; the radius grows by r2 (capped at
delta_max) when rho > eta and shrinks by r1 otherwise.  When the sampled
gradient is already small (||g|| <= eps_nabla_f + eps_g) the function subset
reuses the gradient subset.  The run stops once the sampled certificates

    ||g(x)|| <= eps_nabla_f - eps_g   and   lambda_min(B(x)) >= -(eps_H - eps_B)

both hold; by the triangle inequality and Weyl's bound these imply
(eps_nabla_f, eps_H)-optimality of the exact average whenever the sampling
tolerances are honoured.  That terminal probe is recorded as a trace row with
method "certificate" and a zero step so oracle accounting stays exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._common import (
    BatchSchedule,
    CheckResult,
    exact_diagnostics,
    require,
    resolve_constants,
)
from .problems import FiniteSumProblem, eval_full
from .sampling import (
    draw_subset,
    estimate,
    function_sample_size,
    gradient_sample_size,
    hessian_sample_size,
)
from .subproblem import QuadraticModel, StepOutcome, tr_cauchy_step, tr_eigen_step, tr_exact_step
from .trace import BUDGET_EXHAUSTED, CONVERGED, IterationRecord, SolveResult

__all__ = [
    "StrConfig",
    "str_solve",
    "str_certify_iteration",
    "str_complexity_budget",
]


@dataclass(frozen=True)
class StrConfig:
    """Targets, sampling tolerances, and update factors for the trust-region solver.

    eps_g / eps_B / eps_h default to the fixed points of the schedule
    eps_g = (1 - eta)/16 (eps_nabla_f - eps_g) and
    eps_B = eps_h = (1 - eta)/10 (eps_H - eps_B), solved in closed form.
    kappa_* / H* / L_hess left at None are taken from the problem's constants.
    """

    eps_nabla_f: float = 1e-2
    eps_H: float = 1e-2
    eta: float = 0.1
    r1: float = 0.5
    r2: float = 2.0
    delta0: float = 1.0
    delta_max: float = 100.0
    delta_prob: float = 0.1
    max_iters: int = 1000
    use_exact_subproblem: bool = False
    eps_g: float | None = None
    eps_B: float | None = None
    eps_h: float | None = None
    kappa_f: float | None = None
    kappa_grad: float | None = None
    kappa_hess: float | None = None
    H1: float | None = None
    H2: float | None = None
    L_grad: float | None = None
    L_hess: float | None = None
    track_exact: bool = True

    def resolved(self) -> "StrConfig":
        """Fill schedule defaults and validate every invariant."""
        c1 = (1.0 - self.eta) / 16.0
        c2 = (1.0 - self.eta) / 10.0
        eps_g = self.eps_g if self.eps_g is not None else c1 * self.eps_nabla_f / (1.0 + c1)
        eps_B = self.eps_B if self.eps_B is not None else c2 * self.eps_H / (1.0 + c2)
        eps_h = self.eps_h if self.eps_h is not None else eps_B
        cfg = replace(self, eps_g=eps_g, eps_B=eps_B, eps_h=eps_h)
        if not 0.0 < cfg.eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        if not (cfg.r2 >= 1.0 > cfg.r1 > 0.0):
            raise ValueError("need r2 >= 1 > r1 > 0")
        if not 0.0 < cfg.delta0 <= cfg.delta_max:
            raise ValueError("need 0 < delta0 <= delta_max")
        if not 0.0 < cfg.delta_prob < 1.0:
            raise ValueError("delta_prob must lie in (0, 1)")
        if not cfg.eps_nabla_f > cfg.eps_g > 0.0:
            raise ValueError("need eps_nabla_f > eps_g > 0")
        if not cfg.eps_H > cfg.eps_B > 0.0:
            raise ValueError("need eps_H > eps_B > 0")
        if cfg.eps_h < 0.0:
            raise ValueError("eps_h must be nonnegative")
        if cfg.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        return cfg


def _tr_dispatch(model: QuadraticModel, delta: float, eigpair, use_exact: bool) -> StepOutcome | None:
    """Cauchy step, eigen step, or their better; None when neither branch applies."""
    if use_exact:
        return tr_exact_step(model, delta)
    candidates = []
    if float(np.linalg.norm(model.g)) > 0.0:
        candidates.append(tr_cauchy_step(model, delta))
    if eigpair[0] < 0.0:
        candidates.append(tr_eigen_step(model, delta, eigpair=eigpair))
    if not candidates:
        return None
    # ties go to the Cauchy step, which is listed first
    return max(candidates, key=lambda o: o.model_decrease)


def str_solve(
    problem: FiniteSumProblem,
    config: StrConfig,
    rng_stream,
    x0: np.ndarray | None = None,
    schedule: BatchSchedule | None = None,
) -> SolveResult:
    """Run the stochastic trust-region loop; see the module docstring.

    ``rng_stream`` is an integer (or int tuple) seeding all subset draws;
    identical (problem, config, stream) triples produce bit-identical traces.
    ``schedule`` overrides the Bernstein sample sizes per iteration with
    (size_g, size_B, size_h or None).
    """
    cfg = config.resolved()
    consts = resolve_constants(problem, cfg)
    n, d = problem.n, problem.d
    x = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x.shape != (d,):
        raise ValueError("x0 dimension mismatch")
    root = rng_stream if isinstance(rng_stream, tuple) else (int(rng_stream),)

    if schedule is None:
        kg = require(consts.kappa_grad, "kappa_grad", "Bernstein gradient sizing")
        kh = require(consts.kappa_hess, "kappa_hess", "Bernstein Hessian sizing")
        size_g0 = gradient_sample_size(kg, cfg.eps_g, cfg.delta_prob, d, n)
        size_b0 = hessian_sample_size(kh, cfg.eps_B, cfg.delta_prob, d, n)
        schedule = lambda k: (size_g0, size_b0, None)

    delta = cfg.delta0
    trace: list[IterationRecord] = []
    status = BUDGET_EXHAUSTED

    for k in range(cfg.max_iters):
        size_g, size_b, size_h_override = schedule(k)
        s_g = draw_subset(n, size_g, root + (k, 0), "gradient")
        s_b = draw_subset(n, size_b, root + (k, 1), "hessian")
        g = estimate(problem, x, s_g)
        b = estimate(problem, x, s_b)
        gnorm = float(np.linalg.norm(g))
        evals, evecs = np.linalg.eigh(b)
        lam_min = float(evals[0])
        bnorm = float(max(abs(evals[0]), abs(evals[-1])))
        i = int(np.argmax(np.abs(evecs[:, 0])))
        vmin = -evecs[:, 0] if evecs[i, 0] < 0 else evecs[:, 0]

        exact_f = exact_gn = exact_lm = None
        if cfg.track_exact:
            exact_f, exact_gn, exact_lm = exact_diagnostics(problem, x)

        base = dict(
            k=k, delta_or_sigma=delta, size_g=size_g, size_B=size_b,
            sampled_grad_norm=gnorm, sampled_lambda_min=lam_min,
            exact_f=exact_f, exact_grad_norm=exact_gn, exact_lambda_min=exact_lm,
            sampled_B_norm=bnorm,
        )

        if gnorm <= cfg.eps_nabla_f - cfg.eps_g and lam_min >= -(cfg.eps_H - cfg.eps_B):
            trace.append(IterationRecord(
                rho_tilde=0.0, rho=0.0, success=False, size_h=0, step_norm=0.0,
                method="certificate", **base,
            ))
            status = CONVERGED
            break

        model = QuadraticModel(g=g, B=b)
        out = _tr_dispatch(model, delta, (lam_min, vmin), cfg.use_exact_subproblem)
        if out is None:
            # g = 0 with lambda_min >= 0: certificate necessarily held above
            trace.append(IterationRecord(
                rho_tilde=0.0, rho=0.0, success=False, size_h=0, step_norm=0.0,
                method="certificate", **base,
            ))
            status = CONVERGED
            break
        s = out.s
        step_norm = out.step_norm
        decrease = out.model_decrease

        if decrease <= 0.0 or not np.isfinite(decrease):
            trace.append(IterationRecord(
                rho_tilde=0.0, rho=0.0, success=False, size_h=0, step_norm=step_norm,
                method=out.method, model_decrease=decrease, forced_unsuccessful=True, **base,
            ))
            delta = cfg.r1 * delta
            continue

        shortcut = gnorm <= cfg.eps_nabla_f + cfg.eps_g
        if shortcut:
            s_h = s_g.with_kind("function")
        else:
            if size_h_override is not None:
                size_h = size_h_override
            else:
                kf = require(consts.kappa_f, "kappa_f", "function-subset sizing")
                size_h = function_sample_size(
                    kf, cfg.eps_h, step_norm, cfg.delta_prob, d, n,
                    consts.H1 or 0.0, consts.H2 or 0.0, cfg.eps_g, cfg.eps_B,
                )
            s_h = draw_subset(n, size_h, root + (k, 2), "function")
        h_x = estimate(problem, x, s_h)
        h_xs = estimate(problem, x + s, s_h)

        rho_tilde = (h_x - h_xs) / decrease
        rho = rho_tilde - 2.0 * cfg.eps_h * step_norm**2 / decrease
        success = rho >= cfg.eta

        exact_f_trial = exact_rho = None
        if cfg.track_exact:
            exact_f_trial = eval_full(problem, x + s, "value")
            exact_rho = (exact_f - exact_f_trial) / decrease

        bound = _lemma5_bound(out.method, gnorm, bnorm, lam_min, delta)
        trace.append(IterationRecord(
            rho_tilde=rho_tilde, rho=rho, success=success,
            size_h=s_h.size, step_norm=step_norm, method=out.method,
            model_decrease=decrease, h_x=h_x, h_xs=h_xs, sh_equals_sg=shortcut,
            exact_f_trial=exact_f_trial, exact_rho=exact_rho,
            lemma_decrease_value=bound,
            lemma5_ok=None if bound is None else decrease >= bound - 1e-9 * max(1.0, abs(bound)),
            **base,
        ))

        if success:
            x = x + s
        delta = min(cfg.delta_max, cfg.r2 * delta) if rho > cfg.eta else cfg.r1 * delta

    return SolveResult(x, trace, status)


def _lemma5_bound(method: str, gnorm: float, bnorm: float, lam_min: float, delta: float) -> float | None:
    """Guaranteed model decrease for the step kind actually taken."""
    cauchy = 0.5 * gnorm * min(delta, gnorm / bnorm if bnorm > 0 else np.inf) if gnorm > 0 else None
    eigen = -0.5 * lam_min * delta**2 if lam_min < 0 else None
    if method == "cauchy":
        return cauchy
    if method == "eigen":
        return eigen
    if method == "exact":
        options = [v for v in (cauchy, eigen) if v is not None]
        return max(options) if options else None
    return None


def str_certify_iteration(
    record: IterationRecord,
    config: StrConfig,
    constants=None,
    n: int | None = None,
) -> list[CheckResult]:
    """Runtime checks of the decrease, gap, and ratio-sandwich guarantees.

    ``constants`` is a ResolvedConstants-like object carrying H1, H2, L_hess
    and ``n`` the number of components (both needed by the gap bound; checks
    missing an input are reported as skipped).  Returns (name,
    pass/fail/skipped, margin) triples where margin is the slack of the
    inequality (negative = violated).
    """
    cfg = config.resolved()
    checks: list[CheckResult] = []
    if record.method == "certificate":
        return checks
    delta = record.delta_or_sigma
    dec = record.model_decrease
    gnorm, bnorm, lam = record.sampled_grad_norm, record.sampled_B_norm, record.sampled_lambda_min
    tol = 1e-9

    # Cauchy-branch decrease guarantee, stated with the sampled (g, B, delta)
    if record.method in ("cauchy", "exact") and gnorm > 0:
        bound = 0.5 * gnorm * min(delta, gnorm / bnorm if bnorm > 0 else np.inf)
        margin = dec - bound
        checks.append(CheckResult("lemma5_cauchy_decrease",
                                  "pass" if margin >= -tol * max(1.0, bound) else "fail", margin))
    # negative-curvature branch guarantee against the sampled matrix
    if record.method in ("eigen", "exact") and lam < 0:
        bound = -0.5 * lam * delta**2
        margin = dec - bound + 1e-10
        checks.append(CheckResult("lemma5_eigen_decrease",
                                  "pass" if margin >= -tol * max(1.0, bound) else "fail", margin))

    # model-vs-sampled-function gap bound
    if record.forced_unsuccessful:
        return checks
    have = (constants is not None and n is not None
            and None not in (constants.H1, constants.H2, constants.L_hess))
    if not have:
        checks.append(CheckResult("lemma6_gap", "skipped", None))
    else:
        gap = dec - (record.h_x - record.h_xs)
        indicator = 0.0 if record.size_h >= n else 1.0
        first = 0.0 if record.sh_equals_sg else 2.0 * (indicator * constants.H1 / record.size_h + cfg.eps_g) * delta
        second = 1.5 * (indicator * constants.H2 / record.size_h + constants.L_hess * delta + cfg.eps_B) * delta**2
        bound = first + second
        margin = bound - gap
        checks.append(CheckResult("lemma6_gap", "pass" if margin >= -tol * max(1.0, bound) else "fail", margin))

    # |rho_k - rho_tilde| sandwich and acceptance soundness need exact values
    if record.exact_f is None or record.exact_f_trial is None:
        checks.append(CheckResult("rho_sandwich", "skipped", None))
        checks.append(CheckResult("acceptance_sound", "skipped", None))
        return checks
    rhs = 2.0 * cfg.eps_h * record.step_norm**2 / dec
    lhs = abs(record.exact_rho - record.rho_tilde)
    checks.append(CheckResult("rho_sandwich", "pass" if lhs <= rhs + 1e-9 * max(1.0, rhs) else "fail", rhs - lhs))
    ev = cfg.eps_h * record.step_norm**2
    event = (abs(record.exact_f - record.h_x) <= ev + 1e-12
             and abs(record.exact_f_trial - record.h_xs) <= ev + 1e-12)
    if record.success and event:
        margin = record.exact_rho - cfg.eta
        checks.append(CheckResult("acceptance_sound", "pass" if margin >= -1e-9 else "fail", margin))
    else:
        checks.append(CheckResult("acceptance_sound", "skipped", None))
    return checks


def str_complexity_budget(
    config: StrConfig,
    constants,
    f0: float,
    f_low: float,
) -> dict:
    """Post-hoc iteration-count budget from the radius lower-bound analysis.

    Evaluates the theory constants (kappa_1..kappa_3, the minimal radii, the
    successful/unsuccessful iteration caps) from supplied problem constants.
    Diagnostic only; never used by the solver.
    """
    cfg = config.resolved()
    kh = require(constants.kappa_hess, "kappa_hess", "complexity budget")
    lh = require(constants.L_hess, "L_hess", "complexity budget")
    one = 1.0 - cfg.eta
    gap_g = cfg.eps_nabla_f - cfg.eps_g
    gap_h = cfg.eps_H - cfg.eps_B
    if lh > 0:
        kappa1 = cfg.r1 * min(1.0 / kh, one / 40.0, math.sqrt(one / (12.0 * lh)))
        kappa2 = cfg.r1 * one / (6.0 * lh)
    else:
        kappa1 = cfg.r1 * min(1.0 / kh, one / 40.0)
        kappa2 = math.inf
    delta_min1 = kappa1 * gap_g
    delta_min2 = kappa2 * gap_h
    delta_min = min(delta_min1, delta_min2)
    kappa3 = 2.0 * (f0 - f_low) * max(1.0 / (cfg.eta * kappa1),
                                      0.0 if math.isinf(kappa2) else 1.0 / (cfg.eta * kappa2**2))
    t_suc = kappa3 * max(gap_g**-2, gap_h**-3)
    t_unsuc = (math.log(cfg.delta_max / delta_min) - t_suc * math.log(cfg.r2)) / -math.log(cfg.r1)
    return {
        "kappa1": kappa1, "kappa2": kappa2, "kappa3": kappa3,
        "delta_min1": delta_min1, "delta_min2": delta_min2, "delta_min": delta_min,
        "successful_iterations_bound": t_suc,
        "unsuccessful_iterations_bound": t_unsuc,
    }
