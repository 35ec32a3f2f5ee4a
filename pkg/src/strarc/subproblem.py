"""Local models and subproblem solvers for trust-region and cubic steps.

The quadratic model is m(s) = f0 + <g, s> + 0.5 <s, B s>; the cubic model adds
(sigma / 3) ||s||^3.  Steps come in three flavours:

* Cauchy steps minimize the model along -g (closed form in both geometries),
* eigen steps move a full trust-region radius along the most negative
  curvature direction of B,
* exact steps globally minimize the model via a symmetric eigendecomposition
  of B plus 1-d root finding on the secular equation, with explicit hard-case
  handling (eigenvector augmentation when g is orthogonal to the bottom
  eigenspace).

Secular equations are solved by safeguarded Newton with bisection fallback on
a bracket that starts at max(0, -lambda_min) + 1e-14 and grows geometrically
until the residual changes sign, capped at 200 iterations.  All operations are
pure functions of their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg

__all__ = [
    "QuadraticModel",
    "CubicModel",
    "StepOutcome",
    "model_decrease",
    "smallest_eigenpair",
    "tr_cauchy_step",
    "tr_eigen_step",
    "tr_exact_step",
    "cubic_cauchy_step",
    "cubic_exact_step",
]

_SECULAR_MAX_ITER = 200


def _check_symmetric(mat: np.ndarray, tol: float) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("expected a square matrix")
    if np.abs(mat - mat.T).max() > tol:
        raise ValueError(f"matrix is not symmetric to within {tol:g}")
    return mat


@dataclass(frozen=True)
class QuadraticModel:
    """m(s) = f0 + <g, s> + 0.5 <s, B s> with symmetric B.

    f0 is the sampled function value at the expansion point, or 0: only model
    differences ever matter.
    """

    g: np.ndarray
    B: np.ndarray
    f0: float = 0.0

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        B = _check_symmetric(self.B, 1e-12 * max(1.0, float(np.abs(self.B).max(initial=0.0))))
        if B.shape[0] != g.shape[0]:
            raise ValueError("g and B dimensions disagree")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "B", B)

    def value(self, s: np.ndarray) -> float:
        s = np.asarray(s, dtype=float)
        return self.f0 + float(self.g @ s) + 0.5 * float(s @ (self.B @ s))

    def decrease(self, s: np.ndarray) -> float:
        s = np.asarray(s, dtype=float)
        return -(float(self.g @ s) + 0.5 * float(s @ (self.B @ s)))


@dataclass(frozen=True)
class CubicModel:
    """p(s) = m(s) + (sigma / 3) ||s||^3 around the same expansion point."""

    base: QuadraticModel
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def g(self) -> np.ndarray:
        return self.base.g

    @property
    def B(self) -> np.ndarray:
        return self.base.B

    def value(self, s: np.ndarray) -> float:
        s = np.asarray(s, dtype=float)
        return self.base.value(s) + self.sigma / 3.0 * float(np.linalg.norm(s)) ** 3

    def decrease(self, s: np.ndarray) -> float:
        s = np.asarray(s, dtype=float)
        return self.base.decrease(s) - self.sigma / 3.0 * float(np.linalg.norm(s)) ** 3

    def gradient(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return self.g + self.B @ s + self.sigma * float(np.linalg.norm(s)) * s


def model_decrease(model, s: np.ndarray) -> float:
    """m(0) - m(s) (quadratic) or p(0) - p(s) (cubic); the ratio denominator."""
    return model.decrease(s)


@dataclass
class StepOutcome:
    """A trial step with its model decrease and how it was constructed.

    ``conditions_ok`` / ``theta`` are populated by the exact cubic solver: the
    three booleans report the stationarity identity, the nonnegative-curvature
    inequality, and the relative gradient-norm condition of the step.
    """

    s: np.ndarray
    model_decrease: float
    method: str  # "cauchy" | "eigen" | "exact"
    conditions_ok: tuple[bool, bool, bool] | None = None
    theta: float | None = None

    @property
    def step_norm(self) -> float:
        return float(np.linalg.norm(self.s))


def _fix_sign(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def smallest_eigenpair(M: np.ndarray, lanczos_cutoff: int = 500) -> tuple[float, np.ndarray]:
    """(lambda_min, unit eigenvector) of a symmetric matrix.

    Dense symmetric eigendecomposition below ``lanczos_cutoff``; above it a
    Lanczos solve is tried first and the dense path is the fallback whenever
    the Lanczos residual exceeds 1e-8 ||M||.
    """
    M = _check_symmetric(M, 1e-10 * max(1.0, float(np.abs(M).max(initial=0.0))))
    d = M.shape[0]
    if d > lanczos_cutoff:
        try:
            vals, vecs = scipy.sparse.linalg.eigsh(M, k=1, which="SA", tol=1e-10)
            lam, v = float(vals[0]), vecs[:, 0]
            v = v / np.linalg.norm(v)
            scale = float(np.abs(M).max(initial=0.0)) * d  # cheap upper bound on ||M||
            if np.linalg.norm(M @ v - lam * v) <= 1e-8 * max(scale, 1.0):
                return lam, _fix_sign(v)
        except scipy.sparse.linalg.ArpackNoConvergence:
            pass
    vals, vecs = np.linalg.eigh(M)
    return float(vals[0]), _fix_sign(vecs[:, 0])


def tr_cauchy_step(model: QuadraticModel, delta: float) -> StepOutcome:
    """Cauchy point of the trust-region subproblem: model minimizer along -g.

    s = -tau Delta g/||g|| with tau = 1 when g^T B g <= 0 and
    min(1, ||g||^3 / (Delta g^T B g)) otherwise; the decrease satisfies
    0.5 ||g|| min{Delta, ||g|| / ||B||}.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    gnorm = float(np.linalg.norm(model.g))
    if gnorm == 0.0:
        raise ValueError("Cauchy step undefined at g = 0; use the negative-curvature branch")
    gbg = float(model.g @ (model.B @ model.g))
    tau = 1.0 if gbg <= 0.0 else min(1.0, gnorm**3 / (delta * gbg))
    s = -(tau * delta / gnorm) * model.g
    return StepOutcome(s, model.decrease(s), "cauchy")


def tr_eigen_step(model: QuadraticModel, delta: float, eigpair=None) -> StepOutcome:
    """Boundary step along the most negative curvature direction of B.

    Requires lambda_min(B) < 0.  The sign makes <g, s> <= 0 (ties broken
    toward +v); the decrease is at least -0.5 lambda_min(B) Delta^2.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    lam, v = eigpair if eigpair is not None else smallest_eigenpair(model.B)
    if lam >= 0:
        raise ValueError("no negative curvature to exploit (lambda_min >= 0)")
    s = delta * v
    if float(model.g @ s) > 0.0:
        s = -s
    return StepOutcome(s, model.decrease(s), "eigen")


def _secular_solve(phi_minus_target, lo, hi, max_iter):
    """Safeguarded Newton on a strictly decreasing residual with a sign-change bracket.

    ``phi_minus_target(lam)`` returns (residual, derivative).  Assumes
    residual(lo) > 0 > residual(hi); returns the root.
    """
    lam = 0.5 * (lo + hi)
    for _ in range(max_iter):
        res, dres = phi_minus_target(lam)
        if res > 0:
            lo = lam
        else:
            hi = lam
        if abs(res) <= 1e-13 * max(1.0, abs(lam)) or hi - lo <= 1e-15 * max(1.0, hi):
            return lam
        step = res / dres if dres != 0 else np.inf
        cand = lam - step
        lam = cand if lo < cand < hi else 0.5 * (lo + hi)
    return lam


def _grow_bracket(residual, lo, hi0, max_iter):
    """Geometric growth of the upper bracket end until the residual turns negative."""
    hi = max(hi0, lo + 1e-8)
    for _ in range(max_iter):
        if residual(hi) < 0:
            return hi
        hi = 2.0 * hi + 1.0
    return None


def tr_exact_step(model: QuadraticModel, delta: float, max_iter: int = _SECULAR_MAX_ITER) -> StepOutcome:
    """Global minimizer of the quadratic model over the ball ||s|| <= delta.

    Eigendecomposition of B plus root finding on ||(B + lam I)^{-1} g|| = delta
    over lam >= max(0, -lambda_min); the hard case (g orthogonal to the bottom
    eigenspace with an interior-norm shifted solution) is resolved by adding a
    bottom-eigenvector component that lands the step on the boundary.  If the
    bracket cannot be established, returns the better of the Cauchy and eigen
    steps, flagged by its method.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    evals, evecs = np.linalg.eigh(model.B)
    ghat = evecs.T @ model.g
    lam_min = float(evals[0])
    lam_lo = max(0.0, -lam_min)
    scale = max(1.0, float(np.abs(evals).max()), float(np.linalg.norm(ghat)))

    # interior Newton step when B is positive definite
    if lam_min > 0.0:
        s = -evecs @ (ghat / evals)
        if float(np.linalg.norm(s)) <= delta:
            return StepOutcome(s, model.decrease(s), "exact")

    active = np.abs(evals + lam_lo) <= 1e-12 * scale
    hard_possible = not np.any(active & (np.abs(ghat) > 1e-13 * scale))

    if hard_possible:
        denom = np.where(active, 1.0, evals + lam_lo)
        shat = np.where(active, 0.0, -ghat / denom)
        base_norm = float(np.linalg.norm(shat))
        if base_norm < delta:
            if lam_lo == 0.0:
                # positive semidefinite with a feasible (pseudo-inverse) minimizer
                s = evecs @ shat
                return StepOutcome(s, model.decrease(s), "exact")
            # hard case: augment along the bottom eigenvector up to the boundary
            t = math.sqrt(delta**2 - base_norm**2)
            s = evecs @ shat + t * _fix_sign(evecs[:, 0])
            return StepOutcome(s, model.decrease(s), "exact")

    def norm_s(lam):
        denom = evals + lam
        r = ghat / denom
        nrm = float(np.linalg.norm(r))
        dn = -float(np.sum(r * r / denom)) / nrm if nrm > 0 else 0.0
        return nrm, dn

    def residual(lam):
        # 1/delta - 1/||s(lam)||: decreasing, nearly linear in lam
        nrm, _ = norm_s(lam)
        return 1.0 / delta - 1.0 / nrm

    lo = lam_lo + 1e-14 * max(1.0, lam_lo)
    if residual(lo) <= 0:
        lo = lam_lo + 1e-14  # spec bracket start; handles lam_lo = 0 exactly
    hi = _grow_bracket(residual, lo, lam_lo + float(np.linalg.norm(ghat)) / delta + scale, max_iter)
    if hi is None or residual(lo) < 0:
        candidates = []
        if float(np.linalg.norm(model.g)) > 0:
            candidates.append(tr_cauchy_step(model, delta))
        lam0, v0 = float(evals[0]), _fix_sign(evecs[:, 0])
        if lam0 < 0:
            candidates.append(tr_eigen_step(model, delta, eigpair=(lam0, v0)))
        if not candidates:
            s = np.zeros_like(model.g)
            return StepOutcome(s, 0.0, "exact")
        return max(candidates, key=lambda o: o.model_decrease)

    def res_and_deriv(lam):
        nrm, dn = norm_s(lam)
        return 1.0 / delta - 1.0 / nrm, dn / nrm**2

    lam = _secular_solve(res_and_deriv, lo, hi, max_iter)
    s = -evecs @ (ghat / (evals + lam))
    return StepOutcome(s, model.decrease(s), "exact")


def cubic_cauchy_step(model: CubicModel) -> StepOutcome:
    """Closed-form Cauchy point of the cubic model.

    s = -alpha g with alpha = 2 / (||B|| + sqrt(||B||^2 + 4 sigma ||g||)); the
    decrease is at least (1/10) ||g|| min{||g||/||B||, sqrt(||g||/sigma)} and
    the step norm at most (11/4) max{||B||/sigma, sqrt(||g||/sigma)}.
    """
    gnorm = float(np.linalg.norm(model.g))
    if gnorm == 0.0:
        raise ValueError("cubic Cauchy step undefined at g = 0; use cubic_exact_step")
    bnorm = float(np.abs(np.linalg.eigvalsh(model.B)).max())
    alpha = 2.0 / (bnorm + math.sqrt(bnorm**2 + 4.0 * model.sigma * gnorm))
    s = -alpha * model.g
    return StepOutcome(s, model.decrease(s), "cauchy")


def cubic_exact_step(
    model: CubicModel,
    kappa_theta: float = 0.5,
    max_iter: int = _SECULAR_MAX_ITER,
) -> StepOutcome:
    """Global minimizer of the cubic model via the secular equation.

    Solves ||(B + lam I)^{-1} g|| = lam / sigma for lam >= max(0, -lambda_min)
    (hard case via eigenvector augmentation at lam = -lambda_min).  The
    returned outcome reports, in ``conditions_ok``:

    1. <g, s> + s^T B s + sigma ||s||^3 = 0 to within 1e-8 (1 + ||g|| ||s||),
    2. s^T B s + sigma ||s||^3 >= -1e-10,
    3. ||grad p(s)|| <= theta ||g|| with theta <= kappa_theta min{1, ||s||},

    plus the achieved theta.  A False third flag signals the caller to fall
    back to the Cauchy step.
    """
    if not 0 < kappa_theta < 1:
        raise ValueError("kappa_theta must lie in (0, 1)")
    sigma = model.sigma
    evals, evecs = np.linalg.eigh(model.B)
    ghat = evecs.T @ model.g
    lam_min = float(evals[0])
    lam_lo = max(0.0, -lam_min)
    scale = max(1.0, float(np.abs(evals).max()), float(np.linalg.norm(ghat)))
    gnorm = float(np.linalg.norm(model.g))

    def finish(s):
        s = np.asarray(s, dtype=float)
        snorm = float(np.linalg.norm(s))
        r14 = float(model.g @ s) + float(s @ (model.B @ s)) + sigma * snorm**3
        c15 = float(s @ (model.B @ s)) + sigma * snorm**3
        gradp = float(np.linalg.norm(model.gradient(s)))
        theta = gradp / gnorm if gnorm > 0 else 0.0
        ok14 = abs(r14) <= 1e-8 * (1.0 + gnorm * snorm)
        ok15 = c15 >= -1e-10
        ok16 = gnorm == 0.0 or theta <= kappa_theta * min(1.0, snorm)
        return StepOutcome(s, model.decrease(s), "exact", (ok14, ok15, ok16), theta)

    if gnorm == 0.0:
        if lam_min >= 0.0:
            return finish(np.zeros_like(model.g))
        # pure hard case: boundary of the implied region, ||s|| = -lam_min/sigma
        return finish((lam_lo / sigma) * _fix_sign(evecs[:, 0]))

    active = np.abs(evals + lam_lo) <= 1e-12 * scale
    hard_possible = not np.any(active & (np.abs(ghat) > 1e-13 * scale))
    if hard_possible and lam_lo > 0.0:
        denom = np.where(active, 1.0, evals + lam_lo)
        shat = np.where(active, 0.0, -ghat / denom)
        base_norm = float(np.linalg.norm(shat))
        target = lam_lo / sigma
        if base_norm < target:
            t = math.sqrt(target**2 - base_norm**2)
            return finish(evecs @ shat + t * _fix_sign(evecs[:, 0]))

    def res_and_deriv(lam):
        denom = evals + lam
        r = ghat / denom
        nrm = float(np.linalg.norm(r))
        dn = -float(np.sum(r * r / denom)) / nrm if nrm > 0 else 0.0
        return sigma * nrm - lam, sigma * dn - 1.0

    lo = lam_lo + 1e-14 * max(1.0, lam_lo)
    if res_and_deriv(lo)[0] <= 0:
        lo = lam_lo + 1e-14
        if res_and_deriv(lo)[0] <= 0 and lam_lo == 0.0:
            # sigma ||B^{-1} g|| <= 0 can only mean g vanished numerically
            return finish(np.zeros_like(model.g))
    hi0 = lam_lo + 2.75 * max(scale, math.sqrt(sigma * gnorm)) + 1.0
    hi = _grow_bracket(lambda lam: res_and_deriv(lam)[0], lo, hi0, max_iter)
    if hi is None:
        out = finish(np.zeros_like(model.g))
        out.conditions_ok = (False, False, False)
        return out
    lam = _secular_solve(res_and_deriv, lo, hi, max_iter)
    s = -evecs @ (ghat / (evals + lam))
    return finish(s)
