"""Finite-sum test problems with exact per-component oracles.

A problem is the average f(x) = (1/n) sum_i f_i(x) of n smooth components.
Every problem carries batched component evaluators (values, gradients, dense
Hessians) plus, when the generator can derive them, bound constants that are
valid on a declared box [-box_radius, box_radius]^d:

* kappa_f, kappa_grad, kappa_hess  -- per-component bounds |f_i|, ||grad f_i||,
  ||hess f_i|| (spectral norm),
* H1, H2 -- bounds on the component gradient / Hessian variance,
* L_grad, L_hess -- Lipschitz constants of the gradient and the Hessian.

Hessians are materialized as dense d x d symmetric matrices; the generators
target desk scale (d <= 200) where dense eigendecompositions are cheap.
Problem objects are immutable after construction and safe for concurrent
read-only evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

__all__ = [
    "EvaluationError",
    "ProblemConstants",
    "FiniteSumProblem",
    "eval_full",
    "make_indefinite_quadratic",
    "make_convex_quadratic",
    "make_nonconvex_regression",
]


class EvaluationError(RuntimeError):
    """A component oracle produced a non-finite value."""

    def __init__(self, index: int, what: str):
        self.index = index
        self.what = what
        super().__init__(f"non-finite {what} for component {index}")


@dataclass(frozen=True)
class ProblemConstants:
    """Bound constants valid on the box [-box_radius, box_radius]^d.

    Any field may be None when the generator cannot supply it.  Global bounds
    are unattainable for e.g. quadratics, so everything is localized to the
    declared box.
    """

    box_radius: float
    kappa_f: float | None = None
    kappa_grad: float | None = None
    kappa_hess: float | None = None
    H1: float | None = None
    H2: float | None = None
    L_grad: float | None = None
    L_hess: float | None = None


def _check_finite(values: np.ndarray, idx: np.ndarray, what: str) -> np.ndarray:
    ok = np.isfinite(values)
    while ok.ndim > 1:
        ok = ok.all(axis=-1)
    if not ok.all():
        bad = int(np.asarray(idx)[np.flatnonzero(~ok)[0]])
        raise EvaluationError(bad, what)
    return values


@dataclass(frozen=True)
class FiniteSumProblem:
    """n smooth components f_i: R^d -> R with batched exact oracles.

    The three callables map (indices, x) to stacked per-component results of
    shape (k,), (k, d) and (k, d, d) respectively.  ``constants`` holds the
    generator's documented bounds (see ProblemConstants).
    """

    name: str
    n: int
    d: int
    _values: Callable[[np.ndarray, np.ndarray], np.ndarray]
    _grads: Callable[[np.ndarray, np.ndarray], np.ndarray]
    _hessians: Callable[[np.ndarray, np.ndarray], np.ndarray]
    constants: ProblemConstants

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("need n >= 1 and d >= 1")

    # -- batched component oracles -------------------------------------

    def value_batch(self, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        return _check_finite(self._values(idx, np.asarray(x, dtype=float)), idx, "value")

    def grad_batch(self, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        return _check_finite(self._grads(idx, np.asarray(x, dtype=float)), idx, "gradient")

    def hess_batch(self, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        return _check_finite(self._hessians(idx, np.asarray(x, dtype=float)), idx, "hessian")

    # -- single-component convenience ----------------------------------

    def component_value(self, i: int, x: np.ndarray) -> float:
        return float(self.value_batch(np.array([i]), x)[0])

    def component_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.grad_batch(np.array([i]), x)[0]

    def component_hess(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.hess_batch(np.array([i]), x)[0]

    def all_indices(self) -> np.ndarray:
        return np.arange(self.n, dtype=np.int64)


def eval_full(problem: FiniteSumProblem, x: np.ndarray, what: str):
    """Exact full-sum value / gradient / Hessian, averaged over all components.

    Deterministic; numpy's pairwise reduction over the fixed index order makes
    repeated calls bit-identical.
    """
    idx = problem.all_indices()
    if what == "value":
        return float(problem.value_batch(idx, x).mean())
    if what == "gradient":
        return problem.grad_batch(idx, x).mean(axis=0)
    if what == "hessian":
        return problem.hess_batch(idx, x).mean(axis=0)
    raise ValueError(f"unknown selector {what!r}")


# ----------------------------------------------------------------------
# generators
# ----------------------------------------------------------------------


def _component_spectral_norms(mats: np.ndarray) -> np.ndarray:
    # exact spectral norms via symmetric eigendecomposition, one per component
    eigs = np.linalg.eigvalsh(mats)
    return np.abs(eigs).max(axis=1)


def _make_quadratic(name, seed, n, d, mean_eigs, noise_scale, b_scale, mean_b, box_radius):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    a_mean = (q * mean_eigs) @ q.T
    a_mean = (a_mean + a_mean.T) / 2.0

    noise = rng.standard_normal((n, d, d)) * noise_scale
    noise = (noise + noise.transpose(0, 2, 1)) / 2.0
    noise -= noise.mean(axis=0)
    a = a_mean[None, :, :] + noise

    # antithetic +/- pairs keep the component sum of b at exactly zero
    raw = rng.standard_normal((n // 2, d)) * b_scale
    b = np.zeros((n, d))
    b[0 : 2 * (n // 2) : 2] = raw
    b[1 : 2 * (n // 2) : 2] = -raw
    if mean_b is not None:
        b += np.asarray(mean_b, dtype=float)

    a.setflags(write=False)
    b.setflags(write=False)

    radius = box_radius * np.sqrt(d)  # Euclidean bound over the box
    norms_a = _component_spectral_norms(a)
    norms_b = np.linalg.norm(b, axis=1)
    dev_a = _component_spectral_norms(a - a.mean(axis=0))
    dev_b = np.linalg.norm(b - b.mean(axis=0), axis=1)
    constants = ProblemConstants(
        box_radius=box_radius,
        kappa_f=float(np.max(0.5 * norms_a * radius**2 + norms_b * radius)),
        kappa_grad=float(np.max(norms_a * radius + norms_b)),
        kappa_hess=float(norms_a.max()),
        H1=float(np.sqrt(np.mean((dev_a * radius + dev_b) ** 2))),
        H2=float(np.sqrt(np.mean(dev_a**2))),
        L_grad=float(norms_a.max()),
        L_hess=0.0,  # component Hessians are constant
    )

    def values(idx, x):
        return 0.5 * np.einsum("kij,i,j->k", a[idx], x, x) + b[idx] @ x

    def grads(idx, x):
        return np.einsum("kij,j->ki", a[idx], x) + b[idx]

    def hessians(idx, x):
        return a[idx]

    return FiniteSumProblem(name, n, d, values, grads, hessians, constants)


def make_indefinite_quadratic(
    seed: int,
    n: int,
    d: int,
    curvature_spread: float,
    *,
    b_scale: float = 1.0,
    mean_b: np.ndarray | None = None,
    box_radius: float = 10.0,
) -> FiniteSumProblem:
    """Quadratic finite sum whose mean Hessian straddles zero curvature.

    f_i(x) = 0.5 x^T A_i x + b_i^T x with the mean of the A_i having
    eigenvalues spanning [-curvature_spread, +curvature_spread]: x = 0 is a
    strict saddle of the average.  The b_i are built as antithetic pairs so
    they sum to exactly zero (grad f(0) = 0); pass ``mean_b`` to shift the
    component sum, ``b_scale=0`` for identically zero linear terms.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if d < 2:
        raise ValueError("need d >= 2 for one negative and one positive curvature direction")
    if curvature_spread <= 0:
        raise ValueError("curvature_spread must be positive")
    mean_eigs = np.linspace(-curvature_spread, curvature_spread, d)
    return _make_quadratic(
        f"indefinite_quadratic(seed={seed},n={n},d={d},spread={curvature_spread:g})",
        seed, n, d, mean_eigs, 0.5 * curvature_spread, b_scale, mean_b, box_radius,
    )


def make_convex_quadratic(
    seed: int,
    n: int,
    d: int,
    eig_min: float = 0.5,
    eig_max: float = 2.0,
    *,
    b_scale: float = 1.0,
    mean_b: np.ndarray | None = None,
    box_radius: float = 10.0,
) -> FiniteSumProblem:
    """Strictly convex quadratic finite sum (mean eigenvalues in [eig_min, eig_max]).

    Companion test problem: with exact sampling the solvers must reduce to
    their classical deterministic counterparts on it.
    """
    if not 0 < eig_min <= eig_max:
        raise ValueError("need 0 < eig_min <= eig_max")
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    mean_eigs = np.linspace(eig_min, eig_max, d)
    return _make_quadratic(
        f"convex_quadratic(seed={seed},n={n},d={d})",
        seed, n, d, mean_eigs, 0.25 * eig_min, b_scale, mean_b, box_radius,
    )


# max |d/dx 2x/(1+x^2)^2| and max |d^3/dx^3 x^2/(1+x^2)|, used for the
# regularizer's curvature and Hessian-Lipschitz bounds
_REG_GRAD_MAX = 9.0 / (8.0 * np.sqrt(3.0))  # at x = 1/sqrt(3)
_REG_HESS_MAX = 2.0  # at x = 0
_REG_THIRD_MAX = 4.6682  # at x^2 = 1 - sqrt(0.8), rounded up
_SIGMOID_SECOND_MAX = 1.0 / (6.0 * np.sqrt(3.0))


def make_nonconvex_regression(
    seed: int,
    n: int,
    d: int,
    reg_weight: float,
    *,
    box_radius: float = 5.0,
    feature_spread: float = 0.3,
    zero_labels: bool = False,
) -> FiniteSumProblem:
    """Logistic loss on separable synthetic data plus a smooth nonconvex penalty.

    f_i(x) = log(1 + exp(-y_i a_i^T x)) + reg_weight * sum_j x_j^2 / (1 + x_j^2)

    Features cluster around a common direction (controlled by
    ``feature_spread``) and labels come from a noiseless linear separator, so
    the data is separable and the components have moderate variance.  Each f_i
    is C^2 with Lipschitz gradient and Hessian; the documented constants hold
    on the declared box.  ``zero_labels`` blanks every label, turning the
    logistic part into the constant log 2 so each component reduces to the
    penalty with its minimizer at x = 0.
    """
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    if reg_weight < 0:
        raise ValueError("reg_weight must be nonnegative")
    rng = np.random.default_rng(seed)
    base = rng.standard_normal(d)
    base /= np.linalg.norm(base)
    feats = base[None, :] + feature_spread * rng.standard_normal((n, d))
    sep = rng.standard_normal(d)
    sep /= np.linalg.norm(sep)
    margins = feats @ sep
    labels = np.zeros(n) if zero_labels else np.where(margins >= 0, 1.0, -1.0)
    feats.setflags(write=False)
    labels.setflags(write=False)

    radius = box_radius * np.sqrt(d)
    a_norms = np.linalg.norm(feats, axis=1)
    amax = float(a_norms.max())
    constants = ProblemConstants(
        box_radius=box_radius,
        kappa_f=float(np.logaddexp(0.0, amax * radius) + reg_weight * d),
        kappa_grad=amax + reg_weight * _REG_GRAD_MAX * np.sqrt(d),
        kappa_hess=0.25 * amax**2 + reg_weight * _REG_HESS_MAX,
        H1=amax,  # the shared penalty cancels in gradient deviations
        H2=0.5 * amax**2,
        L_grad=0.25 * amax**2 + reg_weight * _REG_HESS_MAX,
        L_hess=_SIGMOID_SECOND_MAX * amax**3 + reg_weight * _REG_THIRD_MAX,
    )

    w = reg_weight

    def values(idx, x):
        z = -labels[idx] * (feats[idx] @ x)
        reg = w * np.sum(x * x / (1.0 + x * x))
        return np.logaddexp(0.0, z) + reg

    def grads(idx, x):
        y, a = labels[idx], feats[idx]
        z = -y * (a @ x)
        reg_grad = w * 2.0 * x / (1.0 + x * x) ** 2
        return expit(z)[:, None] * (-y[:, None] * a) + reg_grad[None, :]

    def hessians(idx, x):
        y, a = labels[idx], feats[idx]
        z = -y * (a @ x)
        sig = expit(z)
        curv = sig * (1.0 - sig) * y * y  # y^2 keeps zeroed labels inert
        h = np.einsum("k,ki,kj->kij", curv, a, a)
        reg_curv = w * (2.0 - 6.0 * x * x) / (1.0 + x * x) ** 3
        h[:, np.arange(x.size), np.arange(x.size)] += reg_curv[None, :]
        return h

    return FiniteSumProblem(
        f"nonconvex_regression(seed={seed},n={n},d={d},reg={reg_weight:g})",
        n, d, values, grads, hessians, constants,
    )
