"""Uniform subset sampling, Bernstein sample-size rules, subsampled estimators.

Index sets are drawn uniformly *without replacement*; every draw is keyed by a
seed path (a tuple of integers fed to numpy's SeedSequence) so that identical
paths reproduce identical subsets.  Estimates are plain unweighted averages of
component oracles over the drawn indices.  Estimation is single-threaded and
relies on numpy's fixed-order pairwise reduction, so repeated evaluation is
bit-reproducible.

The sample-size rules translate target approximation errors into subset
cardinalities:

* gradient:  |S_g| >= 16 log(2d/delta) kappa_grad^2 / eps_g^2
* Hessian:   |S_B| >= 16 log(2d/delta) kappa_hess^2 / eps_B^2
* function:  |S_h| >= 16 log(2d/delta) kappa_f^2 / (eps_h^2 ||s||^4),
             additionally raised to max{H1/eps_g, H2/eps_B}

each ceiled and clamped to [1, n].  The variance of a subset average of
zero-sum vectors has the exact closed form

    E || (1/A) sum_{b in A} v_b ||^2 = (n - A) / (A (n - 1)) * mean_i ||v_i||^2

which `subset_variance_exact` evaluates (and tests cross-check against
exhaustive enumeration).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problems import FiniteSumProblem

__all__ = [
    "SampleSet",
    "SamplePlan",
    "stream_rng",
    "draw_subset",
    "estimate",
    "gradient_sample_size",
    "hessian_sample_size",
    "function_sample_size",
    "subset_variance_exact",
    "subset_variance_bound",
]

_KINDS = ("function", "gradient", "hessian")


def stream_rng(seed_path) -> np.random.Generator:
    """Generator for a seed path (tuple of ints); same path, same stream."""
    if isinstance(seed_path, (int, np.integer)):
        seed_path = (int(seed_path),)
    entropy = [int(p) for p in seed_path]
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class SampleSet:
    """A drawn index subset: sorted distinct indices in [0, n) plus its origin."""

    indices: np.ndarray
    kind: str
    seed_path: tuple

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}")
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size < 1:
            raise ValueError("indices must be a nonempty 1-d array")
        if np.unique(idx).size != idx.size:
            raise ValueError("indices must be distinct (without replacement)")
        object.__setattr__(self, "indices", np.sort(idx))

    @property
    def size(self) -> int:
        return int(self.indices.size)

    def with_kind(self, kind: str) -> "SampleSet":
        """Same indices reinterpreted for another oracle (used for S_h = S_g)."""
        return SampleSet(self.indices, kind, self.seed_path)


@dataclass(frozen=True)
class SamplePlan:
    """Per-iteration subset sizes and the tolerances they were derived from."""

    size_g: int
    size_B: int
    size_h: int
    delta: float
    eps_g: float
    eps_B: float
    eps_h: float

    def __post_init__(self):
        if min(self.size_g, self.size_B, self.size_h) < 1:
            raise ValueError("sizes must be >= 1")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if min(self.eps_g, self.eps_B) <= 0 or self.eps_h < 0:
            raise ValueError("tolerances must be positive (eps_h may be 0)")


def _bernstein_size(kappa: float, eps: float, delta: float, d: int, n: int) -> int:
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if eps <= 0:
        raise ValueError("eps must be positive (the bound diverges at 0)")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if d < 1 or n < 1:
        raise ValueError("need d >= 1 and n >= 1")
    raw = 16.0 * math.log(2.0 * d / delta) * kappa**2 / eps**2
    return int(min(n, max(1, math.ceil(raw))))


def gradient_sample_size(kappa_grad: float, eps_g: float, delta: float, d: int, n: int) -> int:
    """Subset size making ||grad f - g|| <= eps_g hold with probability 1 - delta."""
    return _bernstein_size(kappa_grad, eps_g, delta, d, n)


def hessian_sample_size(kappa_hess: float, eps_B: float, delta: float, d: int, n: int) -> int:
    """Subset size making ||hess f - B|| <= eps_B (spectral) hold w.p. 1 - delta."""
    return _bernstein_size(kappa_hess, eps_B, delta, d, n)


def function_sample_size(
    kappa_f: float,
    eps_h: float,
    step_norm: float,
    delta: float,
    d: int,
    n: int,
    H1: float,
    H2: float,
    eps_g: float,
    eps_B: float,
) -> int:
    """Subset size for the function-value estimate at a known step norm.

    Takes the max of the Bernstein rule (accuracy eps_h ||s||^2 w.p. 1 - delta)
    and the variance rule max{H1/eps_g, H2/eps_B}, so both guarantees hold
    simultaneously; capped at n.  The step must already be solved: a zero step
    should have been rejected upstream.
    """
    if step_norm <= 0:
        raise ValueError("step_norm must be positive (zero step rejected upstream)")
    if eps_h <= 0:
        raise ValueError("eps_h must be positive (the bound diverges at 0)")
    if min(H1, H2) < 0 or min(eps_g, eps_B) <= 0:
        raise ValueError("need H1, H2 >= 0 and eps_g, eps_B > 0")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    bern = 16.0 * math.log(2.0 * d / delta) * kappa_f**2 / (eps_h**2 * step_norm**4)
    need = max(math.ceil(bern), math.ceil(H1 / eps_g), math.ceil(H2 / eps_B), 1)
    return int(min(n, need))


def draw_subset(n: int, size: int, rng_stream, kind: str = "gradient") -> SampleSet:
    """Uniform without-replacement subset of [0, n), deterministic per stream."""
    if not 1 <= size <= n:
        raise ValueError(f"size must lie in [1, n={n}], got {size}")
    if size == n:
        idx = np.arange(n, dtype=np.int64)
    else:
        rng = stream_rng(rng_stream)
        idx = rng.choice(n, size=size, replace=False, shuffle=False).astype(np.int64)
    path = rng_stream if isinstance(rng_stream, tuple) else (int(rng_stream),)
    return SampleSet(idx, kind, path)


def estimate(problem: FiniteSumProblem, x: np.ndarray, sample: SampleSet):
    """Unweighted average of f_i / grad f_i / hess f_i over the sample indices."""
    if sample.indices[-1] >= problem.n:
        raise ValueError("sample indices exceed problem size")
    if sample.kind == "function":
        return float(problem.value_batch(sample.indices, x).mean())
    if sample.kind == "gradient":
        return problem.grad_batch(sample.indices, x).mean(axis=0)
    return problem.hess_batch(sample.indices, x).mean(axis=0)


def _zero_sum_array(vectors) -> np.ndarray:
    arr = np.asarray(vectors, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("expected a nonempty list of vectors")
    total = arr.sum(axis=0)
    if np.abs(total).max() > 1e-10:
        raise ValueError(f"vectors must sum to zero (|sum| = {np.abs(total).max():.3e})")
    return arr


def subset_variance_exact(vectors, A: int) -> float:
    """E ||(1/A) sum_{b in subset} v_b||^2 over uniform size-A subsets, exactly.

    Requires sum_i v_i = 0 (checked to 1e-10).  Closed form:
    (n - A) / (A (n - 1)) * mean_i ||v_i||^2; zero at A = n.
    """
    arr = _zero_sum_array(vectors)
    n = arr.shape[0]
    if not 1 <= A <= n:
        raise ValueError(f"A must lie in [1, n={n}]")
    if A == n:
        return 0.0
    mean_sq = float((arr**2).sum(axis=1).mean())
    return (n - A) / (A * (n - 1)) * mean_sq


def subset_variance_bound(vectors, A: int) -> float:
    """The variance bound 1(A < n)/A * mean_i ||v_i||^2 that the exact value obeys."""
    arr = _zero_sum_array(vectors)
    n = arr.shape[0]
    if not 1 <= A <= n:
        raise ValueError(f"A must lie in [1, n={n}]")
    if A == n:
        return 0.0
    return float((arr**2).sum(axis=1).mean()) / A
