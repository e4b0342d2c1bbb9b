"""Numeric kernels shared by the learning-control modules.

Weighted quadratic forms, the trial cost, the spectral norm, and a seeded
Gaussian sampler.  Weights are stored either as a nonnegative scalar times
the identity or as a full symmetric matrix; the scalar form is the fast
path for large horizons.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFINITENESS_TOL = 1e-12


class WeightError(ValueError):
    pass


class Weight:
    """A symmetric positive semidefinite weight, scalar*identity or full matrix.

    :param value: nonnegative scalar, or a square symmetric array.
    """

    def __init__(self, value):
        if np.isscalar(value):
            value = float(value)
            if not np.isfinite(value):
                raise WeightError("weight scalar must be finite")
            if value < 0.0:
                raise WeightError("weight scalar must be nonnegative, got %g" % value)
            self.scalar = value
            self.matrix = None
        else:
            mat = np.asarray(value, dtype=float)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise WeightError("weight matrix must be square, got shape %s" % (mat.shape,))
            if not np.all(np.isfinite(mat)):
                raise WeightError("weight matrix must be finite")
            if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-10 * (1.0 + np.abs(mat).max())):
                raise WeightError("weight matrix must be symmetric")
            self.scalar = None
            self.matrix = 0.5 * (mat + mat.T)

    @property
    def is_scalar(self) -> bool:
        return self.matrix is None

    def quad(self, x: np.ndarray) -> float:
        """Evaluate x^T W x (no extra squaring)."""
        x = np.asarray(x, dtype=float)
        if self.is_scalar:
            return float(self.scalar * np.dot(x, x))
        return float(x @ self.matrix @ x)

    def matmul(self, other: np.ndarray) -> np.ndarray:
        """Return W @ other."""
        other = np.asarray(other, dtype=float)
        if self.is_scalar:
            return self.scalar * other
        return self.matrix @ other

    def dense(self, n: int) -> np.ndarray:
        """Materialize the weight as an n-by-n array."""
        if self.is_scalar:
            return self.scalar * np.eye(n)
        if self.matrix.shape[0] != n:
            raise WeightError("weight has size %d, expected %d" % (self.matrix.shape[0], n))
        return self.matrix

    def min_eigenvalue(self) -> float:
        if self.is_scalar:
            return self.scalar
        return float(np.linalg.eigvalsh(self.matrix).min())

    def check_psd(self, name: str = "weight") -> None:
        lam = self.min_eigenvalue()
        scale = self.scalar if self.is_scalar else max(1.0, float(np.abs(self.matrix).max()))
        if lam < -DEFINITENESS_TOL * max(1.0, scale):
            raise WeightError("%s must be positive semidefinite (min eig %g)" % (name, lam))

    def check_pd(self, name: str = "weight") -> None:
        lam = self.min_eigenvalue()
        if lam <= 0.0:
            raise WeightError("%s must be positive definite (min eig %g)" % (name, lam))

    def __repr__(self):
        if self.is_scalar:
            return "Weight(%r)" % self.scalar
        return "Weight(matrix %dx%d)" % self.matrix.shape


@dataclass(frozen=True)
class Weighting:
    """Weights of the quadratic trial criterion.

    w_e penalizes the error (positive definite), w_upsilon the feedforward
    parameters, and w_delta_upsilon the trial-to-trial parameter change
    (both positive semidefinite).
    """

    w_e: Weight
    w_upsilon: Weight
    w_delta_upsilon: Weight

    def __post_init__(self):
        self.w_e.check_pd("w_e")
        self.w_upsilon.check_psd("w_upsilon")
        self.w_delta_upsilon.check_psd("w_delta_upsilon")


def weighted_quadratic(x: np.ndarray, weight: Weight) -> float:
    """Weighted quadratic form x^T W x."""
    return weight.quad(x)


def trial_cost(error: np.ndarray, upsilon: np.ndarray, upsilon_next: np.ndarray,
               weighting: Weighting) -> float:
    """Cost of one trial:

        ||e||^2_We + ||upsilon_next||^2_Wu + ||upsilon_next - upsilon||^2_Wdu

    where ||x||^2_W denotes x^T W x.
    """
    upsilon = np.asarray(upsilon, dtype=float)
    upsilon_next = np.asarray(upsilon_next, dtype=float)
    return (weighting.w_e.quad(error)
            + weighting.w_upsilon.quad(upsilon_next)
            + weighting.w_delta_upsilon.quad(upsilon_next - upsilon))


def spectral_norm(mat: np.ndarray) -> float:
    """Largest singular value, computed with the LAPACK SVD.

    Raises ValueError on NaN or Inf entries instead of propagating them.
    """
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if not np.all(np.isfinite(mat)):
        raise ValueError("spectral_norm: matrix contains NaN or Inf")
    if mat.size == 0:
        return 0.0
    return float(np.linalg.svd(mat, compute_uv=False)[0])


@dataclass
class SeededSampler:
    """Deterministic Gaussian sampler.

    Wraps numpy's PCG64 bit generator with the ziggurat standard-normal
    transform; the same seed reproduces the same stream on any platform.
    """

    seed: int
    algorithm_id: str = field(default="numpy-pcg64/ziggurat-standard-normal", init=False)

    def __post_init__(self):
        self._rng = np.random.Generator(np.random.PCG64(self.seed))

    def standard_normal(self, size: int) -> np.ndarray:
        return self._rng.standard_normal(size)

    def clone(self, seed: int) -> "SeededSampler":
        """Independent sampler for a different seed (parallel sweeps)."""
        return SeededSampler(seed)


def gaussian_vector(sampler: SeededSampler, mean: np.ndarray, variance: float) -> np.ndarray:
    """Draw from N(mean, variance * I).

    variance == 0 returns the mean exactly; negative variance is rejected.
    """
    mean = np.asarray(mean, dtype=float)
    if variance < 0.0:
        raise ValueError("variance must be nonnegative, got %g" % variance)
    if variance == 0.0:
        return mean.copy()
    return mean + np.sqrt(variance) * sampler.standard_normal(mean.shape[0])
