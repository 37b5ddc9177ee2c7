"""Kernels, feature maps, Gram matrices and empirical second moments.

Two kernel families are closed-form (Gaussian, Laplace); the third wraps an
explicit finite-dimensional feature map, with kernel value equal to the inner
product of feature vectors:

* ``Gaussian(bandwidth)``:  k(x, y) = exp(-||x - y||^2 / (2 * bandwidth^2))
* ``Laplace(scale)``:       k(x, y) = exp(-||x - y||_2 / scale)
* ``FeatureLinear(fmap)``:  k(x, y) = phi(x)^T phi(y)

Feature maps:

* ``HermiteMap(degree)`` sends a scalar x to the degree+1 vector of
  probabilists' Hermite polynomials He_j(x) / sqrt(j!), which are orthonormal
  under N(0, 1).
* ``DiagonalMap(alpha, beta, n)`` implements the diagonal covariate-shift
  construction: covariates are signed integer indices, with +k denoting
  source point k (mapped to sqrt(n) * k^-alpha * e_k) and -k denoting target
  point k (mapped to sqrt(n) * k^-beta * e_k).  The resulting source/target
  second moments are exactly diag(k^-2a) and diag(k^-2b).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.spatial.distance

from .errors import InputError

# relative floor for "PSD up to round-off" checks on assembled Gram blocks
PSD_RTOL = 1e-10


# ---------------------------------------------------------------------------
# feature maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HermiteMap:
    """Normalized probabilists' Hermite features He_j(x)/sqrt(j!), j = 0..degree."""

    degree: int

    def __post_init__(self):
        if self.degree < 0:
            raise InputError(f"Hermite degree must be >= 0, got {self.degree}")

    @property
    def dim(self) -> int:
        return self.degree + 1

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return hermite_features(np.asarray(x, dtype=float).reshape(-1), self.degree)


def hermite_features(x: np.ndarray, degree: int) -> np.ndarray:
    """Evaluate normalized Hermite features at scalar inputs.

    Coordinate j is He_j(x) / sqrt(j!) where He follows the three-term
    recurrence He_{j+1}(x) = x He_j(x) - j He_{j-1}(x), He_0 = 1, He_1 = x.
    Returns an array of shape (len(x), degree + 1).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    out = np.empty((x.size, degree + 1))
    out[:, 0] = 1.0
    if degree >= 1:
        out[:, 1] = x
    he_prev, he = np.ones_like(x), x.copy()
    for j in range(1, degree):
        he_prev, he = he, x * he - j * he_prev
        out[:, j + 1] = he / math.sqrt(math.factorial(j + 1))
    return out


@dataclass(frozen=True)
class DiagonalMap:
    """Diagonal feature construction with (alpha, beta)-eigendecay.

    Covariates are signed indices: +k is source point k, -k is target
    point k, k = 1..n.  Source k maps to sqrt(n) k^-alpha e_k, target k to
    sqrt(n) k^-beta e_k.
    """

    alpha: float
    beta: float
    n: int

    def __post_init__(self):
        # the rate theory additionally needs beta < 1/2 + alpha; that range is
        # enforced where it matters (optimal_gamma), not here, so the map stays
        # usable as a plain test problem for any decay pair
        if self.alpha <= 0.5:
            raise InputError(f"alpha must exceed 1/2, got {self.alpha}")
        if self.beta <= 0.5:
            raise InputError(f"beta must exceed 1/2, got {self.beta}")
        if self.n < 1:
            raise InputError(f"dimension must be positive, got {self.n}")

    @property
    def dim(self) -> int:
        return self.n

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        idx = np.rint(np.abs(x)).astype(int)
        if np.any(idx < 1) or np.any(idx > self.n):
            raise InputError("diagonal-map covariates must be signed indices in 1..n")
        out = np.zeros((x.size, self.n))
        expo = np.where(x > 0, -self.alpha, -self.beta)
        out[np.arange(x.size), idx - 1] = math.sqrt(self.n) * idx.astype(float) ** expo
        return out


# ---------------------------------------------------------------------------
# kernel specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gaussian:
    bandwidth: float

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise InputError(f"bandwidth must be positive, got {self.bandwidth}")


@dataclass(frozen=True)
class Laplace:
    scale: float

    def __post_init__(self):
        if self.scale <= 0:
            raise InputError(f"scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class FeatureLinear:
    fmap: HermiteMap | DiagonalMap


KernelSpec = Gaussian | Laplace | FeatureLinear


def _as_points(x) -> np.ndarray:
    """Coerce covariates to a 2-D (num_points, d) array."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return x.reshape(1, 1)
    if x.ndim == 1:
        return x.reshape(-1, 1)
    if x.ndim != 2:
        raise InputError(f"covariates must be at most 2-D, got shape {x.shape}")
    return x


def _sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # pairwise differences rather than the inner-product expansion, so
    # coincident points give exactly zero (and k(x, x) exactly one)
    return scipy.spatial.distance.cdist(x, y, "sqeuclidean")


def kernel_matrix(spec: KernelSpec, x, y) -> np.ndarray:
    """Dense kernel matrix with entry (i, j) = k(x_i, y_j)."""
    x, y = _as_points(x), _as_points(y)
    if x.shape[1] != y.shape[1]:
        raise InputError(f"covariate dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if isinstance(spec, Gaussian):
        return np.exp(-_sq_dists(x, y) / (2.0 * spec.bandwidth**2))
    if isinstance(spec, Laplace):
        return np.exp(-np.sqrt(_sq_dists(x, y)) / spec.scale)
    if isinstance(spec, FeatureLinear):
        if x.shape[1] != 1:
            raise InputError("feature maps expect scalar covariates")
        return spec.fmap(x[:, 0]) @ spec.fmap(y[:, 0]).T
    raise InputError(f"unknown kernel spec {spec!r}")


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Kernel value k(x, y) for a single pair of covariates."""
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
    y = np.atleast_1d(np.asarray(y, dtype=float)).reshape(1, -1)
    return float(kernel_matrix(spec, x, y)[0, 0])


# ---------------------------------------------------------------------------
# datasets and Gram sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """Labeled source pairs plus unlabeled target covariates."""

    source_x: np.ndarray
    source_y: np.ndarray
    target_x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "source_x", _as_points(self.source_x))
        object.__setattr__(self, "target_x", _as_points(self.target_x))
        object.__setattr__(self, "source_y", np.asarray(self.source_y, dtype=float).reshape(-1))
        if self.n < 1 or self.m < 1:
            raise InputError("dataset needs at least one source and one target point")
        if self.source_y.size != self.n:
            raise InputError(f"{self.n} source points but {self.source_y.size} responses")
        if self.source_x.shape[1] != self.target_x.shape[1]:
            raise InputError("source and target covariates must share one dimension")

    @property
    def n(self) -> int:
        return self.source_x.shape[0]

    @property
    def m(self) -> int:
        return self.target_x.shape[0]


@dataclass(frozen=True)
class GramSet:
    """The four kernel matrices driving every closed form.

    ``k_nn`` (n x n) and ``k_mn`` (m x n) use the teacher kernel;
    ``kt_mm`` (m x m) and ``kt_nm`` (n x m) use the student kernel.
    ``kt_nm[i, j] = kt(x_i, xtil_j)``, i.e. the transpose of the student
    target-source matrix.
    """

    k_nn: np.ndarray
    k_mn: np.ndarray
    kt_mm: np.ndarray
    kt_nm: np.ndarray
    teacher_kernel: KernelSpec = field(repr=False, default=None)
    student_kernel: KernelSpec = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.k_nn.shape[0]

    @property
    def m(self) -> int:
        return self.kt_mm.shape[0]


def _check_psd(mat: np.ndarray, name: str) -> None:
    eigs = np.linalg.eigvalsh(mat)
    lo, hi = eigs[0], max(eigs[-1], 0.0)
    if lo < -PSD_RTOL * max(hi, 1e-300):
        warnings.warn(
            f"{name} has eigenvalue {lo:.3e} below -{PSD_RTOL:.0e} * max eigenvalue "
            f"{hi:.3e}; kernel matrix is numerically indefinite",
            stacklevel=3,
        )


def build_gram(teacher_kernel: KernelSpec, student_kernel: KernelSpec,
               data: Dataset, check_psd: bool = True) -> GramSet:
    """Assemble the four Gram blocks for a dataset.

    Symmetric blocks are symmetrized as (A + A^T)/2 after assembly to guard
    against float asymmetry; eigenvalue floors are reported as warnings.
    """
    k_nn = kernel_matrix(teacher_kernel, data.source_x, data.source_x)
    k_nn = 0.5 * (k_nn + k_nn.T)
    k_mn = kernel_matrix(teacher_kernel, data.target_x, data.source_x)
    kt_mm = kernel_matrix(student_kernel, data.target_x, data.target_x)
    kt_mm = 0.5 * (kt_mm + kt_mm.T)
    # student-kernel target-source matrix, transposed
    kt_nm = kernel_matrix(student_kernel, data.target_x, data.source_x).T
    if check_psd:
        _check_psd(k_nn, "K_nn")
        _check_psd(kt_mm, "Kt_mm")
    return GramSet(k_nn, k_mn, kt_mm, kt_nm, teacher_kernel, student_kernel)


# ---------------------------------------------------------------------------
# empirical second moments
# ---------------------------------------------------------------------------

COMMUTE_RTOL = 1e-8


@dataclass(frozen=True)
class SecondMoments:
    """Source/target empirical second-moment matrices of a feature map.

    sigma = Phi^T Phi / n over source points, sigma_til = Phit^T Phit / m over
    target points.  ``shared_eigenbasis`` is true when the Frobenius norm of
    the commutator is below COMMUTE_RTOL * ||sigma||_F ||sigma_til||_F.
    """

    sigma: np.ndarray
    sigma_til: np.ndarray
    commutator_norm: float
    shared_eigenbasis: bool


def second_moments(fmap: HermiteMap | DiagonalMap, data: Dataset) -> SecondMoments:
    """Empirical second moments of a feature map on source/target covariates."""
    if data.source_x.shape[1] != 1:
        raise InputError("feature maps expect scalar covariates")
    phi = fmap(data.source_x[:, 0])
    phit = fmap(data.target_x[:, 0])
    sigma = phi.T @ phi / data.n
    sigma_til = phit.T @ phit / data.m
    sigma = 0.5 * (sigma + sigma.T)
    sigma_til = 0.5 * (sigma_til + sigma_til.T)
    comm = float(np.linalg.norm(sigma @ sigma_til - sigma_til @ sigma))
    tol = COMMUTE_RTOL * np.linalg.norm(sigma) * np.linalg.norm(sigma_til)
    return SecondMoments(sigma, sigma_til, comm, comm <= tol)
