"""Response-linear teachers as explicit m x n operators.

A teacher maps the n source responses to m target-domain predictions.  Two
nonparametric smoothers are built in:

* kernel ridge regression,  T = K_mn (K_nn + n * lam * I)^-1, and
* Nadaraya-Watson smoothing with a Gaussian base density, whose rows are
  non-negative and sum to one.

``fit_residual_teacher`` is the entry point that turns a student's source
residuals into a target-domain gradient estimate; for the response-linear
specs above it reduces to a matrix-vector product with the built operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InputError, NumericalError
from .kernels import Dataset, GramSet, KernelSpec, build_gram, _sq_dists


@dataclass(frozen=True)
class KrrTeacher:
    """Kernel ridge regression with penalty lam; lam = 0 needs invertible K_nn."""

    lam: float
    kernel: KernelSpec

    def __post_init__(self):
        if self.lam < 0:
            raise InputError(f"KRR penalty must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class NwTeacher:
    """Nadaraya-Watson smoother with Gaussian base density and given bandwidth."""

    bandwidth: float

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise InputError(f"NW bandwidth must be positive, got {self.bandwidth}")


@dataclass(frozen=True)
class CustomTeacher:
    """An arbitrary fixed m x n response-linear operator."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.atleast_2d(np.asarray(self.matrix, dtype=float)))


TeacherSpec = KrrTeacher | NwTeacher | CustomTeacher


@dataclass(frozen=True)
class TeacherOperator:
    """A materialized m x n teacher matrix with its spec provenance."""

    matrix: np.ndarray
    spec: TeacherSpec = None

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]


def build_krr_teacher(gram: GramSet, lam: float) -> TeacherOperator:
    """T = K_mn (K_nn + n * lam * I)^-1 via an SPD factorization.

    The system matrix is never inverted explicitly.  If the Cholesky
    factorization fails, a single jitter of 1e-12 * trace/n is added before
    giving up with a condition estimate.
    """
    n = gram.n
    system = gram.k_nn + n * lam * np.eye(n)
    for jitter in (0.0, 1e-12 * np.trace(gram.k_nn) / n):
        try:
            cho = scipy.linalg.cho_factor(system + jitter * np.eye(n), lower=True)
            t = scipy.linalg.cho_solve(cho, gram.k_mn.T).T
            return TeacherOperator(t, KrrTeacher(lam, gram.teacher_kernel))
        except scipy.linalg.LinAlgError:
            continue
    cond = np.linalg.cond(system)
    raise NumericalError(
        f"KRR factorization failed: K_nn + n*lam*I not positive definite "
        f"(lam={lam}, condition estimate {cond:.3e})"
    )


def build_nw_teacher(data: Dataset, bandwidth: float) -> TeacherOperator:
    """Row-stochastic NW smoother T[j, i] = phi_h(xt_j - x_i) / sum_l phi_h(xt_j - x_l).

    Weights use the standard Gaussian density; the per-row maximum of the
    exponent is subtracted before exponentiating, which keeps rows stochastic
    at any bandwidth and realizes the nearest-neighbor fallback exactly in
    the h -> 0 limit.
    """
    if bandwidth <= 0:
        raise InputError(f"NW bandwidth must be positive, got {bandwidth}")
    d2 = _sq_dists(data.target_x, data.source_x)
    logw = -d2 / (2.0 * bandwidth**2)
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    t = w / w.sum(axis=1, keepdims=True)
    return TeacherOperator(t, NwTeacher(bandwidth))


def build_teacher(spec: TeacherSpec, data: Dataset, gram: GramSet | None = None) -> TeacherOperator:
    """Materialize any TeacherSpec for a dataset.

    A GramSet is reused for KRR when its teacher kernel matches the spec;
    otherwise the needed blocks are assembled from the spec's own kernel.
    """
    if isinstance(spec, CustomTeacher):
        t = spec.matrix
        if t.shape != (data.m, data.n):
            raise InputError(f"custom teacher is {t.shape}, expected {(data.m, data.n)}")
        return TeacherOperator(t, spec)
    if isinstance(spec, NwTeacher):
        return build_nw_teacher(data, spec.bandwidth)
    if isinstance(spec, KrrTeacher):
        if gram is None or gram.teacher_kernel != spec.kernel:
            gram = build_gram(spec.kernel, spec.kernel, data, check_psd=False)
        return build_krr_teacher(gram, spec.lam)
    raise InputError(f"unknown teacher spec {spec!r}")


def apply_teacher(teacher: TeacherOperator, v: np.ndarray) -> np.ndarray:
    """Matrix-vector product T v, mapping source-domain vectors to target ones."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != teacher.n:
        raise InputError(f"teacher expects length-{teacher.n} vectors, got {v.size}")
    return teacher.matrix @ v


def fit_residual_teacher(spec: TeacherSpec, data: Dataset, residuals: np.ndarray,
                         gram: GramSet | None = None) -> np.ndarray:
    """Regress source residuals with the teacher and evaluate at target points.

    For the built-in response-linear specs this equals
    ``apply_teacher(build_teacher(spec, data), residuals)`` exactly; the
    function exists as the hook point for non-linear teachers.
    """
    residuals = np.asarray(residuals, dtype=float).reshape(-1)
    if residuals.size != data.n:
        raise InputError(f"expected {data.n} residuals, got {residuals.size}")
    return apply_teacher(build_teacher(spec, data, gram), residuals)
