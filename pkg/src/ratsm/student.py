"""The RKHS student: representer weights, proximal update, prediction, norm.

Student functions are f_theta = sum_j theta_j kt(., xt_j) over the target
covariates, penalized by (gamma * m / 2) * ||f||_H^2.  The proximal map for
this penalty has the closed form

    theta = (Kt_mm + m * gamma * eta * I)^-1 u,

whose fitted values Kt_mm theta minimize
(1/(2 eta)) ||u - f(xt)||^2 + (gamma m / 2) ||f||_H^2 over the representer
class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InputError, NumericalError
from .kernels import GramSet, KernelSpec, kernel_matrix


@dataclass(frozen=True)
class StudentConfig:
    """Student regularization weight and kernel."""

    gamma: float
    kernel: KernelSpec = None

    def __post_init__(self):
        if self.gamma < 0:
            raise InputError(f"gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True)
class StudentWeights:
    """Representer coefficient vector theta defining f_theta."""

    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if not np.all(np.isfinite(theta)):
            raise InputError("student weights must be finite")
        object.__setattr__(self, "theta", theta)

    @property
    def m(self) -> int:
        return self.theta.size


def spd_solve(system: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    """Solve an SPD system by Cholesky, raising NumericalError on failure."""
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(system, lower=True), rhs)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(
            f"{what}: system not positive definite "
            f"(condition estimate {np.linalg.cond(system):.3e})"
        ) from exc


def prox(config: StudentConfig, gram: GramSet, u: np.ndarray, eta: float) -> StudentWeights:
    """Proximal update of the squared-Hilbert-norm penalty at the vector u."""
    if eta <= 0:
        raise InputError(f"stepsize must be positive, got {eta}")
    u = np.asarray(u, dtype=float).reshape(-1)
    m = gram.m
    if u.size != m:
        raise InputError(f"prox expects a length-{m} vector, got {u.size}")
    system = gram.kt_mm + m * config.gamma * eta * np.eye(m)
    return StudentWeights(spd_solve(system, u, "prox"))


def fitted_values(weights: StudentWeights, gram: GramSet) -> np.ndarray:
    """Student evaluations at the target covariates, Kt_mm theta."""
    return gram.kt_mm @ weights.theta


def source_values(weights: StudentWeights, gram: GramSet) -> np.ndarray:
    """Student evaluations at the source covariates, Kt_nm theta."""
    return gram.kt_nm @ weights.theta


def predict(weights: StudentWeights, student_kernel: KernelSpec,
            target_x, query_points) -> np.ndarray:
    """Evaluate f_theta(z) = sum_j theta_j kt(z, xt_j) at query points."""
    kq = kernel_matrix(student_kernel, query_points, target_x)
    if kq.shape[1] != weights.m:
        raise InputError(f"{kq.shape[1]} target points but {weights.m} weights")
    return kq @ weights.theta


def hilbert_norm(weights: StudentWeights, gram: GramSet) -> float:
    """RKHS norm sqrt(theta^T Kt_mm theta) of the student function."""
    theta = weights.theta
    q = float(theta @ (gram.kt_mm @ theta))
    if q < 0:
        floor = 1e-12 * float(theta @ theta) * np.linalg.norm(gram.kt_mm, 2)
        if q < -floor:
            raise NumericalError(f"quadratic form {q:.3e} strongly negative; Gram not PSD")
        q = 0.0
    return float(np.sqrt(q))
