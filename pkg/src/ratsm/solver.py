"""Losses, the teacher-based gradient estimate, Picard iteration, closed forms.

The residual-corrected estimate is the fixed point of

    f  ->  prox_eta( f(xt) - eta * G(f) ),     G(f) = T(f(x) - y)

for a response-linear teacher T and the least-squares loss.  The fixed-point
set does not depend on the stepsize eta, and for response-linear teachers the
unique fixed point has the closed form

    theta_rat = (A + m * gamma * I)^-1 T(y),      A = T Kt_nm,

while training the student directly on the teacher's pseudo-responses T(y)
gives the soft-matching solution

    theta_sm = (Kt_mm + m * gamma * I)^-1 T(y).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.special

from .errors import DivergenceError, InputError, NumericalError
from .kernels import Dataset, GramSet
from .student import StudentConfig, StudentWeights, fitted_values, prox, source_values, spd_solve
from .teacher import TeacherOperator, TeacherSpec, apply_teacher, build_teacher

DEFAULT_ETA = 0.1
DIVERGENCE_FACTOR = 1e6
DENSE_TRACE_LIMIT = 10_000


# ---------------------------------------------------------------------------
# losses and residuals
# ---------------------------------------------------------------------------

class LeastSquares:
    """ell(z, y) = (1/2)(z - y)^2, residual z - y."""

    @staticmethod
    def residual(z: np.ndarray, y: np.ndarray) -> np.ndarray:
        return z - y


class Logistic:
    """ell(z, y) = log(1 + e^z) - y z for y in {0, 1}, residual sigmoid(z) - y."""

    @staticmethod
    def residual(z: np.ndarray, y: np.ndarray) -> np.ndarray:
        if not np.all((y == 0) | (y == 1)):
            raise InputError("logistic responses must lie in {0, 1}")
        return scipy.special.expit(z) - y


LossModel = LeastSquares | Logistic


def residuals(loss: LossModel, predictions: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pointwise loss derivative e_i at (prediction_i, y_i)."""
    predictions = np.asarray(predictions, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if predictions.size != y.size:
        raise InputError(f"{predictions.size} predictions vs {y.size} responses")
    return loss.residual(predictions, y)


def grad_hat(teacher: TeacherSpec | TeacherOperator, data: Dataset, loss: LossModel,
             weights: StudentWeights, gram: GramSet) -> np.ndarray:
    """Teacher-estimated gradient: regress source residuals, evaluate at targets."""
    op = teacher if isinstance(teacher, TeacherOperator) else build_teacher(teacher, data, gram)
    e = residuals(loss, source_values(weights, gram), data.source_y)
    return apply_teacher(op, e)


# ---------------------------------------------------------------------------
# iteration records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatRunConfig:
    """Picard run parameters; eta = None picks 1/L_hat from stability probes."""

    eta: float | None = None
    max_iter: int = 1000
    defect_tol: float = 1e-8
    init: StudentWeights | None = None

    def __post_init__(self):
        if self.eta is not None and self.eta <= 0:
            raise InputError(f"stepsize must be positive, got {self.eta}")
        if self.defect_tol <= 0:
            raise InputError(f"defect tolerance must be positive, got {self.defect_tol}")
        if self.max_iter < 1:
            raise InputError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class IterateTrace:
    """Per-iteration Picard records.

    Weights and fitted values are kept densely for the first
    DENSE_TRACE_LIMIT iterations; defect norms are always kept.
    """

    thetas: list = field(default_factory=list)
    fitted: list = field(default_factory=list)
    defect_norms: list = field(default_factory=list)

    def append(self, k: int, theta: np.ndarray, fitted_vec: np.ndarray, defect_norm: float):
        if k <= DENSE_TRACE_LIMIT:
            self.thetas.append(theta.copy())
            self.fitted.append(fitted_vec.copy())
        self.defect_norms.append(float(defect_norm))

    def __len__(self) -> int:
        return len(self.defect_norms)


@dataclass(frozen=True)
class Solution:
    """A solved instance: weights, how they were obtained, and the trace."""

    weights: StudentWeights
    method: str  # "rat_closed_form" | "rat_picard" | "sm_closed_form"
    converged: bool
    trace: IterateTrace | None = None


# ---------------------------------------------------------------------------
# Picard iteration
# ---------------------------------------------------------------------------

def q_norm(v: np.ndarray) -> float:
    """Empirical target norm (1/sqrt(m)) ||v||_2."""
    v = np.asarray(v, dtype=float).reshape(-1)
    return float(np.linalg.norm(v) / np.sqrt(v.size))


def picard_step(student_config: StudentConfig, gram: GramSet,
                teacher: TeacherSpec | TeacherOperator, data: Dataset, loss: LossModel,
                current: StudentWeights, eta: float) -> tuple[StudentWeights, float]:
    """One proximal update; returns the next weights and the defect norm.

    The defect norm is the empirical target norm of the displacement of the
    fitted values, (1/sqrt(m)) || Kt_mm (theta_next - theta) ||_2.
    """
    g = grad_hat(teacher, data, loss, current, gram)
    u = fitted_values(current, gram) - eta * g
    nxt = prox(student_config, gram, u, eta)
    dnorm = q_norm(fitted_values(nxt, gram) - fitted_values(current, gram))
    return nxt, dnorm


def defect(student_config: StudentConfig, gram: GramSet,
           teacher: TeacherSpec | TeacherOperator, data: Dataset, loss: LossModel,
           weights: StudentWeights, eta: float) -> tuple[np.ndarray, float]:
    """Proximal operator defect at ``weights``: fitted displacement and its norm."""
    nxt, dnorm = picard_step(student_config, gram, teacher, data, loss, weights, eta)
    vec = fitted_values(nxt, gram) - fitted_values(weights, gram)
    return vec, dnorm


def _auto_eta(student_config, gram, teacher, data, loss, init) -> float:
    """Default stepsize 1/L_hat from stability probes, else DEFAULT_ETA."""
    from .analysis import estimate_stability  # deferred: analysis imports solver

    est = estimate_stability(teacher, data, gram, loss, init, probes=16, seed=0)
    if est.l_hat is not None and np.isfinite(est.l_hat) and est.l_hat > 0:
        return 1.0 / est.l_hat
    return DEFAULT_ETA


def run_picard(run_config: RatRunConfig, student_config: StudentConfig, gram: GramSet,
               teacher: TeacherSpec | TeacherOperator, data: Dataset,
               loss: LossModel = LeastSquares()) -> Solution:
    """Iterate proximal updates until the defect norm falls below tolerance.

    Raises DivergenceError when the defect exceeds 1e6 times its initial
    value, the signature of a too-large stepsize.
    """
    op = teacher if isinstance(teacher, TeacherOperator) else build_teacher(teacher, data, gram)
    current = run_config.init or StudentWeights(np.zeros(gram.m))
    eta = run_config.eta
    if eta is None:
        eta = _auto_eta(student_config, gram, op, data, loss, current)

    trace = IterateTrace()
    initial_defect = None
    converged = False
    for k in range(run_config.max_iter):
        nxt, dnorm = picard_step(student_config, gram, op, data, loss, current, eta)
        trace.append(k, current.theta, fitted_values(current, gram), dnorm)
        if initial_defect is None:
            initial_defect = max(dnorm, 1e-300)
        if dnorm > DIVERGENCE_FACTOR * initial_defect:
            raise DivergenceError(
                f"defect grew to {dnorm:.3e} from {initial_defect:.3e}; stepsize {eta} too large"
            )
        current = nxt
        if dnorm < run_config.defect_tol:
            converged = True
            break
    # record the final iterate with its true defect
    _, dnorm = picard_step(student_config, gram, op, data, loss, current, eta)
    trace.append(len(trace), current.theta, fitted_values(current, gram), dnorm)
    return Solution(current, "rat_picard", converged, trace)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def rat_matrix(gram: GramSet, teacher: TeacherOperator) -> np.ndarray:
    """The m x m operator A = T Kt_nm of the fixed-point system."""
    return teacher.matrix @ gram.kt_nm


def rat_closed_form(gram: GramSet, teacher: TeacherOperator,
                    student_config: StudentConfig, y: np.ndarray) -> Solution:
    """Exact fixed point theta = (A + m gamma I)^-1 T(y).

    A is generally non-symmetric, so the solve uses LU with partial pivoting.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    m = gram.m
    system = rat_matrix(gram, teacher) + m * student_config.gamma * np.eye(m)
    try:
        lu = scipy.linalg.lu_factor(system)
        theta = scipy.linalg.lu_solve(lu, apply_teacher(teacher, y))
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"fixed-point system singular (condition estimate {np.linalg.cond(system):.3e})"
        ) from exc
    if not np.all(np.isfinite(theta)):
        raise NumericalError(
            f"fixed-point solve produced non-finite weights "
            f"(condition estimate {np.linalg.cond(system):.3e})"
        )
    return Solution(StudentWeights(theta), "rat_closed_form", True)


def sm_closed_form(gram: GramSet, teacher: TeacherOperator,
                   student_config: StudentConfig, y: np.ndarray) -> Solution:
    """Student KRR on the teacher's pseudo-responses: (Kt_mm + m gamma I)^-1 T(y)."""
    y = np.asarray(y, dtype=float).reshape(-1)
    m = gram.m
    system = gram.kt_mm + m * student_config.gamma * np.eye(m)
    theta = spd_solve(system, apply_teacher(teacher, y), "soft-matching solve")
    return Solution(StudentWeights(theta), "sm_closed_form", True)


def rat_solver(gram: GramSet, teacher: TeacherOperator, student_config: StudentConfig):
    """Prefactored y -> theta_rat map for repeated solves on one instance."""
    m = gram.m
    system = rat_matrix(gram, teacher) + m * student_config.gamma * np.eye(m)
    try:
        lu = scipy.linalg.lu_factor(system)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"fixed-point system singular (condition estimate {np.linalg.cond(system):.3e})"
        ) from exc
    t = teacher.matrix

    def solve(y: np.ndarray) -> StudentWeights:
        return StudentWeights(scipy.linalg.lu_solve(lu, t @ y))

    return solve


def sm_solver(gram: GramSet, teacher: TeacherOperator, student_config: StudentConfig):
    """Prefactored y -> theta_sm map for repeated solves on one instance."""
    m = gram.m
    system = gram.kt_mm + m * student_config.gamma * np.eye(m)
    try:
        cho = scipy.linalg.cho_factor(system, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError("soft-matching system not positive definite") from exc
    t = teacher.matrix

    def solve(y: np.ndarray) -> StudentWeights:
        return StudentWeights(scipy.linalg.cho_solve(cho, t @ y))

    return solve
