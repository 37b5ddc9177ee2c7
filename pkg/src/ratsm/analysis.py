"""Exact MSE decompositions, feature-space forms, and inequality checkers.

For a response-linear teacher T, student Gram Kt_mm, A = T Kt_nm and
B_gamma = Kt_mm + m*gamma*I, the exact mean-squared errors over the noise
are

    mse_rat = (1/m) ||m*gamma*Kt_mm (A + m*gamma*I)^-1 theta*||^2
              + (sigma^2/m) ||Kt_mm (A + m*gamma*I)^-1 T||_F^2
    mse_sm  = (1/m) ||Kt_mm (I - B_gamma^-1 A) theta*||^2
              + (sigma^2/m) ||Kt_mm B_gamma^-1 T||_F^2

and the soft-matching bias vector splits exactly into a distribution-shift
part (Kt_mm - A) theta* and a ridge part m*gamma*B_gamma^-1 A theta*.

For feature-linear kernels k(x, y) = phi(x)^T phi(y) the same quantities can
be pushed through to the empirical second moments (Sigma, SigmaTil) and the
feature-space truth v* = Phit^T theta*; those forms cost O(D^3) instead of
O(max(m, n)^3) and are what the benchmark uses at large sample sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InputError, NumericalError
from .kernels import Dataset, GramSet, SecondMoments
from .solver import IterateTrace, LossModel, Solution, q_norm, rat_matrix, residuals
from .student import StudentConfig, StudentWeights, hilbert_norm, spd_solve
from .teacher import TeacherOperator, TeacherSpec, apply_teacher, build_teacher
from .sampling import normal, rng_for


# ---------------------------------------------------------------------------
# problem instances and reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemInstance:
    """A synthetic regression instance with known ground truth.

    Exactly one of ``theta_star`` (representer form over the target points)
    or ``v_star`` (feature-space weights, with optional radius bound) must be
    given.  ``g_star_source`` holds an optional mis-specification component
    evaluated at the source points; it shifts the response means.
    """

    dataset: Dataset
    sigma2: float
    theta_star: np.ndarray | None = None
    v_star: np.ndarray | None = None
    radius: float | None = None
    g_star_source: np.ndarray | None = None

    def __post_init__(self):
        if (self.theta_star is None) == (self.v_star is None):
            raise InputError("exactly one of theta_star / v_star must be given")
        if self.sigma2 < 0:
            raise InputError(f"noise variance must be >= 0, got {self.sigma2}")
        if self.theta_star is not None:
            t = np.asarray(self.theta_star, dtype=float).reshape(-1)
            if t.size != self.dataset.m:
                raise InputError(f"theta_star has length {t.size}, expected {self.dataset.m}")
            object.__setattr__(self, "theta_star", t)
        if self.v_star is not None:
            v = np.asarray(self.v_star, dtype=float).reshape(-1)
            if self.radius is not None and np.linalg.norm(v) > self.radius * (1 + 1e-12):
                raise InputError("||v_star|| exceeds the stated radius")
            object.__setattr__(self, "v_star", v)


@dataclass(frozen=True)
class MseReport:
    bias_sq: float
    variance: float
    total: float
    method: str


@dataclass(frozen=True)
class BiasSplit:
    """Exact split of the soft-matching bias vector into shift + ridge parts."""

    shift: np.ndarray
    ridge: np.ndarray
    total: np.ndarray


@dataclass(frozen=True)
class StabilityEstimate:
    """Empirical co-coercivity / monotonicity constants of the gradient map."""

    l_hat: float | None
    mu_hat: float
    epsilon: float
    n_pairs: int


@dataclass(frozen=True)
class NoiseDiagnostics:
    """Covariance (n/m) T T^T of the teacher-transformed noise, with its norm."""

    covariance: np.ndarray
    opnorm: float


@dataclass(frozen=True)
class BoundReport:
    lhs: float
    rhs: float
    slack: float
    passed: bool


@dataclass(frozen=True)
class DecayReport:
    min_defect_sq: float
    weak_bound: float
    weak_ok: bool
    geo_defect_sq: float | None
    geo_bound: float | None
    geo_ok: bool | None
    max_contraction_ratio: float | None


# ---------------------------------------------------------------------------
# exact kernel-space MSEs
# ---------------------------------------------------------------------------

def _lu_solve_or_raise(system: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    try:
        out = scipy.linalg.lu_solve(scipy.linalg.lu_factor(system), rhs)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"{what}: singular system (condition estimate {np.linalg.cond(system):.3e})"
        ) from exc
    if not np.all(np.isfinite(out)):
        raise NumericalError(
            f"{what}: non-finite solve (condition estimate {np.linalg.cond(system):.3e})"
        )
    return out


def exact_mse_rat(gram: GramSet, teacher: TeacherOperator, config: StudentConfig,
                  instance: ProblemInstance) -> MseReport:
    """Exact bias^2/variance of the residual-corrected estimate."""
    theta_star = instance.theta_star
    if theta_star is None:
        raise InputError("exact_mse_rat needs a representer-form ground truth")
    m = gram.m
    system = rat_matrix(gram, teacher) + m * config.gamma * np.eye(m)
    bias_vec = m * config.gamma * (gram.kt_mm @ _lu_solve_or_raise(system, theta_star, "rat bias"))
    bias_sq = float(bias_vec @ bias_vec) / m
    x = _lu_solve_or_raise(system, teacher.matrix, "rat variance")
    variance = instance.sigma2 / m * float(np.linalg.norm(gram.kt_mm @ x) ** 2)
    return MseReport(bias_sq, variance, bias_sq + variance, "rat")


def exact_mse_sm(gram: GramSet, teacher: TeacherOperator, config: StudentConfig,
                 instance: ProblemInstance) -> tuple[MseReport, BiasSplit]:
    """Exact bias^2/variance of soft matching, with the shift/ridge bias split."""
    theta_star = instance.theta_star
    if theta_star is None:
        raise InputError("exact_mse_sm needs a representer-form ground truth")
    m = gram.m
    a_op = rat_matrix(gram, teacher)
    b_gamma = gram.kt_mm + m * config.gamma * np.eye(m)
    a_theta = a_op @ theta_star
    binv_a_theta = spd_solve(b_gamma, a_theta, "sm bias")
    shift = gram.kt_mm @ theta_star - a_theta
    ridge = m * config.gamma * binv_a_theta
    total = gram.kt_mm @ (theta_star - binv_a_theta)
    bias_sq = float(total @ total) / m
    x = spd_solve(b_gamma, teacher.matrix, "sm variance")
    variance = instance.sigma2 / m * float(np.linalg.norm(gram.kt_mm @ x) ** 2)
    return MseReport(bias_sq, variance, bias_sq + variance, "sm"), BiasSplit(shift, ridge, total)


def monte_carlo_mse(solve, gram: GramSet, instance: ProblemInstance,
                    trials: int, seed: int) -> tuple[float, float]:
    """Empirical MSE over fresh noise draws; the oracle for the exact formulas.

    ``solve`` maps a response vector y to StudentWeights.  Trial t draws
    w ~ N(0, sigma^2 I) from the (seed, t) stream, forms
    y = Kt_nm theta* (+ g*) + w, solves, and scores
    (1/m) ||fitted - f*(xt)||^2.  Returns (mean, standard error).
    """
    if trials < 2:
        raise InputError(f"need at least 2 trials, got {trials}")
    theta_star = instance.theta_star
    if theta_star is None:
        raise InputError("monte_carlo_mse needs a representer-form ground truth")
    mean_y = gram.kt_nm @ theta_star
    if instance.g_star_source is not None:
        mean_y = mean_y + np.asarray(instance.g_star_source, dtype=float).reshape(-1)
    f_star = gram.kt_mm @ theta_star
    sigma = float(np.sqrt(instance.sigma2))
    n, m = gram.n, gram.m
    errs = np.empty(trials)
    for t in range(trials):
        w = normal(rng_for(seed, t), n, sigma)
        weights = solve(mean_y + w)
        diff = gram.kt_mm @ weights.theta - f_star
        errs[t] = float(diff @ diff) / m
    stderr = float(np.std(errs, ddof=1) / np.sqrt(trials))
    return float(np.mean(errs)), stderr


# ---------------------------------------------------------------------------
# feature-space forms (push-through of the kernel formulas)
# ---------------------------------------------------------------------------

def _feature_rat_mse(sigma: np.ndarray, sigma_til: np.ndarray, lam: float, gamma: float,
                     v_star: np.ndarray, sigma2: float, n: int) -> tuple[float, float]:
    """General dense evaluation of the feature-space bias^2/variance for RaT."""
    d = sigma.shape[0]
    s_lam = sigma + lam * np.eye(d)
    ss = _lu_solve_or_raise(s_lam, sigma, "rat feature").T  # Sigma Sigma_lam^-1
    m_op = sigma_til @ ss + gamma * np.eye(d)
    if gamma == 0:
        bias_sq = 0.0
    else:
        z = _lu_solve_or_raise(m_op, v_star, "rat feature bias")
        bias_sq = gamma**2 * float(z @ (sigma_til @ z))
    if sigma2 == 0:
        return bias_sq, 0.0
    # (sigma2/n) Tr(Sigma Sigma_lam^-1 . SigmaTil M^-T . SigmaTil . M^-1 SigmaTil Sigma_lam^-1)
    p = _lu_solve_or_raise(s_lam, sigma_til, "rat feature variance").T  # SigmaTil Sigma_lam^-1
    w = _lu_solve_or_raise(m_op, p, "rat feature variance")
    q = _lu_solve_or_raise(m_op, sigma_til, "rat feature variance")
    variance = sigma2 / n * float(np.trace(ss @ q.T @ sigma_til @ w))
    return bias_sq, variance


def _feature_sm_mse(sigma: np.ndarray, sigma_til: np.ndarray, lam: float, gamma: float,
                    v_star: np.ndarray, sigma2: float, n: int) -> tuple[float, float, np.ndarray, np.ndarray]:
    """General dense feature-space bias^2/variance for soft matching.

    Also returns the shift and ridge components of the bias image
    (lam Sigma_lam^-1 v*, gamma SigmaTil_gamma^-1 Sigma Sigma_lam^-1 v*).
    """
    d = sigma.shape[0]
    s_lam = sigma + lam * np.eye(d)
    st_gam = sigma_til + gamma * np.eye(d)
    ss_v = sigma @ _lu_solve_or_raise(s_lam, v_star, "sm feature bias")
    shift_w = v_star - ss_v  # = lam Sigma_lam^-1 v*
    ridge_w = gamma * _lu_solve_or_raise(st_gam, ss_v, "sm feature bias") if gamma else 0.0 * ss_v
    w = shift_w + ridge_w
    bias_sq = float(w @ (sigma_til @ w))
    if sigma2 == 0:
        return bias_sq, 0.0, shift_w, ridge_w
    # (sigma2/n) Tr(Sigma Sigma_lam^-1 . SigmaTil SigmaTil_gam^-1 .
    #               SigmaTil SigmaTil_gam^-1 . SigmaTil Sigma_lam^-1)
    ss = _lu_solve_or_raise(s_lam, sigma, "sm feature variance").T
    p = _lu_solve_or_raise(s_lam, sigma_til, "sm feature variance").T
    r = _lu_solve_or_raise(st_gam, sigma_til, "sm feature variance")
    variance = sigma2 / n * float(np.trace(ss @ r.T @ r.T @ p))
    return bias_sq, variance, shift_w, ridge_w


def _diag_rat_mse(mu: np.ndarray, mut: np.ndarray, lam: float, gamma: float,
                  v_star: np.ndarray, sigma2: float, n: int) -> tuple[float, float]:
    """Diagonal-moments evaluation of the RaT feature MSE (O(D))."""
    a = mut * mu / (mu + lam)
    denom = a + gamma
    bias_sq = float(np.sum(gamma**2 * mut * v_star**2 / denom**2))
    variance = sigma2 / n * float(np.sum(mut**3 * mu / ((mu + lam) ** 2 * denom**2)))
    return bias_sq, variance


def _diag_sm_mse(mu: np.ndarray, mut: np.ndarray, lam: float, gamma: float,
                 v_star: np.ndarray, sigma2: float, n: int) -> tuple[float, float]:
    """Diagonal-moments evaluation of the soft-matching feature MSE (O(D))."""
    w = (lam * mut + gamma * mu + gamma * lam) / ((mut + gamma) * (mu + lam)) * v_star
    bias_sq = float(np.sum(mut * w**2))
    variance = sigma2 / n * float(np.sum(mu * mut**3 / ((mu + lam) ** 2 * (mut + gamma) ** 2)))
    return bias_sq, variance


def _require_commuting(moments: SecondMoments, what: str) -> None:
    if not moments.shared_eigenbasis:
        raise InputError(
            f"{what} requires commuting second moments "
            f"(commutator norm {moments.commutator_norm:.3e})"
        )


def feature_mse_rat(moments: SecondMoments, lam: float, gamma: float, v_star: np.ndarray,
                    sigma2: float, n: int) -> MseReport:
    """Feature-space exact MSE of RaT for commuting second moments."""
    _require_commuting(moments, "feature_mse_rat")
    v_star = np.asarray(v_star, dtype=float).reshape(-1)
    bias_sq, variance = _feature_rat_mse(moments.sigma, moments.sigma_til,
                                         lam, gamma, v_star, sigma2, n)
    return MseReport(bias_sq, variance, bias_sq + variance, "rat")


def feature_mse_sm(moments: SecondMoments, lam: float, gamma: float, v_star: np.ndarray,
                   sigma2: float, n: int) -> MseReport:
    """Feature-space exact MSE of soft matching for commuting second moments."""
    _require_commuting(moments, "feature_mse_sm")
    v_star = np.asarray(v_star, dtype=float).reshape(-1)
    bias_sq, variance, _, _ = _feature_sm_mse(moments.sigma, moments.sigma_til,
                                              lam, gamma, v_star, sigma2, n)
    return MseReport(bias_sq, variance, bias_sq + variance, "sm")


def feature_bias_sm(moments: SecondMoments, lam: float, gamma: float,
                    v_star: np.ndarray) -> float:
    """Feature-space soft-matching squared bias for commuting second moments."""
    _require_commuting(moments, "feature_bias_sm")
    v_star = np.asarray(v_star, dtype=float).reshape(-1)
    bias_sq, _, _, _ = _feature_sm_mse(moments.sigma, moments.sigma_til,
                                       lam, gamma, v_star, 0.0, 1)
    return bias_sq


# ---------------------------------------------------------------------------
# spectra and tuning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigendecayFit:
    alpha: float
    residual: float
    n_used: int


def fit_eigendecay(spectrum: np.ndarray) -> EigendecayFit:
    """Least-squares exponent of sigma_j ~ j^(-2 alpha) on a log-log scale.

    Eigenvalues below 1e-12 of the largest, and the last 10% of indices
    (where float noise dominates), are discarded before fitting.
    """
    s = np.sort(np.asarray(spectrum, dtype=float).reshape(-1))[::-1]
    if s.size == 0 or s[0] <= 0:
        raise InputError("spectrum must contain positive eigenvalues")
    keep = s.size - s.size // 10
    s = s[:keep]
    s = s[s > 1e-12 * s[0]]
    if s.size < 4:
        raise InputError(f"need at least 4 usable eigenvalues, got {s.size}")
    lj = np.log(np.arange(1, s.size + 1, dtype=float))
    ls = np.log(s)
    slope, intercept = np.polyfit(lj, ls, 1)
    resid = float(np.sqrt(np.mean((ls - (slope * lj + intercept)) ** 2)))
    return EigendecayFit(alpha=float(-slope / 2.0), residual=resid, n_used=s.size)


def optimal_gamma(lam: float, sigma2: float, radius: float, n: int,
                  alpha: float, beta: float) -> float:
    """Rate-optimal student regularization (1/lam) (sigma^2/(R^2 n))^(2(a+b)/(2a+1))."""
    if lam <= 0 or sigma2 <= 0 or radius <= 0 or n < 1:
        raise InputError("lam, sigma2, radius must be positive and n >= 1")
    if alpha <= 0.5 or not (0.5 < beta < 0.5 + alpha):
        raise InputError(f"need alpha > 1/2 and beta in (1/2, 1/2 + alpha), got ({alpha}, {beta})")
    expo = 2.0 * (alpha + beta) / (2.0 * alpha + 1.0)
    return (sigma2 / (radius**2 * n)) ** expo / lam


# ---------------------------------------------------------------------------
# inequality checkers
# ---------------------------------------------------------------------------

def oracle_weights(gram: GramSet, config: StudentConfig, theta_star: np.ndarray) -> StudentWeights:
    """The noiseless penalized fit (Kt_mm + m gamma I)^-1 Kt_mm theta*."""
    m = gram.m
    system = gram.kt_mm + m * config.gamma * np.eye(m)
    return StudentWeights(spd_solve(system, gram.kt_mm @ theta_star, "oracle fit"))


def check_estimation_bound(solution: Solution, gram: GramSet, teacher: TeacherOperator,
                     config: StudentConfig, instance: ProblemInstance,
                     slack_tol: float = 1e-9) -> BoundReport:
    """Estimation-error bound at a fixed point, against the noiseless oracle fit.

    For least squares the bound reads
    ||fhat - fdag||_Q^2 <= <fhat - fdag, oracle_grad(fhat) - est_grad(fhat)>_Q
    with the estimated gradient T(fhat(x) - y) for the residual-corrected
    solution and fhat(xt) - T(y) for the soft-matching one.
    """
    theta_star = instance.theta_star
    if theta_star is None:
        raise InputError("check_estimation_bound needs a representer-form ground truth")
    m = gram.m
    theta_dag = oracle_weights(gram, config, theta_star).theta
    fhat_t = gram.kt_mm @ solution.weights.theta
    diff = fhat_t - gram.kt_mm @ theta_dag
    oracle_grad = fhat_t - gram.kt_mm @ theta_star
    y = instance.dataset.source_y
    if solution.method.startswith("sm"):
        est_grad = fhat_t - apply_teacher(teacher, y)
    else:
        est_grad = apply_teacher(teacher, gram.kt_nm @ solution.weights.theta - y)
    lhs = float(diff @ diff) / m
    rhs = float(diff @ (oracle_grad - est_grad)) / m
    slack = rhs - lhs
    return BoundReport(lhs, rhs, slack, slack >= -slack_tol)


def estimate_stability(teacher: TeacherSpec | TeacherOperator, data: Dataset, gram: GramSet,
                       loss: LossModel, anchor: StudentWeights, probes: int,
                       seed: int) -> StabilityEstimate:
    """Empirical co-coercivity/monotonicity constants of the gradient map.

    Probes are drawn uniformly in a Hilbert ball of radius
    2 ||anchor||_H + 1 around the anchor; the tightest constants satisfying
    the two inequalities over all probe pairs are reported, with epsilon the
    residual slack at those constants (zero for an exactly linear map).
    """
    if probes < 10:
        raise InputError(f"need at least 10 probes, got {probes}")
    op = teacher if isinstance(teacher, TeacherOperator) else build_teacher(teacher, data, gram)
    m = gram.m
    rng = rng_for(seed, 0xfeedbeef)
    radius = 2.0 * hilbert_norm(anchor, gram) + 1.0

    evals, evecs = np.linalg.eigh(gram.kt_mm)
    keep = evals > 1e-12 * max(evals[-1], 1e-300)
    evals, evecs = evals[keep], evecs[:, keep]
    rank = int(evals.size)
    if rank == 0:
        raise NumericalError("student Gram is numerically zero; no probe directions")

    thetas = [anchor.theta]
    for _ in range(probes):
        direction = normal(rng, rank)
        direction /= max(np.linalg.norm(direction), 1e-300)
        scale = radius * rng.random() ** (1.0 / rank)
        thetas.append(anchor.theta + evecs @ (scale * direction / np.sqrt(evals)))

    fvals = [gram.kt_mm @ t for t in thetas]
    gvals = [apply_teacher(op, residuals(loss, gram.kt_nm @ t, data.source_y)) for t in thetas]

    inners, dists, grads = [], [], []
    for i in range(len(thetas)):
        for j in range(i + 1, len(thetas)):
            dv = fvals[i] - fvals[j]
            dg = gvals[i] - gvals[j]
            dist_sq = float(dv @ dv) / m
            if dist_sq <= 1e-300:
                continue
            inners.append(float(dv @ dg) / m)
            dists.append(dist_sq)
            grads.append(float(dg @ dg) / m)
    inners, dists, grads = map(np.asarray, (inners, dists, grads))

    mu_hat = float(np.min(inners / dists))
    if np.all(grads <= 1e-30):
        # constant gradient map: any L works with zero slack
        return StabilityEstimate(1.0, mu_hat, 0.0, len(dists))
    pos = inners > 0
    if not np.any(pos & (grads > 0)):
        return StabilityEstimate(None, mu_hat, float(np.sqrt(np.max(grads))), len(dists))
    l_hat = float(np.max(grads[pos] / inners[pos]))
    eps_co = max(0.0, float(np.max(grads - l_hat * inners)))
    eps_mono = max(0.0, float(np.max(dists - inners / mu_hat))) if mu_hat > 0 else 0.0
    return StabilityEstimate(l_hat, mu_hat, float(np.sqrt(max(eps_co, eps_mono))), len(dists))


def check_defect_decay(trace: IterateTrace, stability: StabilityEstimate,
                     fhat_fitted: np.ndarray | None = None) -> DecayReport:
    """Check the Picard defect-decay bounds against a recorded trace.

    The converged iterate stands in for the fixed point.  The min-defect
    bound needs a trace generated with stepsize 1/L_hat; the geometric bound
    additionally needs mu_hat > 0 and stepsize mu_hat/L_hat^2.
    """
    if len(trace) < 3:
        raise InputError(f"trace must have at least 3 iterations, got {len(trace)}")
    if stability.l_hat is None or stability.l_hat <= 0:
        raise InputError("stability estimate lacks a usable co-coercivity constant")
    fhat = trace.fitted[-1] if fhat_fitted is None else np.asarray(fhat_fitted, dtype=float)
    dist_sq = [q_norm(f - fhat) ** 2 for f in trace.fitted]
    kmax = len(trace) - 1
    eps_term = 4.0 * stability.epsilon**2 / stability.l_hat**2
    min_defect_sq = float(np.min(np.square(trace.defect_norms)))
    weak_bound = 2.0 / (kmax + 1) * dist_sq[0] + eps_term
    weak_ok = min_defect_sq <= weak_bound + 1e-12

    geo_defect_sq = geo_bound = geo_ok = max_ratio = None
    if stability.mu_hat > 0:
        contract = 1.0 - stability.mu_hat**2 / stability.l_hat**2
        geo_defect_sq = float(trace.defect_norms[kmax] ** 2)
        geo_bound = 2.0 * contract**kmax * dist_sq[0] + 8.0 * stability.epsilon**2
        geo_ok = geo_defect_sq <= geo_bound + 1e-12
        ratios = [dist_sq[k + 1] / dist_sq[k] for k in range(kmax) if dist_sq[k] > 1e-250]
        max_ratio = float(np.max(ratios)) if ratios else 0.0
    return DecayReport(min_defect_sq, weak_bound, weak_ok,
                       geo_defect_sq, geo_bound, geo_ok, max_ratio)


def noise_covariance(teacher: TeacherOperator) -> NoiseDiagnostics:
    """Covariance (n/m) T T^T of teacher-transformed unit noise, and its norm."""
    c = teacher.n / teacher.m * (teacher.matrix @ teacher.matrix.T)
    c = 0.5 * (c + c.T)
    opnorm = float(max(np.linalg.eigvalsh(c)[-1], 0.0))
    return NoiseDiagnostics(c, opnorm)
