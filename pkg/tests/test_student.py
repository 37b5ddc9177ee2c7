import numpy as np
import pytest

from ratsm import (GramSet, NumericalError, StudentConfig, StudentWeights, Gaussian,
                   fitted_values, hilbert_norm, predict, prox)
from ratsm.sampling import normal, rng_for

from helpers import random_spd_gram, worked_gram


def golden_section(f, lo, hi, tol=1e-12):
    """1-D minimizer, the independent oracle for the scalar prox."""
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - inv_phi * (b - a), a + inv_phi * (b - a)
    while abs(b - a) > tol:
        if f(c) < f(d):
            b, d = d, c
            c = b - inv_phi * (b - a)
        else:
            a, c = c, d
            d = a + inv_phi * (b - a)
    return 0.5 * (a + b)


def test_prox_unpenalized_interpolates():
    g = random_spd_gram(21, 6)
    u = normal(rng_for(22), 6)
    w = prox(StudentConfig(0.0), g, u, eta=1.0)
    np.testing.assert_allclose(fitted_values(w, g), u, atol=1e-9)


def test_prox_scalar_worked_example():
    g = worked_gram()
    w = prox(StudentConfig(1.0), g, [4.0], eta=1.0)
    assert w.theta[0] == pytest.approx(4.0 / 3.0, abs=1e-14)
    assert fitted_values(w, g)[0] == pytest.approx(8.0 / 3.0, abs=1e-13)
    # golden-section oracle on the prox objective over theta
    obj = lambda th: 0.5 * (4.0 - 2.0 * th) ** 2 + 0.5 * 1.0 * (2.0 * th * th)
    assert golden_section(obj, -10, 10) == pytest.approx(4.0 / 3.0, abs=1e-9)


def test_prox_zero_input_gives_zero():
    g = random_spd_gram(23, 5)
    w = prox(StudentConfig(2.0), g, np.zeros(5), eta=0.7)
    np.testing.assert_allclose(w.theta, 0.0, atol=0)


def test_prox_optimality_against_perturbations():
    rng = rng_for(24)
    g = random_spd_gram(25, 7)
    u = normal(rng, 7)
    gamma, eta, m = 0.8, 0.6, 7

    def objective(theta):
        fit = g.kt_mm @ theta
        return (0.5 / eta) * np.sum((u - fit) ** 2) + \
            0.5 * gamma * m * float(theta @ (g.kt_mm @ theta))

    star = prox(StudentConfig(gamma), g, u, eta).theta
    base = objective(star)
    for _ in range(50):
        delta = normal(rng, 7)
        delta *= (1e-3 * np.linalg.norm(star) + 1e-6) / np.linalg.norm(delta)
        assert objective(star + delta) >= base - 1e-12


def test_prox_firm_nonexpansiveness():
    rng = rng_for(26)
    checked = 0
    for block in range(10):
        g = random_spd_gram(260 + block, 8)
        cfg = StudentConfig(10 ** (-1 + 2 * rng.random()))
        eta = 0.2 + rng.random()
        for _ in range(20):
            u, v = normal(rng, 8), normal(rng, 8)
            pu = fitted_values(prox(cfg, g, u, eta), g)
            pv = fitted_values(prox(cfg, g, v, eta), g)
            lhs = float(np.sum((pu - pv) ** 2))
            rhs = float((u - v) @ (pu - pv))
            assert lhs <= rhs + 1e-9
            checked += 1
    assert checked == 200


def test_prox_monotone_shrinkage_in_gamma():
    g = random_spd_gram(27, 6)
    u = normal(rng_for(28), 6)
    norms = [np.linalg.norm(fitted_values(prox(StudentConfig(gam), g, u, 0.5), g))
             for gam in (0.01, 0.1, 1.0, 10.0)]
    assert all(b <= a + 1e-12 for a, b in zip(norms, norms[1:]))


def test_predict_zero_weights():
    w = StudentWeights(np.zeros(4))
    out = predict(w, Gaussian(1.0), np.arange(4.0), np.linspace(-1, 1, 6))
    np.testing.assert_allclose(out, 0.0, atol=0)


def test_predict_at_target_points_matches_fitted():
    rng = rng_for(29)
    target = normal(rng, 5)
    theta = normal(rng, 5)
    kern = Gaussian(0.9)
    from ratsm import Dataset, build_gram
    g = build_gram(kern, kern, Dataset([0.0], [0.0], target))
    w = StudentWeights(theta)
    np.testing.assert_allclose(predict(w, kern, target, target),
                               fitted_values(w, g), atol=1e-12)


def test_predict_scalar_worked_example():
    # one target point with kernel value 2 at the query: prediction 12/7
    from ratsm import DiagonalMap, FeatureLinear, eval_kernel
    spec = FeatureLinear(DiagonalMap(1.0, 1.0, 2))
    assert eval_kernel(spec, 1.0, -1.0) == pytest.approx(2.0, abs=1e-15)
    w = StudentWeights([6.0 / 7.0])
    out = predict(w, spec, target_x=[-1.0], query_points=[1.0])
    assert out[0] == pytest.approx(12.0 / 7.0, abs=1e-14)


def test_hilbert_norm_values():
    g = worked_gram()
    assert hilbert_norm(StudentWeights([0.0]), g) == 0.0
    g4 = GramSet(np.eye(1), np.eye(1), np.array([[4.0]]), np.zeros((1, 1)))
    assert hilbert_norm(StudentWeights([0.5]), g4) == pytest.approx(1.0, abs=1e-15)
    gi = GramSet(np.eye(1), np.eye(1), np.eye(3), np.zeros((1, 3)))
    theta = np.array([3.0, 4.0, 0.0])
    assert hilbert_norm(StudentWeights(theta), gi) == pytest.approx(5.0, abs=1e-14)


def test_hilbert_norm_rejects_indefinite_gram():
    g = GramSet(np.eye(1), np.eye(1), np.array([[-1.0]]), np.zeros((1, 1)))
    with pytest.raises(NumericalError):
        hilbert_norm(StudentWeights([1.0]), g)
