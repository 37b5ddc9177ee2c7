"""Shared fixtures: seeded random instances used across the test modules."""

import numpy as np

from ratsm import (Dataset, Gaussian, GramSet, ProblemInstance, StudentConfig,
                   build_gram, build_krr_teacher)
from ratsm.sampling import normal, rng_for


def worked_gram() -> GramSet:
    """The 1x1 instance with every kernel block equal to [2]."""
    two = np.array([[2.0]])
    return GramSet(two.copy(), two.copy(), two.copy(), two.copy())


def random_instance(seed, max_size=40, sigma=1.0, gamma_range=(0.01, 10.0),
                    lambda_range=(0.01, 10.0), well_specified=True):
    """A random same-kernel Gaussian instance (data, gram, teacher, config, instance).

    Teacher and student share the kernel, so A = T Kt_nm is symmetric PSD and
    the fixed-point theory applies cleanly.
    """
    rng = rng_for(seed)
    n = 5 + int((max_size - 5) * rng.random())
    m = 5 + int((max_size - 5) * rng.random())
    glo, ghi = np.log10(gamma_range[0]), np.log10(gamma_range[1])
    llo, lhi = np.log10(lambda_range[0]), np.log10(lambda_range[1])
    gamma = 10 ** (glo + (ghi - glo) * rng.random())
    lam = 10 ** (llo + (lhi - llo) * rng.random())
    kernel = Gaussian(0.5 + rng.random())
    xs = normal(rng, n)
    xt = normal(rng, m)
    theta_star = normal(rng, m)
    stub = Dataset(xs, np.zeros(n), xt)
    gram0 = build_gram(kernel, kernel, stub, check_psd=False)
    if well_specified:
        y = gram0.kt_nm @ theta_star + normal(rng, n, sigma)
    else:
        y = normal(rng, n)
    data = Dataset(xs, y, xt)
    gram = build_gram(kernel, kernel, data, check_psd=False)
    teacher = build_krr_teacher(gram, lam)
    config = StudentConfig(gamma, kernel)
    instance = ProblemInstance(dataset=data, sigma2=sigma**2, theta_star=theta_star)
    return data, gram, teacher, config, instance


def random_spd_gram(seed, m) -> GramSet:
    """A GramSet whose student block is a random well-conditioned SPD matrix."""
    rng = rng_for(seed)
    b = normal(rng, m * m).reshape(m, m)
    kt = b @ b.T / m + 0.5 * np.eye(m)
    return GramSet(np.eye(1), np.eye(1), kt, np.zeros((1, m)))
