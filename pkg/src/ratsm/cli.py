"""Command-line interface: solve, mse, sweep, diagnose.

Exit codes: 0 success, 1 config error, 2 numerical failure (in all cells for
a sweep), 3 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import analysis, bench, svgplot
from .errors import ConfigError, InputError, NumericalError
from .kernels import build_gram, second_moments
from .solver import LeastSquares, RatRunConfig, rat_closed_form, rat_solver, run_picard, \
    sm_closed_form, sm_solver
from .student import StudentConfig, StudentWeights
from .teacher import build_krr_teacher


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="TOML config file")
    p.add_argument("--preset", choices=bench.PRESETS, help="problem preset")
    p.add_argument("--seed", type=int, help="master seed (u64)")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--trials", type=int, help="trials per grid cell (sweep) or "
                                              "noise draws (mse)")
    p.add_argument("--threads", type=int, help="worker threads for the sweep")
    p.add_argument("--emit-svg", action="store_true", default=None,
                   help="also write an SVG rate plot")
    p.add_argument("--n", type=int, default=64, help="source sample size for "
                                                     "solve/mse/diagnose (default 64)")


def _build_config(args) -> bench.ExperimentConfig:
    overrides = {}
    for key, attr in (("seed", "seed"), ("trials", "trials"), ("threads", "threads"),
                      ("out_dir", "out"), ("emit_svg", "emit_svg")):
        val = getattr(args, attr, None)
        if val is not None:
            overrides[key] = val
    if args.config:
        return bench.load_config(args.config, preset=args.preset, **overrides)
    if not args.preset:
        raise ConfigError("either --config or --preset is required")
    return bench.make_config(args.preset, **overrides)


def _instance(config, n):
    m = config.m_for(n)
    sample = bench.sample_dataset(config, n, m, seed=(config.seed, 0, 0))
    gram = build_gram(sample.teacher_kernel, sample.student_kernel, sample.dataset,
                      check_psd=False)
    teacher = build_krr_teacher(gram, config.teacher_lambda)
    if config.gamma_policy == "optimal":
        gamma = analysis.optimal_gamma(config.teacher_lambda, config.sigma**2,
                                       config.radius, n, config.alpha, config.beta)
    else:
        gamma = config.gamma
    student = StudentConfig(gamma, sample.student_kernel)
    instance = analysis.ProblemInstance(dataset=sample.dataset, sigma2=config.sigma**2,
                                        theta_star=sample.theta_star)
    return sample, gram, teacher, student, instance


def cmd_solve(args) -> int:
    config = _build_config(args)
    sample, gram, teacher, student, instance = _instance(config, args.n)
    y = sample.dataset.source_y
    rat = rat_closed_form(gram, teacher, student, y)
    sm = sm_closed_form(gram, teacher, student, y)
    mse_rat = analysis.exact_mse_rat(gram, teacher, student, instance)
    mse_sm, _ = analysis.exact_mse_sm(gram, teacher, student, instance)
    np.set_printoptions(precision=6, suppress=False, threshold=12)
    print(f"preset={config.preset} n={gram.n} m={gram.m} "
          f"lambda={config.teacher_lambda} gamma={student.gamma}")
    print(f"theta_rat = {rat.weights.theta}")
    print(f"theta_sm  = {sm.weights.theta}")
    print(f"exact RAT mse = {mse_rat.total:.6e} (bias^2 {mse_rat.bias_sq:.3e}, "
          f"var {mse_rat.variance:.3e})")
    print(f"exact SM  mse = {mse_sm.total:.6e} (bias^2 {mse_sm.bias_sq:.3e}, "
          f"var {mse_sm.variance:.3e})")
    return 0


def cmd_mse(args) -> int:
    config = _build_config(args)
    draws = args.trials if args.trials else 2000
    _, gram, teacher, student, instance = _instance(config, args.n)
    exact_rat = analysis.exact_mse_rat(gram, teacher, student, instance)
    exact_sm, _ = analysis.exact_mse_sm(gram, teacher, student, instance)
    failures = 0
    for name, exact, solver in (("RAT", exact_rat, rat_solver(gram, teacher, student)),
                                ("SM", exact_sm, sm_solver(gram, teacher, student))):
        mean, se = analysis.monte_carlo_mse(solver, gram, instance, draws, config.seed)
        z = abs(mean - exact.total) / se if se > 0 else 0.0
        print(f"{name}: exact {exact.total:.6e}   monte-carlo {mean:.6e} +- {se:.1e} "
              f"({draws} draws, {z:.2f} standard errors apart)")
        failures += z > 4
    return 2 if failures else 0


def cmd_sweep(args) -> int:
    config = _build_config(args)
    records = bench.run_experiment(config)
    valid = [r for r in records if not r.error]
    os.makedirs(config.out_dir, exist_ok=True)
    csv_path = os.path.join(config.out_dir, f"sweep_{config.preset}.csv")
    bench.emit_csv(records, csv_path)
    print(f"wrote {len(records)} rows ({len(records) - len(valid)} errored) to {csv_path}")
    if not valid:
        print("all cells failed numerically", file=sys.stderr)
        return 2
    alpha_hat, beta_hat = _spectra_exponents(config)
    fits = bench.fit_rates(records, alpha_hat, beta_hat)
    for fit in fits.values():
        pred = f" (predicted {fit.predicted_exponent:+.3f})" if fit.predicted_exponent else ""
        print(f"{fit.method}: slope {fit.slope:+.3f}{pred}  R^2 {fit.r_squared:.3f}  "
              f"plateau ratio {fit.plateau_ratio:.3f}")
    if config.emit_svg:
        svg_path = os.path.join(config.out_dir, f"sweep_{config.preset}.svg")
        svgplot.emit_svg_plot(bench.cell_medians(records), fits, svg_path,
                              title=f"{config.preset}: median MSE vs n")
        print(f"wrote {svg_path}")
    return 0


def _spectra_exponents(config, n_cap: int = 1024):
    """(alpha_hat, beta_hat) fitted from the largest affordable cell's spectra."""
    n = max(v for v in config.n_grid if v <= n_cap) if min(config.n_grid) <= n_cap \
        else min(config.n_grid)
    m = config.m_for(n)
    sample = bench.sample_dataset(config, n, m, seed=(config.seed, 0, 0))
    try:
        if sample.fmap is not None:
            mom = second_moments(sample.fmap, sample.dataset)
            alpha = analysis.fit_eigendecay(np.linalg.eigvalsh(mom.sigma)[::-1]).alpha
            beta = analysis.fit_eigendecay(np.linalg.eigvalsh(mom.sigma_til)[::-1]).alpha
        else:
            gram = build_gram(sample.teacher_kernel, sample.student_kernel, sample.dataset,
                              check_psd=False)
            alpha = analysis.fit_eigendecay(np.linalg.eigvalsh(gram.k_nn)[::-1]).alpha
            beta = analysis.fit_eigendecay(np.linalg.eigvalsh(gram.kt_mm)[::-1]).alpha
        return alpha, beta
    except (InputError, NumericalError):
        return None, None


def cmd_diagnose(args) -> int:
    config = _build_config(args)
    sample, gram, teacher, student, instance = _instance(config, args.n)
    alpha_hat, beta_hat = _spectra_exponents(config, n_cap=args.n)
    if alpha_hat is not None:
        print(f"eigendecay: alpha_hat {alpha_hat:.4f} (source), beta_hat {beta_hat:.4f} (target)")
    diag = analysis.noise_covariance(teacher)
    print(f"teacher noise covariance opnorm: {diag.opnorm:.6e}")
    est = analysis.estimate_stability(teacher, sample.dataset, gram, LeastSquares(),
                                      StudentWeights(np.zeros(gram.m)), probes=16,
                                      seed=config.seed)
    lhat = "n/a" if est.l_hat is None else f"{est.l_hat:.6e}"
    print(f"stability: L_hat {lhat}  mu_hat {est.mu_hat:.6e}  "
          f"epsilon {est.epsilon:.3e}  ({est.n_pairs} probe pairs)")
    sol = run_picard(RatRunConfig(max_iter=5000, defect_tol=1e-10), student, gram,
                     teacher, sample.dataset)
    print(f"picard: converged={sol.converged} after {len(sol.trace) - 1} iterations")
    norms = sol.trace.defect_norms
    step = max(1, len(norms) // 12)
    for k in range(0, len(norms), step):
        print(f"  iter {k:4d}  defect {norms[k]:.6e}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ratsm",
        description="Residual-corrected vs soft-matching kernel distillation benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, doc in (
        ("solve", cmd_solve, "solve one instance and print weights and exact MSEs"),
        ("mse", cmd_mse, "compare exact MSE formulas against Monte Carlo"),
        ("sweep", cmd_sweep, "run the full grid and write CSV (and SVG) outputs"),
        ("diagnose", cmd_diagnose, "eigendecay, noise covariance, stability, defect trace"),
    ):
        p = sub.add_parser(name, help=doc)
        _add_common(p)
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, InputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
