import io
import os

import numpy as np
import pytest

from ratsm import ConfigError
from ratsm.bench import (CSV_HEADER, ExperimentConfig, TrialRecord, cell_medians, csv_bytes,
                         emit_csv, fit_rates, load_config, make_config, parse_csv,
                         run_experiment, sample_dataset)
from ratsm.sampling import beta_a1, rng_for
from ratsm.svgplot import render_svg
from ratsm import cli


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_beta_one_is_uniform_ks():
    x = np.sort(beta_a1(rng_for(70), 1.0, 2000))
    ecdf_hi = np.arange(1, 2001) / 2000.0
    ecdf_lo = np.arange(0, 2000) / 2000.0
    ks = max(np.abs(ecdf_hi - x).max(), np.abs(x - ecdf_lo).max())
    assert ks < 0.05


def test_beta_inverse_cdf_value():
    class FixedU:
        def random(self, size=None):
            return np.full(size, 0.25) if size else 0.25
    assert beta_a1(FixedU(), 2.0, 3)[0] == pytest.approx(0.5, abs=1e-15)


def test_sample_dataset_deterministic():
    config = make_config("hermite_gaussian")
    a = sample_dataset(config, 32, 32, seed=5)
    b = sample_dataset(config, 32, 32, seed=5)
    assert np.array_equal(a.dataset.source_x, b.dataset.source_x)
    assert np.array_equal(a.dataset.source_y, b.dataset.source_y)
    assert np.array_equal(a.theta_star, b.theta_star)


def test_sample_dataset_ground_truth_norm():
    config = make_config("laplace_beta", radius=2.5)
    sample = sample_dataset(config, 40, 16, seed=6)
    from ratsm import build_gram
    g = build_gram(sample.student_kernel, sample.student_kernel, sample.dataset,
                   check_psd=False)
    hnorm = np.sqrt(sample.theta_star @ (g.kt_mm @ sample.theta_star))
    assert hnorm == pytest.approx(2.5, rel=1e-9)


def test_diagonal_sample_matches_feature_story():
    config = make_config("diagonal", alpha=1.0, beta=1.0, sigma=0.0)
    sample = sample_dataset(config, 6, 6, seed=7)
    k = np.arange(1, 7, dtype=float)
    v = np.sqrt(6.0) * k**-1.0 * sample.theta_star
    assert np.linalg.norm(v) == pytest.approx(config.radius, rel=1e-12)
    np.testing.assert_allclose(sample.dataset.source_y, np.sqrt(6.0) * k**-1.0 * v,
                               atol=1e-12)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

SMALL = dict(n_grid=(8, 16, 32), trials=2)


def test_run_experiment_noiseless_mse_is_bias():
    config = make_config("custom", **SMALL, m=6, sigma=0.0, seed=3)
    records = run_experiment(config)
    assert records and all(not r.error for r in records)
    for r in records:
        assert r.variance == 0.0
        assert r.mse == r.bias_sq


def test_run_experiment_rerun_identical_bytes():
    config = make_config("diagonal", **SMALL, seed=11)
    a = csv_bytes(run_experiment(config))
    b = csv_bytes(run_experiment(config))
    assert a == b


def test_run_experiment_threads_match_serial():
    config = make_config("custom", **SMALL, m=6, seed=12)
    serial = csv_bytes(run_experiment(config))
    threaded = csv_bytes(run_experiment(make_config("custom", **SMALL, m=6, seed=12,
                                                    threads=2)))
    assert serial == threaded


def test_run_experiment_records_errors_and_continues():
    # the optimal-gamma rule rejects beta outside (1/2, 1/2+alpha) per row
    config = make_config("custom", **SMALL, m=6, seed=13,
                         gamma_policy="optimal", alpha=1.0, beta=5.0)
    records = run_experiment(config)
    assert len(records) == 2 * 3 * 2
    assert all(r.error and r.mse is None for r in records)


def test_run_experiment_empirical_mode():
    config = make_config("custom", n_grid=(8, 16), trials=2, m=6, seed=14,
                         mse_mode="empirical")
    records = run_experiment(config)
    assert all(not r.error for r in records)
    rat_rows = [r for r in records if r.method == "RAT"]
    assert all(r.iters > 0 for r in rat_rows)
    assert all(r.mse is not None and r.mse >= 0 for r in records)


def test_gamma_policies_differ():
    fixed = make_config("diagonal", **SMALL, seed=15, gamma_policy="fixed", gamma=0.5)
    optimal = make_config("diagonal", **SMALL, seed=15, gamma_policy="optimal")
    rf = run_experiment(fixed)
    ro = run_experiment(optimal)
    assert {r.gamma for r in rf} == {0.5}
    assert all(r.gamma != 0.5 for r in ro)


# ---------------------------------------------------------------------------
# rate fits
# ---------------------------------------------------------------------------

def _records_from_curve(fn):
    return [TrialRecord("custom", n, n, t, m, 0.1, fn(n), fn(n), 0.0, 0, 0.0, 0.0)
            for n in (16, 32, 64, 128) for t in range(3) for m in ("RAT", "SM")]


def test_fit_rates_exact_power_law():
    fits = fit_rates(_records_from_curve(lambda n: 3.0 * n**-0.8))
    assert fits["RAT"].slope == pytest.approx(-0.8, abs=1e-12)
    assert fits["RAT"].r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_rates_constant_curve():
    fits = fit_rates(_records_from_curve(lambda n: 0.7))
    assert fits["SM"].slope == pytest.approx(0.0, abs=1e-12)
    assert fits["SM"].plateau_ratio == pytest.approx(1.0, abs=1e-12)


def test_fit_rates_needs_three_cells():
    records = [r for r in _records_from_curve(lambda n: 1.0 / n) if r.n <= 32]
    from ratsm import InputError
    with pytest.raises(InputError):
        fit_rates(records)


def test_fit_rates_predicted_exponent():
    fits = fit_rates(_records_from_curve(lambda n: 1.0 / n), alpha_hat=1.0, beta_hat=1.0)
    assert fits["RAT"].predicted_exponent == pytest.approx(-2.0 / 3.0, abs=1e-12)


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

def test_emit_csv_empty(tmp_path):
    path = tmp_path / "empty.csv"
    emit_csv([], str(path))
    assert path.read_text(encoding="utf-8") == ",".join(CSV_HEADER) + "\n"


def test_emit_csv_single_record(tmp_path):
    rec = TrialRecord("diagonal", 8, 8, 0, "RAT", 0.25, 0.125, 0.1, 0.025, 0, 0.0, 0.0)
    path = tmp_path / "one.csv"
    emit_csv([rec], str(path))
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2


def test_csv_round_trip():
    records = [
        TrialRecord("diagonal", 8, 8, 0, "RAT", 1e-3, 0.1234567890123456, 0.1, 0.02,
                    0, 0.0, 0.0),
        TrialRecord("diagonal", 8, 8, 0, "SM", None, None, None, None, 0, 0.0, 0.0,
                    "NumericalError: singular"),
        TrialRecord("custom", 16, 6, 3, "SM", 0.5, 3.75e-9, 1e-300, 2.5, 12, 1e-11, 4.25),
    ]
    assert parse_csv(io.StringIO(csv_bytes(records).decode())) == records


def test_csv_floats_shortest_round_trip():
    rec = TrialRecord("diagonal", 8, 8, 0, "RAT", 0.1, 1 / 3, 0.2, 2 / 30, 0, 0.0, 0.0)
    text = csv_bytes([rec]).decode()
    assert repr(1 / 3) in text
    assert parse_csv(io.StringIO(text))[0].mse == 1 / 3


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

def _medians_5_cells():
    return {"RAT": [(2**k, 1.0 / 2**k) for k in range(3, 8)],
            "SM": [(2**k, 0.5) for k in range(3, 8)]}


def test_svg_structure_counts():
    meds = _medians_5_cells()
    fits = fit_rates([TrialRecord("x", n, n, 0, m, None, v, v, 0.0, 0, 0.0, 0.0)
                      for m, pts in meds.items() for n, v in pts])
    svg = render_svg(meds, fits)
    assert svg.count("<polyline") == 4
    assert svg.count("stroke-dasharray") == 2
    assert "slope" in svg


def test_svg_monotone_polyline():
    svg = render_svg({"RAT": [(8, 1.0), (16, 0.5), (32, 0.25)]}, None)
    line = [seg for seg in svg.splitlines() if "polyline" in seg][0]
    pts = line.split('points="')[1].split('"')[0].split()
    ys = [float(p.split(",")[1]) for p in pts]
    assert all(b > a for a, b in zip(ys, ys[1:]))  # svg y grows downward


def test_svg_deterministic_bytes():
    meds = _medians_5_cells()
    assert render_svg(meds, None) == render_svg(meds, None)


def test_svg_needs_two_cells():
    from ratsm import InputError
    with pytest.raises(InputError):
        render_svg({"RAT": [(8, 1.0)]}, None)


# ---------------------------------------------------------------------------
# config and CLI
# ---------------------------------------------------------------------------

def test_load_config_toml(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text("""
[experiment]
preset = "diagonal"
seed = 9
trials = 3
n_grid = [8, 16]

[diagonal]
alpha = 1.0
beta = 1.2
""")
    config = load_config(str(path))
    assert config.preset == "diagonal" and config.seed == 9
    assert config.n_grid == (8, 16) and config.beta == 1.2


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[experiment]\npreset = \"diagonal\"\nwat = 3\n")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(preset="nope")
    with pytest.raises(ConfigError):
        make_config("diagonal", n_grid=(16, 8))
    with pytest.raises(ConfigError):
        make_config("diagonal", m=10)
    with pytest.raises(ConfigError):
        make_config("custom", trials=0)


def test_laplace_preset_uses_distinct_scales():
    config = make_config("laplace_beta")
    assert config.nu_t < config.nu_s


def test_cli_exit_codes(tmp_path):
    assert cli.main(["sweep"]) == 1  # neither --config nor --preset
    assert cli.main(["sweep", "--config", str(tmp_path / "missing.toml")]) == 3
    bad = tmp_path / "bad.toml"
    bad.write_text("this is not toml [")
    assert cli.main(["sweep", "--config", str(bad)]) == 1


def test_cli_sweep_writes_outputs(tmp_path):
    out = str(tmp_path / "runs")
    code = cli.main(["sweep", "--preset", "custom", "--seed", "2", "--trials", "2",
                     "--out", out, "--emit-svg"])
    assert code == 0
    assert os.path.exists(os.path.join(out, "sweep_custom.csv"))
    assert os.path.exists(os.path.join(out, "sweep_custom.svg"))
    records = parse_csv(os.path.join(out, "sweep_custom.csv"))
    meds = cell_medians(records)
    assert set(meds) == {"RAT", "SM"}


def test_cli_solve_and_mse_and_diagnose(capsys):
    assert cli.main(["solve", "--preset", "custom", "--n", "10"]) == 0
    out = capsys.readouterr().out
    assert "theta_rat" in out and "exact SM" in out
    assert cli.main(["mse", "--preset", "custom", "--n", "10", "--trials", "400"]) == 0
    out = capsys.readouterr().out
    assert "monte-carlo" in out
    assert cli.main(["diagnose", "--preset", "custom", "--n", "12"]) == 0
    out = capsys.readouterr().out
    assert "stability" in out and "picard" in out
