import numpy as np
import pytest

from mrkit.core import Method
from mrkit.simulation import (
    MetricRow,
    SimSetup,
    StudyConfig,
    generate,
    make_variance_profile,
    run_study,
    simulate_estimates,
    summarize,
)


def test_profile_hits_kappa_exactly():
    for p, kappa in ((25, 33.1), (160, 9.1), (1, 4.0)):
        sx, sy, g = make_variance_profile(p, kappa, seed=3)
        assert np.mean(g**2 / sx**2) == pytest.approx(kappa, rel=1e-12)
        assert np.all(sx > 0) and np.all(sy > 0)


def test_profile_deterministic():
    a, b = make_variance_profile(25, 33.1, 11), make_variance_profile(25, 33.1, 11)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    assert not np.array_equal(a[2], make_variance_profile(25, 33.1, 12)[2])


def test_profile_rejects_bad_kappa():
    with pytest.raises(ValueError):
        make_variance_profile(10, 0.0, 1)


def test_calibrated_setup_sorted_by_strength():
    s = SimSetup.calibrated(3, 40, 9.1, seed=2)
    strength = np.abs(s.gamma) / s.sigma_x
    assert int(np.argmax(strength)) == 0
    assert s.kappa == pytest.approx(9.1)
    assert s.tau0 == pytest.approx(2 * np.mean(s.sigma_y))


def test_setup_one_has_no_pleiotropy():
    s = SimSetup.calibrated(1, 30, 10.0, seed=1)
    data, truth = generate(s, 7)
    np.testing.assert_array_equal(truth.alpha, 0.0)
    np.testing.assert_array_equal(truth.Gamma, 0.4 * s.gamma)
    assert truth.tau0 == 0.0 and data.p == 30


def test_generate_bitwise_reproducible():
    s = SimSetup.calibrated(6, 30, 10.0, seed=1)
    (a, ta), (b, tb) = generate(s, 4), generate(s, 4)
    assert a == b
    np.testing.assert_array_equal(ta.alpha, tb.alpha)
    assert not np.array_equal(generate(s, 5)[0].gamma_hat, a.gamma_hat)


def test_setup_three_outlier_mean():
    s = SimSetup.calibrated(3, 20, 9.1, seed=1)
    a0 = np.array([generate(s, i)[1].alpha[0] for i in range(2000)])
    assert abs(a0.mean() - 5 * s.tau0) < 3 * s.tau0 / np.sqrt(a0.size)


def test_setup_two_direct_effect_variance():
    s = SimSetup.calibrated(2, 100, 9.1, seed=1)
    alpha = np.concatenate([generate(s, i)[1].alpha for i in range(200)])
    # sd of the sample variance of n normals is tau0^2 sqrt(2 / n)
    assert abs(alpha.var() - s.tau0**2) < 3 * s.tau0**2 * np.sqrt(2 / alpha.size)


def test_setup_four_to_six_shapes():
    s4 = SimSetup.calibrated(4, 100, 9.1, seed=1)
    a4 = np.concatenate([generate(s4, i)[1].alpha for i in range(100)])
    assert a4.var() == pytest.approx(2 * s4.tau0**2, rel=0.1)  # Laplace(scale 1) has variance 2
    s5 = SimSetup.calibrated(5, 100, 9.1, seed=1)
    a5 = np.array([generate(s5, i)[1].alpha for i in range(400)])
    w = np.abs(s5.gamma) / np.mean(np.abs(s5.gamma))
    assert a5.std(axis=0)[0] / a5.std(axis=0)[-1] == pytest.approx(w[0] / w[-1], rel=0.25)
    s6 = SimSetup.calibrated(6, 100, 9.1, seed=1)
    big = [np.sum(generate(s6, i)[1].alpha > 2.5 * s6.tau0) for i in range(50)]
    assert 8 <= np.median(big) <= 12


def test_invalid_setup():
    with pytest.raises(ValueError):
        SimSetup(7, [0.1], [0.1], [0.1])


def test_summarize_constant_estimator():
    z = 1.959963984540054
    row = summarize("const", np.full(10, 0.4), np.full(10, 1 / z), 0.4)
    assert row.bias_pct == 0.0 and row.rmse_pct == 0.0 and row.coverage_pct == 100.0
    assert row.ci_len_pct == pytest.approx(100 * 2 / 0.4)


def test_summarize_constant_offset():
    row = summarize("off", np.full(5, 0.45), np.full(5, 0.01), 0.4)
    assert row.rmse_pct == pytest.approx(100 * 0.05 / 0.4)
    assert row.bias_pct == pytest.approx(100 * 0.05 / 0.4)


def test_summarize_matches_naive_reference(rng):
    est = 0.4 + 0.1 * rng.standard_normal(101)
    se = rng.uniform(0.05, 0.15, 101)
    est[3] = np.nan
    row = summarize("m", est, se, 0.4)
    ok = ~np.isnan(est)
    e, s = est[ok], se[ok]
    errs = sorted((x - 0.4) ** 2 for x in e)
    lens = sorted(2 * 1.959963984540054 * x for x in s)
    assert row.n_failed == 1 and row.n_ok == 100
    assert row.bias_pct == pytest.approx(100 * (sum(e) / len(e) - 0.4) / 0.4, rel=1e-12)
    assert row.rmse_pct == pytest.approx(100 * np.sqrt((errs[49] + errs[50]) / 2) / 0.4, rel=1e-12)
    assert row.ci_len_pct == pytest.approx(100 * (lens[49] + lens[50]) / 2 / 0.4, rel=1e-12)
    cover = sum(abs(x - 0.4) <= 1.959963984540054 * y for x, y in zip(e, s))
    assert row.coverage_pct == pytest.approx(cover)


def test_failure_rate():
    assert MetricRow("m", 0, 0, 0, 0, n_ok=3, n_failed=1).failure_rate == 0.25


def test_parallel_matches_serial():
    s = SimSetup.calibrated(2, 30, 9.1, seed=4)
    methods = [Method.PS, Method.APS, Method.IVW]
    serial = simulate_estimates(s, methods, 12)
    parallel = simulate_estimates(s, methods, 12, threads=3)
    np.testing.assert_array_equal(serial, parallel)


def test_adding_methods_does_not_change_data():
    s = SimSetup.calibrated(2, 30, 9.1, seed=4)
    a = simulate_estimates(s, ["ps"], 5)
    b = simulate_estimates(s, ["ivw", "ps"], 5)
    np.testing.assert_array_equal(a[:, 0], b[:, 1])


def test_run_study_rows():
    s = SimSetup.calibrated(1, 25, 33.1, seed=0)
    rows = run_study(s, ["ps", "ivw", "egger", "wmedian"], 20, StudyConfig())
    assert [r.method for r in rows] == ["PS", "IVW", "Egger", "WeightedMedian"]
    assert all(0 <= r.coverage_pct <= 100 and r.n_ok + r.n_failed == 20 for r in rows)
    with pytest.raises(ValueError):
        run_study(s, ["ps"], 0)
