import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import datasets, random_data
from mrkit.baselines import (
    AllWeightsDegenerate,
    DegenerateDesign,
    _batched_weighted_median,
    fit_egger,
    fit_ivw,
    fit_weighted_median,
    weighted_median,
)
from mrkit.core import SolverConfig, SummaryData, flip_alleles


def test_ivw_exact_fit():
    d = SummaryData.create([1.0, 1.0], [0.1, 0.1], [2.0, 2.0], [0.2, 0.2])
    assert fit_ivw(d).beta_hat == 2.0


def test_ivw_weighted_formula(rng):
    d = random_data(rng, 30)
    w = 1 / d.sigma_y2
    expected = np.sum(w * d.gamma_hat * d.gamma_cap_hat) / np.sum(w * d.gamma_hat**2)
    assert fit_ivw(d).beta_hat == pytest.approx(expected, rel=1e-14)


def test_ivw_degenerate():
    with pytest.raises(AllWeightsDegenerate):
        fit_ivw(SummaryData.create([0.0, 0.0], [0.1, 0.1], [1.0, 2.0], [0.1, 0.1]))


def test_egger_exact_affine_fit():
    g = np.array([0.1, 0.2, 0.3, 0.5])
    d = SummaryData.create(g, [0.01] * 4, 0.05 + 0.7 * g, [0.02] * 4)
    fit = fit_egger(d)
    assert fit.beta_hat == pytest.approx(0.7, abs=1e-12)
    assert fit.intercept == pytest.approx(0.05, abs=1e-12)


def test_egger_degenerate_design():
    with pytest.raises(DegenerateDesign):
        fit_egger(SummaryData.create([0.1, -0.1, 0.1], [0.01] * 3, [0.1, 0.2, 0.3], [0.1] * 3))


def test_weighted_median_examples():
    assert weighted_median(np.array([3.0, 1.0, 2.0]), np.ones(3)) == 2.0
    assert weighted_median(np.array([1.0, 2.0]), np.array([1.0, 1.0])) == 1.5
    # normalized weights (10, 1, 1)/12 sit at 5/12, 21/24, 23/24
    expected = 1.0 + (0.5 - 5 / 12) / (21 / 24 - 5 / 12)
    assert weighted_median(np.array([1.0, 2.0, 10.0]), np.array([10.0, 1.0, 1.0])) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=30), st.integers(0, 2**32 - 1))
def test_batched_median_matches_scalar(values, seed):
    v = np.array(values)
    w = np.random.default_rng(seed).uniform(0.1, 2.0, v.size)
    assert _batched_weighted_median(v[None, :], w[None, :])[0] == pytest.approx(weighted_median(v, w), abs=1e-12)


def test_weighted_median_identical_ratios():
    g = np.array([0.1, 0.2, 0.3])
    d = SummaryData.create(g, [1e-9] * 3, 0.5 * g, [1e-9] * 3)
    fit = fit_weighted_median(d)
    assert fit.beta_hat == pytest.approx(0.5, abs=1e-12)
    assert fit.beta_se < 1e-6


def test_weighted_median_drops_zero_exposure():
    d = SummaryData.create([0.0, 0.1, 0.2, 0.3], [0.01] * 4, [0.1, 0.05, 0.1, 0.15], [0.01] * 4)
    with pytest.warns(UserWarning, match="snp1"):
        fit = fit_weighted_median(d)
    assert fit.n_snps == 3
    assert fit.beta_hat == pytest.approx(0.5)


def test_weighted_median_bootstrap_seeded(rng):
    d = random_data(rng, 20)
    cfg = SolverConfig(n_bootstrap=200)
    assert fit_weighted_median(d, cfg, seed=3).beta_se == fit_weighted_median(d, cfg, seed=3).beta_se
    assert fit_weighted_median(d, cfg, seed=3).beta_se != fit_weighted_median(d, cfg, seed=4).beta_se


@settings(max_examples=30, deadline=None)
@given(datasets(), st.integers(0, 2**32 - 1))
def test_flip_invariance_ivw_and_median(data, seed):
    flips = np.random.default_rng(seed).random(data.p) < 0.5
    flipped = flip_alleles(data, flips)
    assert fit_ivw(flipped).beta_hat == pytest.approx(fit_ivw(data).beta_hat, abs=1e-12)
    cfg = SolverConfig(n_bootstrap=10)
    assert fit_weighted_median(flipped, cfg).beta_hat == pytest.approx(fit_weighted_median(data, cfg).beta_hat, abs=1e-12)


def test_egger_depends_on_coding(rng):
    # the intercept breaks the sign symmetry: on the raw coding, flipping one
    # allele moves the slope; the default orientation step undoes any flip
    d = random_data(rng, 30, tau=0.03)
    flips = np.zeros(d.p, dtype=bool)
    flips[0] = True
    raw, raw_flipped = fit_egger(d, orient=False), fit_egger(flip_alleles(d, flips), orient=False)
    assert abs(raw.beta_hat - raw_flipped.beta_hat) > 1e-6
    assert fit_egger(flip_alleles(d, flips)).beta_hat == pytest.approx(fit_egger(d).beta_hat, abs=1e-12)
