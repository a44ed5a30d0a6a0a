import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

import oracles
from specsense.dists import EmpiricalReference, Normal
from specsense.errors import ConfigError, DegenerateCdfError, SupportMismatchError
from specsense.gof import (AD_CRITICAL_TABLE, GofTest, ThresholdTable, ad_critical_table,
                          ad_statistic, calibrate_critical_values, cm_statistic, ecdf,
                          kl_divergence, kl_from_samples, ks_statistic, quantile_ceiling,
                          run_gof, statistic)

N01 = Normal(0.0, 1.0)


def _at_quantiles(n, f0=N01):
    u = (2 * np.arange(1, n + 1) - 1) / (2 * n)
    return stats.norm.ppf(u, f0.mu, f0.sigma)


def test_ecdf():
    f = ecdf([5.0])
    assert f(4.999) == 0.0 and f(5.0) == 1.0
    assert ecdf([1, 2, 3, 4])(2.5) == 0.5
    assert ecdf([3, 1, 2, 2])(2.0) == 0.75  # right-continuous at ties
    with pytest.raises(ConfigError):
        ecdf([])


def test_ecdf_monte_carlo():
    x = np.random.default_rng(0).standard_normal(100_000)
    assert abs(ecdf(x)(0.0) - 0.5) < 0.01


def test_ks_examples():
    for n in (1, 7, 50):
        assert ks_statistic(_at_quantiles(n), N01) == pytest.approx(0.5 / n, rel=1e-12)
    assert ks_statistic([0.0], N01) == 0.5


def test_cm_examples():
    for n in (1, 10, 100):
        assert cm_statistic(_at_quantiles(n), N01) == pytest.approx(1 / (12 * n), abs=1e-15)
    assert cm_statistic([0.0], N01) == pytest.approx(1 / 12)


def test_ad_two_point_fixture():
    closed = -2 - 0.5 * (2 * math.log(0.25) + 3 * 2 * math.log(0.75))
    got = ad_statistic(_at_quantiles(2), N01)
    assert got == pytest.approx(closed, rel=1e-12)
    assert abs(got - 0.2495) < 5e-4
    assert got == pytest.approx(oracles.ad_integral([0.25, 0.75]), rel=1e-6)


def test_ad_matches_scipy():
    x = np.random.default_rng(1).standard_normal(100)
    ref = stats.anderson(x, "norm").statistic
    assert ad_statistic(x, Normal.fit(x)) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_forms_match_integrals(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 51))
    x = rng.standard_normal(n) * 1.3 + 0.2
    u = N01.cdf(np.sort(x))
    assert cm_statistic(x, N01) == pytest.approx(oracles.cm_integral(u), rel=1e-6)
    assert ad_statistic(x, N01) == pytest.approx(oracles.ad_integral(u), rel=1e-6)
    assert ks_statistic(x, N01) == pytest.approx(oracles.ks_brute(u), abs=1e-15)


def test_ad_tail_growth_and_clamp():
    base = np.linspace(0, 0.1, 10)
    ad = [ad_statistic(base + shift, N01) for shift in (1, 2, 3, 4, 5, 6, 7)]
    assert all(b > a for a, b in zip(ad, ad[1:]))
    # beyond the clamp at 1e-15 the statistic saturates at -n - n ln(1e-15)
    cap = -10 - 10 * math.log(1e-15)
    assert ad_statistic(base + 30, N01) == pytest.approx(cap, rel=1e-12)
    assert max(cm_statistic(base + s, N01) for s in (1, 7, 30)) <= 10


@pytest.mark.parametrize("u0", [1e-3, 1e-6])
def test_ad_vs_cm_lower_tail(u0):
    x = np.full(20, stats.norm.ppf(u0))
    assert ad_statistic(x, N01) > 20 * math.log(1 / u0) / 2
    assert cm_statistic(x, N01) <= 20


def test_ad_degenerate_reference():
    with pytest.raises(DegenerateCdfError):
        ad_statistic([0.0, 50.0], N01)  # sf underflows to exactly 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=40), st.floats(0.2, 3.0))
def test_transform_invariance(xs, scale):
    # a strictly increasing map applied to both the sample and F0
    x = np.array(xs)
    f0, g0 = Normal(0.0, 1.0), Normal(1.0, scale)
    y = 1.0 + scale * x
    for test in GofTest:
        a, b = statistic(test, x, f0), statistic(test, y, g0)
        assert a >= 0
        assert b == pytest.approx(a, rel=1e-9, abs=1e-12)
    assert 0 <= ks_statistic(x, f0) <= 1


def test_kl_examples():
    assert kl_divergence([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]) == 0.0
    expected = 0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(0.5 / 0.1)
    assert kl_divergence([0.5, 0.5], [0.9, 0.1]) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.5108, abs=1e-4)
    with pytest.raises(SupportMismatchError):
        kl_divergence([0.5, 0.5], [1.0, 0.0])
    with pytest.raises(ConfigError):
        kl_divergence([1.0], [0.5, 0.5])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=20).filter(lambda v: sum(v) > 0),
       st.integers(0, 2 ** 32 - 1))
def test_kl_nonnegative(p, seed):
    p = np.array(p) / sum(p)
    q = np.random.default_rng(seed).dirichlet(np.ones(p.size)) + 1e-9
    q /= q.sum()
    assert kl_divergence(p, q) >= 0
    assert kl_divergence(p, p) == 0.0


def test_kl_from_samples():
    rng = np.random.default_rng(2)
    a, b = rng.standard_normal(20_000), rng.standard_normal(20_000)
    assert kl_from_samples(a, a).value == 0.0
    assert kl_from_samples(a, b).value < 0.01
    far = kl_from_samples(a + 10, b)
    assert far.value > 1 and far.out_of_range > 19_000 and far.support_mismatch > 0


def test_ad_table():
    t = ad_critical_table()
    assert t[0.05] == 0.78 and t[0.01] == 1.08 and t[0.15] == 0.57
    t[0.05] = 0.0
    assert AD_CRITICAL_TABLE[0.05] == 0.78


def test_quantile_ceiling():
    s = np.arange(1.0, 101.0)
    assert quantile_ceiling(s, 0.05) == 95.0
    assert np.sum(s > quantile_ceiling(s, 0.05)) == 5
    s = np.arange(1.0, 1001.0)
    for a in (0.1, 0.05, 0.01, 0.025, 0.15):
        assert np.sum(s > quantile_ceiling(s, a)) == math.floor(a * 1000 + 1e-9)


def test_ks_calibration_asymptotic():
    t = calibrate_critical_values("ks", 1000, N01, trials=2000, significances=[0.05])
    assert t[0.05] == pytest.approx(1.358 / math.sqrt(1000), rel=0.05)


def test_calibration_monotone_and_deterministic():
    a = calibrate_critical_values("cm", 50, N01, trials=1000, seed=3, workers=1)
    b = calibrate_critical_values("cm", 50, N01, trials=1000, seed=3, workers=4)
    assert a.quantiles == b.quantiles
    qs = [a[s] for s in sorted(a.quantiles)]
    assert all(x >= y for x, y in zip(qs, qs[1:]))


def test_calibration_preconditions():
    with pytest.raises(ConfigError):
        calibrate_critical_values("ad", 10, N01, trials=999)
    with pytest.raises(ConfigError):
        calibrate_critical_values("ad", 10, EmpiricalReference([1.0, 2.0]), trials=1000)


def test_threshold_table_roundtrip(tmp_path):
    t = calibrate_critical_values("ad", 20, N01, composite=True, trials=1000, keep_samples=True)
    t.save(tmp_path / "t.json")
    u = ThresholdTable.load(tmp_path / "t.json")
    assert u.quantiles == t.quantiles and u.composite and u.n == 20
    assert np.array_equal(u.null_samples, t.null_samples)
    with pytest.raises(ConfigError):
        u.threshold(0.2)


def test_run_gof_decisions():
    r = run_gof("ad", np.linspace(-1, 1, 30), N01, 0.01, "table")
    assert r.threshold == 1.08
    assert r.reject_null is (r.statistic > 1.08)
    with pytest.raises(ConfigError):
        run_gof("ks", [0.0, 1.0], N01, 0.05, "table")


def test_strict_inequality_at_threshold():
    x = np.random.default_rng(0).standard_normal(30)
    stat = ks_statistic(x, N01)
    t = ThresholdTable("KS", 30, {}, False, 1000, {0.05: stat})
    assert run_gof("ks", x, N01, 0.05, t).reject_null is False


def test_table_decision_example():
    # a statistic of 46.89 against the 1 % critical value rejects normality
    t = ThresholdTable("AD", 4096, {}, True, 1000, {0.01: ad_critical_table()[0.01]})
    assert 46.89 > t[0.01]
    x = np.random.default_rng(9).lognormal(0, 1.5, 4096)
    r = run_gof("ad", x, Normal.fit(x), 0.01, "table")
    assert r.reject_null and r.statistic > 46.89


@pytest.mark.slow
def test_calibrated_null_rejection_rate():
    rng = np.random.default_rng(11)
    t = calibrate_critical_values("ks", 100, N01, trials=10_000, significances=[0.05], seed=5)
    rej = [ks_statistic(rng.standard_normal(100), N01) > t[0.05] for _ in range(4000)]
    assert abs(np.mean(rej) - 0.05) < 0.01


def test_cm_reference_quantile():
    t = calibrate_critical_values("cm", 100, N01, trials=10_000, significances=[0.05])
    assert t[0.05] == pytest.approx(0.461, abs=0.02)


@pytest.mark.parametrize("test,band", [("ad", 2.492), ("ks", 1.358 / 64)])
def test_fully_specified_null_at_4096(test, band):
    rng = np.random.default_rng(21)
    below = [statistic(test, rng.standard_normal(4096), N01) < band for _ in range(1000)]
    # 3-sigma binomial band around 0.95
    assert abs(np.mean(below) - 0.95) < 0.021


def test_ad_calibration_reproduces_asymptotic_quantile():
    t = calibrate_critical_values("ad", 50, N01, trials=100_000, significances=[0.05], seed=1)
    assert t[0.05] == pytest.approx(2.492, abs=0.03)
