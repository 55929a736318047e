import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special
from scipy import stats as sps

from oracles import scipy_density
from tristate_dfl.stats import (
    NON_FADING,
    REFLECTION,
    SHADOWING,
    STATE_DENSITIES,
    DegenerateFitError,
    StateDensity,
    db_to_linear,
    fit_mle,
    kolmogorov_sf,
    ks_statistic,
    ks_test,
)

R = np.array([0.05, 0.3, 0.9, 1.0, 1.1, 2.0, 4.0])


def test_state_density_parameters():
    assert (NON_FADING.family, NON_FADING.p1, NON_FADING.p2) == ("lognormal", 0.0, 0.088)
    assert (REFLECTION.family, REFLECTION.p1, REFLECTION.p2) == ("weibull", 1.242, 2.630)
    assert (SHADOWING.family, SHADOWING.p1, SHADOWING.p2) == ("gamma", 0.919, 0.127)


def test_frozen_density_values():
    assert NON_FADING.pdf(1.0) == pytest.approx(4.533435004561736, rel=1e-12)
    assert REFLECTION.pdf(1.0) == pytest.approx(0.8449029319613477, rel=1e-12)
    assert SHADOWING.pdf(1.0) == pytest.approx(0.04595087003661743, rel=1e-12)


def test_db_to_linear():
    assert db_to_linear(0.0) == 1.0
    assert db_to_linear(3.0) == pytest.approx(1.9952623149688795, rel=1e-15)
    np.testing.assert_allclose(db_to_linear([-10.0, 10.0]), [0.1, 10.0])


@pytest.mark.parametrize("d", STATE_DENSITIES, ids=lambda d: d.family)
def test_pdf_cdf_ppf_match_scipy(d):
    ref = scipy_density(d.family, d.p1, d.p2)
    np.testing.assert_allclose(d.pdf(R), ref.pdf(R), rtol=1e-10)
    np.testing.assert_allclose(d.logpdf(R), ref.logpdf(R), rtol=1e-10)
    np.testing.assert_allclose(d.cdf(R), ref.cdf(R), rtol=1e-9, atol=1e-300)
    q = np.array([0.01, 0.25, 0.5, 0.9, 0.999])
    np.testing.assert_allclose(d.ppf(q), ref.ppf(q), rtol=1e-8)


@pytest.mark.parametrize("d", STATE_DENSITIES, ids=lambda d: d.family)
def test_pdf_integrates_to_one(d):
    from scipy.integrate import quad

    lo, hi = d.ppf(1e-12), d.ppf(1 - 1e-12)
    total, _ = quad(d.pdf, lo, hi, limit=400, points=[d.ppf(0.5)])
    assert total == pytest.approx(1.0, abs=1e-6)


def test_cdf_zero_at_nonpositive():
    for d in STATE_DENSITIES:
        assert d.cdf(0.0) == 0.0
        assert d.cdf(-1.0) == 0.0


def test_pdf_rejects_nonpositive():
    with pytest.raises(ValueError):
        NON_FADING.pdf(0.0)


@pytest.mark.parametrize(
    "args", [("lognormal", 0.0, 0.0), ("weibull", -1.0, 2.0), ("gamma", 1.0, -0.1), ("cauchy", 0.0, 1.0)]
)
def test_invalid_parameters(args):
    with pytest.raises(ValueError):
        StateDensity(*args)


@pytest.mark.parametrize("d", STATE_DENSITIES, ids=lambda d: d.family)
def test_sample_mean_matches(d):
    x = d.sample(np.random.default_rng(3), 200_000)
    ref = scipy_density(d.family, d.p1, d.p2)
    assert x.mean() == pytest.approx(ref.mean(), rel=5 * ref.std() / ref.mean() / math.sqrt(x.size) + 1e-3)


@pytest.mark.parametrize("d", STATE_DENSITIES, ids=lambda d: d.family)
def test_fit_recovers_state_densities(d):
    x = d.sample(np.random.default_rng(7), 100_000)
    f = fit_mle(d.family, x)
    assert f.family == d.family
    if d.p1 == 0:
        assert abs(f.p1) < 0.02 * d.p2
    else:
        assert f.p1 == pytest.approx(d.p1, rel=0.02)
    assert f.p2 == pytest.approx(d.p2, rel=0.02)


@pytest.mark.parametrize("family", ["weibull", "gamma"])
def test_fit_matches_scipy_mle(family):
    d = {"weibull": REFLECTION, "gamma": SHADOWING}[family]
    x = d.sample(np.random.default_rng(11), 5000)
    f = fit_mle(family, x)
    dist = {"weibull": sps.weibull_min, "gamma": sps.gamma}[family]
    shape, _, scale = dist.fit(x, floc=0)
    assert f.p2 == pytest.approx(shape, rel=1e-4)
    assert f.p1 == pytest.approx(scale, rel=1e-4)


def test_fit_is_stationary_point_of_likelihood():
    x = SHADOWING.sample(np.random.default_rng(5), 2000)
    f = fit_mle("gamma", x)
    base = np.sum(f.logpdf(x))
    for da, db in [(1.01, 1), (0.99, 1), (1, 1.01), (1, 0.99)]:
        assert np.sum(StateDensity.gamma(f.p1 * da, f.p2 * db).logpdf(x)) < base


def test_fit_errors():
    with pytest.raises(ValueError):
        fit_mle("gamma", np.ones(10))
    with pytest.raises(DegenerateFitError):
        fit_mle("weibull", np.full(50, 2.0))
    with pytest.raises(ValueError):
        fit_mle("gamma", np.r_[np.ones(40), -1.0])
    with pytest.raises(ValueError):
        fit_mle("normal", np.arange(1, 50))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(STATE_DENSITIES), st.floats(0.2, 5.0), st.integers(0, 2**32 - 1))
def test_fit_scale_equivariance(d, c, seed):
    x = d.sample(np.random.default_rng(seed), 300)
    f1, f2 = fit_mle(d.family, x), fit_mle(d.family, c * x)
    if d.family == "lognormal":
        assert f2.p1 == pytest.approx(f1.p1 + math.log(c), abs=1e-9)
    else:
        assert f2.p1 == pytest.approx(c * f1.p1, rel=1e-7)
    assert f2.p2 == pytest.approx(f1.p2, rel=1e-7)


def test_kolmogorov_sf_matches_scipy():
    for x in [0.05, 0.3, 0.7, 0.99, 1.0, 1.36, 2.0, 3.5]:
        assert kolmogorov_sf(x) == pytest.approx(special.kolmogorov(x), abs=1e-12)
    assert kolmogorov_sf(0.0) == 1.0


def test_ks_statistic_matches_scipy():
    x = REFLECTION.sample(np.random.default_rng(2), 500)
    ref = sps.kstest(x, scipy_density("weibull", REFLECTION.p1, REFLECTION.p2).cdf)
    assert ks_statistic(x, REFLECTION) == pytest.approx(ref.statistic, rel=1e-10)


def test_ks_test_requires_samples():
    with pytest.raises(ValueError):
        ks_test([1.0, 2.0], NON_FADING)


def test_ks_rejects_far_off_density():
    x = NON_FADING.sample(np.random.default_rng(0), 1000)
    res = ks_test(x, REFLECTION)
    assert res.reject_h0 and res.p_value < 1e-6
