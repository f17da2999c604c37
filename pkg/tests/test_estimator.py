import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import dummies, lsdv_design, random_panel, sandwich_se, tsls_reference

from landiv.estimator import (
    CONST, DesignSpec, EmptySubsampleError, RankDeficientError, WeakInstrumentWarning, demean,
    fe_rank, fit, linear_iv, next_best_columns, significance_stars,
)
from landiv.panel import LandUse

OLS = DesignSpec("y", controls=("x", "c1", "c2"))
IV = DesignSpec("y", endogenous="x", instrument="z", controls=("c1", "c2"))


@pytest.mark.parametrize("drop", [0.0, 0.2])
@pytest.mark.parametrize("se_type", ["classical", "robust", "cluster_by_county"])
def test_ols_matches_dummy_regression(drop, se_type):
    rng = np.random.default_rng(11)
    data = random_panel(rng, drop=drop)
    res = fit(DesignSpec("y", controls=("x", "c1", "c2"), se_type=se_type), data)
    x = lsdv_design(data, ["x", "c1", "c2"])
    beta, *_ = np.linalg.lstsq(x, data["y"], rcond=None)
    se = sandwich_se(x, x, data["y"] - x @ beta, se_type.split("_")[0], data["county_id"],
                     nested=len(set(data["county_id"])) - 1)
    np.testing.assert_allclose(res.coef[:3], beta[:3], rtol=1e-8)
    np.testing.assert_allclose(res.se[:3], se[:3], rtol=1e-6)


@pytest.mark.parametrize("se_type", ["classical", "robust", "cluster_by_county"])
def test_tsls_matches_dummy_regression(se_type):
    rng = np.random.default_rng(12)
    data = random_panel(rng, drop=0.15)
    res = fit(DesignSpec("y", endogenous="x", instrument="z", controls=("c1", "c2"),
                         se_type=se_type), data)
    x = lsdv_design(data, ["x", "c1", "c2"])
    z = lsdv_design(data, ["z", "c1", "c2"])
    beta, xhat, resid = tsls_reference(data["y"], x, z)
    se = sandwich_se(x, xhat, resid, se_type.split("_")[0], data["county_id"],
                     nested=len(set(data["county_id"])) - 1)
    np.testing.assert_allclose(res.coef[:3], beta[:3], rtol=1e-8)
    np.testing.assert_allclose(res.se[:3], se[:3], rtol=1e-6)


def test_ols_se_against_statsmodels():
    sm = pytest.importorskip("statsmodels.api")
    rng = np.random.default_rng(5)
    data = random_panel(rng, n_counties=30)
    spec = DesignSpec("y", controls=("x", "c1"), fixed_effects=frozenset())
    exog = sm.add_constant(np.column_stack([data["x"], data["c1"]]))
    for se_type, kw in (("classical", {}), ("robust", {"cov_type": "HC1"}),
                        ("cluster_by_county", {"cov_type": "cluster", "cov_kwds": {
                            "groups": np.unique(data["county_id"], return_inverse=True)[1]}})):
        ref = sm.OLS(data["y"], exog).fit(**kw)
        res = fit(DesignSpec(**{**spec.__dict__, "se_type": se_type}), data)
        np.testing.assert_allclose(res.coef, np.r_[ref.params[1:], ref.params[0]], rtol=1e-9)
        np.testing.assert_allclose(res.se, np.r_[ref.bse[1:], ref.bse[0]], rtol=1e-8)


@given(st.integers(0, 2**31))
def test_wald_identity(seed):
    rng = np.random.default_rng(seed)
    n = 200
    z = rng.normal(size=n)
    x = 0.7 * z + rng.normal(size=n)
    y = 1.5 * x + rng.normal(size=n)
    ones = np.ones(n)
    res = linear_iv(y, np.column_stack([x, ones]), np.column_stack([z, ones]), ("x", CONST))
    reduced = np.polyfit(z, y, 1)[0]
    first = np.polyfit(z, x, 1)[0]
    assert res.coef[0] == pytest.approx(reduced / first, rel=1e-10)


@given(st.integers(0, 2**31), st.booleans())
def test_moment_conditions(seed, overidentified):
    rng = np.random.default_rng(seed)
    n = 150
    z = rng.normal(size=(n, 3 if overidentified else 2))
    x = z[:, :2] @ np.array([[1.0, 0.2], [0.3, 1.0]]) + rng.normal(size=(n, 2))
    y = x @ np.array([1.0, -2.0]) + rng.normal(size=n)
    res = linear_iv(y, x, z, ("a", "b"))
    if overidentified:
        xhat = z @ np.linalg.lstsq(z, x, rcond=None)[0]
        assert np.abs(xhat.T @ res.residuals).max() < 1e-8
    else:
        assert np.abs(z.T @ res.residuals).max() < 1e-8
    ols = linear_iv(y, x, x, ("a", "b"))
    assert np.abs(x.T @ ols.residuals).max() < 1e-8


@pytest.mark.filterwarnings("ignore::landiv.estimator.WeakInstrumentWarning")
@given(st.integers(0, 2**31), st.floats(0.01, 100) | st.floats(-100, -0.01))
def test_scale_equivariance(seed, c):
    data = random_panel(np.random.default_rng(seed), n_counties=8, n_years=4)
    scaled = {**data, "y": c * data["y"]}
    a, b = fit(IV, data), fit(IV, scaled)
    np.testing.assert_allclose(b.coef, c * a.coef, rtol=1e-7, atol=1e-9)
    np.testing.assert_allclose(b.se, abs(c) * a.se, rtol=1e-7, atol=1e-9)
    assert [a.stars(n) for n in a.names] == [b.stars(n) for n in b.names]


def test_demean_is_residual_maker():
    rng = np.random.default_rng(2)
    data = random_panel(rng, drop=0.3)
    groups = [np.unique(data["county_id"], return_inverse=True)[1],
              np.unique(data["year"], return_inverse=True)[1]]
    m = np.column_stack([data["y"], data["x"]])
    d = np.column_stack([dummies(data["county_id"], False), dummies(data["year"])])
    ref = m - d @ np.linalg.lstsq(d, m, rcond=None)[0]
    np.testing.assert_allclose(demean(m, groups), ref, atol=1e-8)


def test_fe_rank_counts_connected_components():
    county = np.array(["a", "a", "b", "b", "c"])
    year = np.array([1, 2, 1, 2, 3])   # c/3 is disconnected from the rest
    assert fe_rank(county, year, frozenset({"county", "year"})) == 3 + 3 - 2
    assert fe_rank(county, year, frozenset({"county"})) == 3


def test_rank_deficient_names_columns():
    data = random_panel(np.random.default_rng(1))
    data["c3"] = 2 * data["c1"]
    with pytest.raises(RankDeficientError, match="c3|c1"):
        fit(DesignSpec("y", controls=("x", "c1", "c3")), data)


def test_time_invariant_regressor_is_absorbed():
    data = random_panel(np.random.default_rng(1))
    data["g"] = np.unique(data["county_id"], return_inverse=True)[1].astype(float)
    with pytest.raises(RankDeficientError):
        fit(DesignSpec("y", controls=("x", "g")), data)


def test_weak_instrument_warns():
    rng = np.random.default_rng(3)
    data = random_panel(rng)
    data["noise"] = rng.normal(size=len(data["y"]))
    with pytest.warns(WeakInstrumentWarning):
        res = fit(DesignSpec("y", endogenous="x", instrument="noise", controls=()), data)
    assert res.first_stage_f[0] < 10


def test_first_stage_and_strong_f():
    data = random_panel(np.random.default_rng(4), n_counties=40)
    with warnings.catch_warnings():
        warnings.simplefilter("error", WeakInstrumentWarning)
        res = fit(IV, data)
    first = res.first_stage
    assert first.names[0] == "z"
    assert first.first_stage_f == ()
    assert res.first_stage_f[0] == pytest.approx(first.tstats[0] ** 2, rel=1e-9)


def test_missing_values_dropped_and_counted():
    data = random_panel(np.random.default_rng(6))
    data["c1"] = data["c1"].copy()
    data["c1"][:3] = np.nan
    res = fit(IV, data)
    assert res.n_dropped == 3
    assert res.n_obs == len(data["y"]) - 3


def test_negative_r2_reported_missing():
    rng = np.random.default_rng(8)
    n = 100
    z = rng.normal(size=n)
    x = 0.1 * z + rng.normal(size=n)
    y = -5 * x + rng.normal(size=n) * 0.1
    ones = np.ones(n)
    res = linear_iv(y + 20 * x, np.column_stack([x, ones]), np.column_stack([z, ones]), ("x", CONST))
    assert res.r_squared is None or res.r_squared >= 0


@pytest.mark.parametrize("p,stars", [(0.001, "***"), (0.0099, "***"), (0.01, "**"),
                                     (0.049, "**"), (0.05, "*"), (0.099, "*"), (0.1, ""),
                                     (float("nan"), "")])
def test_stars(p, stars):
    assert significance_stars(p) == stars


@pytest.mark.filterwarnings("ignore::landiv.estimator.WeakInstrumentWarning")
def test_subsample_partition(small_sim):
    spec = DesignSpec("slr", endogenous="log_income", instrument="high_heat_days")
    cols = next_best_columns(spec, small_sim.panel, small_sim.rankings)
    assert cols[0].n_obs == sum(c.n_obs for c in cols[1:] if c is not None)


def test_empty_subsample():
    data = random_panel(np.random.default_rng(9))
    from landiv.ranking import PreferenceRanking

    ranks = {(c, int(y)): PreferenceRanking((1, 2, 3, 4)) for c, y in
             zip(data["county_id"], data["year"])}   # next best is always solar
    with pytest.raises(EmptySubsampleError):
        fit(DesignSpec("y", controls=("x",), subsample=LandUse.WIND), data, ranks)
    cols = next_best_columns(DesignSpec("y", controls=("x",)), data, ranks)
    assert [c is None for c in cols] == [False, True, True, False, True]
