"""Synthetic county-year panels with planted first-stage and cross-elasticity coefficients.

Income follows ``log_income = 6.6 + county + year - 0.006 * heat + controls + v``
and solar adoption is a linear probability ``0.5 + a_i + beta_s (log_income - 6.6)
+ kappa * v / sd(v)`` clipped to [0, 1].  ``beta_s`` depends on the row's
next-best land use, so only the margin-conditioned fits have a single planted
cross-elasticity.  Wind adoption has a zero cross-elasticity everywhere.
"""

from __future__ import annotations

import datetime as dt
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from landiv.instrument import DEFAULT_THRESHOLD_F, GROWING_SEASON, DailyTemperatureSeries
from landiv.panel import LandUse, PanelObservation, RegulationLevel
from landiv.ranking import PreferenceRanking, rank_panel

HEAT_MEAN = 2.87
HEAT_SD = 4.70


@dataclass(frozen=True)
class PanelDGP:
    n_counties: int = 495
    years: tuple[int, ...] = tuple(range(2015, 2023))
    first_stage: float = -0.006
    cross_elasticity: Mapping[LandUse, float] = field(default_factory=lambda: {
        LandUse.AGRICULTURE: -1.0, LandUse.RESIDENTIAL: 0.0, LandUse.SOLAR: 0.0, LandUse.WIND: 0.0})
    wind_cross_elasticity: float = 0.0
    income_mean: float = 6.6
    county_sd: float = 0.05
    year_sd: float = 0.03
    income_noise_sd: float = 0.03
    endogeneity: float = 0.05       # kappa: loading of adoption on the income shock
    metro_share: float = 1 / 3
    regulation_probs: tuple[float, float, float, float, float] = (0.4, 0.1, 0.1, 0.1, 0.3)
    age_effect: float = 0.002
    unemployment_effect: float = -0.01
    price: float = 4.20

    @property
    def heat_dispersion(self) -> float:
        """Negative-binomial size parameter giving mean 2.87 and sd 4.70."""
        return HEAT_MEAN ** 2 / (HEAT_SD ** 2 - HEAT_MEAN)


@dataclass
class SyntheticPanel:
    panel: list[PanelObservation]
    rankings: dict[tuple[str, int], PreferenceRanking]
    dgp: PanelDGP
    prices: dict[int, float]

    def planted(self) -> dict[str, float]:
        return {use.label: float(self.dgp.cross_elasticity[use]) for use in LandUse}


def simulate_panel(dgp: PanelDGP = PanelDGP(), seed: int = 0, *, rank_seed: int | None = None
                   ) -> SyntheticPanel:
    rng = np.random.default_rng(seed)
    counties = [f"{18001 + 2 * i:05d}" for i in range(dgp.n_counties)]
    years = list(dgp.years)
    G, T = len(counties), len(years)
    metro = (rng.random(G) < dgp.metro_share).astype(int)
    codes = np.arange(1, 6)
    solar_reg = rng.choice(codes, size=G, p=dgp.regulation_probs)
    wind_reg = rng.choice(codes, size=G, p=dgp.regulation_probs)

    # rankings first: the planted slope depends on the next-best use
    shell = [PanelObservation(county_id=c, year=y, metro=int(metro[g]),
                              solar_regulation=RegulationLevel(int(solar_reg[g])),
                              wind_regulation=RegulationLevel(int(wind_reg[g])))
             for g, c in enumerate(counties) for y in years]
    rankings = rank_panel(shell, seed if rank_seed is None else rank_seed)

    r = dgp.heat_dispersion
    heat = rng.negative_binomial(r, r / (r + HEAT_MEAN), size=(G, T))
    age = 41 + 4 * rng.standard_normal(G)[:, None] + 0.1 * rng.standard_normal((G, T))
    unemp = np.clip(4.5 + 1.5 * rng.standard_normal(G)[:, None]
                    + 0.8 * rng.standard_normal(T)[None, :] + 0.3 * rng.standard_normal((G, T)),
                    0.5, 20.0)
    county_fx = dgp.county_sd * rng.standard_normal(G)[:, None]
    year_fx = dgp.year_sd * rng.standard_normal(T)[None, :]
    v = dgp.income_noise_sd * rng.standard_normal((G, T))
    log_income = (dgp.income_mean + county_fx + year_fx + dgp.first_stage * heat
                  + dgp.age_effect * (age - 41) + dgp.unemployment_effect * (unemp - 4.5) + v)
    shock = v / dgp.income_noise_sd

    beta = np.array([[dgp.cross_elasticity[rankings[(c, y)].next_best] for y in years]
                     for c in counties])
    base_s = 0.5 + rng.uniform(-0.1, 0.1, size=G)[:, None]
    base_w = 0.4 + rng.uniform(-0.1, 0.1, size=G)[:, None]
    p_solar = np.clip(base_s + beta * (log_income - dgp.income_mean) + dgp.endogeneity * shock, 0, 1)
    p_wind = np.clip(base_w + dgp.wind_cross_elasticity * (log_income - dgp.income_mean)
                     + dgp.endogeneity * shock, 0, 1)
    slr = (rng.random((G, T)) < p_solar).astype(int)
    wnd = (rng.random((G, T)) < p_wind).astype(int)
    prices = {y: float(dgp.price) for y in years}
    corn_yield = np.exp(log_income) / dgp.price
    population = np.round(np.exp(10 + rng.standard_normal(G)))[:, None] * np.ones((1, T))

    panel = []
    for g, c in enumerate(counties):
        for t, y in enumerate(years):
            panel.append(PanelObservation(
                county_id=c, year=y, slr=int(slr[g, t]), wnd=int(wnd[g, t]),
                high_heat_days=int(heat[g, t]), corn_yield=float(corn_yield[g, t]),
                log_income=float(log_income[g, t]), log_gdp=float(13 + county_fx[g, 0] * 10),
                population=float(population[g, t]), median_age=float(age[g, t]),
                labor_force=float(round(population[g, t] * 0.5)),
                unemployment_rate=float(unemp[g, t]), metro=int(metro[g]),
                solar_regulation=RegulationLevel(int(solar_reg[g])),
                wind_regulation=RegulationLevel(int(wind_reg[g])),
            ))
    return SyntheticPanel(panel, rankings, dgp, prices)


def daily_temperatures(panel: Sequence[PanelObservation], seed: int = 0,
                       threshold: float = DEFAULT_THRESHOLD_F) -> dict[str, DailyTemperatureSeries]:
    """Daily mean temperatures whose in-season count above ``threshold`` equals each row's
    ``high_heat_days``.  Off-season days may be hot; they must not be counted."""
    rng = np.random.default_rng(seed)
    by_county: dict[str, list[PanelObservation]] = {}
    for obs in panel:
        by_county.setdefault(obs.county_id, []).append(obs)
    out = {}
    for county in sorted(by_county):
        dates, temps = [], []
        for obs in sorted(by_county[county], key=lambda o: o.year):
            days = [dt.date(obs.year, 1, 1) + dt.timedelta(days=k)
                    for k in range((dt.date(obs.year + 1, 1, 1) - dt.date(obs.year, 1, 1)).days)]
            in_season = np.array([GROWING_SEASON.contains(d) for d in days])
            t = np.where(in_season, rng.uniform(55.0, threshold, len(days)),
                         rng.uniform(20.0, 95.0, len(days)))
            season_idx = np.flatnonzero(in_season)
            hot = rng.choice(season_idx, size=obs.high_heat_days, replace=False)
            t[hot] = rng.uniform(threshold + 0.5, 100.0, len(hot))
            dates.extend(days)
            temps.append(t)
        out[county] = DailyTemperatureSeries(county, tuple(dates), np.concatenate(temps))
    return out
