"""High-heat-day instrument and log farm income construction."""

from __future__ import annotations

import csv
import datetime as dt
import math
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from landiv.panel import PanelObservation

DEFAULT_THRESHOLD_F = 83.0


@dataclass(frozen=True)
class SeasonWindow:
    """Inclusive month-day window inside one calendar year."""

    start: tuple[int, int] = (4, 1)
    end: tuple[int, int] = (9, 30)

    def __post_init__(self):
        for month, day in (self.start, self.end):
            dt.date(2000, month, day)  # leap year, so 02-29 is accepted
        if self.start > self.end:
            raise ValueError(f"window start {self.start} is after end {self.end}")

    @classmethod
    def parse(cls, text: str) -> SeasonWindow:
        """``"04-01:09-30"`` style."""
        left, right = text.split(":")
        start = tuple(int(p) for p in left.split("-"))
        end = tuple(int(p) for p in right.split("-"))
        return cls(start, end)

    def contains(self, day: dt.date) -> bool:
        return self.start <= (day.month, day.day) <= self.end

    def days_in(self, year: int) -> list[dt.date]:
        first = _clamp_date(year, *self.start)
        last = _clamp_date(year, *self.end)
        return [first + dt.timedelta(days=k) for k in range((last - first).days + 1)
                if self.contains(first + dt.timedelta(days=k))]


def _clamp_date(year: int, month: int, day: int) -> dt.date:
    try:
        return dt.date(year, month, day)
    except ValueError:  # Feb 29 outside a leap year
        return dt.date(year, month, day - 1)


GROWING_SEASON = SeasonWindow()


@dataclass(frozen=True, eq=False)
class DailyTemperatureSeries:
    county_id: str
    dates: tuple[dt.date, ...]
    temps: np.ndarray  # mean daily temperature, degrees F

    def __post_init__(self):
        temps = np.asarray(self.temps, dtype=float)
        object.__setattr__(self, "temps", temps)
        if len(temps) != len(self.dates):
            raise ValueError("dates and temperatures differ in length")
        if not np.all(np.isfinite(temps)):
            raise ValueError(f"{self.county_id}: non-finite temperature")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError(f"{self.county_id}: dates are not strictly increasing")
        object.__setattr__(self, "_years", np.array([d.year for d in self.dates], dtype=int))
        object.__setattr__(self, "_monthdays",
                           np.array([100 * d.month + d.day for d in self.dates], dtype=int))


def _window_mask(series: DailyTemperatureSeries, year: int, window: SeasonWindow) -> np.ndarray:
    lo = 100 * window.start[0] + window.start[1]
    hi = 100 * window.end[0] + window.end[1]
    md = series._monthdays
    return (series._years == year) & (md >= lo) & (md <= hi)


def count_high_heat_days(series: DailyTemperatureSeries, year: int,
                         window: SeasonWindow = GROWING_SEASON,
                         threshold: float = DEFAULT_THRESHOLD_F) -> int:
    """Days of ``year`` inside ``window`` whose mean temperature is strictly above ``threshold``.

    Missing days count as not hot (see ``missing_days``).  A window with no
    records at all yields 0 and a ``RuntimeWarning``.
    """
    if not math.isfinite(threshold):
        raise ValueError("threshold must be finite")
    mask = _window_mask(series, year, window)
    if not mask.any():
        warnings.warn(f"{series.county_id} {year}: no records inside the window", RuntimeWarning,
                      stacklevel=2)
        return 0
    return int(np.count_nonzero(series.temps[mask] > threshold))


def missing_days(series: DailyTemperatureSeries, year: int,
                 window: SeasonWindow = GROWING_SEASON) -> int:
    present = int(np.count_nonzero(_window_mask(series, year, window)))
    return len(window.days_in(year)) - present


@dataclass(frozen=True)
class HeatCount:
    county_id: str
    year: int
    days: int
    missing: int


def heat_day_table(series: Mapping[str, DailyTemperatureSeries], years: Sequence[int],
                   window: SeasonWindow = GROWING_SEASON,
                   threshold: float = DEFAULT_THRESHOLD_F) -> list[HeatCount]:
    out = []
    for county in sorted(series):
        s = series[county]
        present_years = {d.year for d in s.dates}
        for year in years:
            if year not in present_years:
                continue
            out.append(HeatCount(county, year, count_high_heat_days(s, year, window, threshold),
                                 missing_days(s, year, window)))
    return out


def build_log_income(corn_yield: float, price: float) -> float:
    """Natural log of revenue per acre, ``log(yield * price)``."""
    if not corn_yield > 0 or not price > 0:
        raise ValueError(f"yield and price must be positive, got {corn_yield}, {price}")
    return math.log(corn_yield) + math.log(price)


def incomes_from_yield(panel: Sequence[PanelObservation],
                       prices: Mapping[int, float]) -> dict[tuple[str, int], float]:
    """log income for every row that has a yield and a price for its year."""
    return {obs.key: build_log_income(obs.corn_yield, prices[obs.year])
            for obs in panel if obs.corn_yield is not None and obs.year in prices}


@dataclass(frozen=True)
class AttachReport:
    unmatched_heat: tuple[tuple[str, int], ...]
    unmatched_income: tuple[tuple[str, int], ...]
    n_rows: int

    @property
    def unmatched(self) -> tuple[tuple[str, int], ...]:
        return tuple(sorted(set(self.unmatched_heat) | set(self.unmatched_income)))

    @property
    def unmatched_fraction(self) -> float:
        return len(self.unmatched) / self.n_rows if self.n_rows else 0.0

    def format(self) -> str:
        lines = [f"rows: {self.n_rows}", f"unmatched: {len(self.unmatched)}"]
        lines += [f"  {c} {y} heat={'missing' if (c, y) in self.unmatched_heat else 'ok'} "
                  f"income={'missing' if (c, y) in self.unmatched_income else 'ok'}"
                  for c, y in self.unmatched]
        return "\n".join(lines) + "\n"


class KeyMismatchError(ValueError):
    pass


def attach_instrument(panel: Sequence[PanelObservation],
                      heat_counts: Mapping[tuple[str, int], int],
                      incomes: Mapping[tuple[str, int], float],
                      tolerance: float = 0.05) -> tuple[list[PanelObservation], AttachReport]:
    """Fill ``high_heat_days`` and ``log_income`` by ``(county_id, year)``.

    Unmatched rows keep their old values and are listed in the report; more
    than ``tolerance`` unmatched rows is an error.
    """
    out, miss_heat, miss_income = [], [], []
    for obs in panel:
        updates = {}
        if obs.key in heat_counts:
            updates["high_heat_days"] = int(heat_counts[obs.key])
        else:
            miss_heat.append(obs.key)
        if obs.key in incomes:
            updates["log_income"] = float(incomes[obs.key])
        else:
            miss_income.append(obs.key)
        out.append(replace(obs, **updates))
    report = AttachReport(tuple(miss_heat), tuple(miss_income), len(panel))
    if report.unmatched_fraction > tolerance:
        raise KeyMismatchError(
            f"{len(report.unmatched)} of {len(panel)} rows unmatched "
            f"({report.unmatched_fraction:.1%} > {tolerance:.1%})")
    return out, report


def load_daily_temperatures(path: str | Path) -> dict[str, DailyTemperatureSeries]:
    """CSV with columns ``county_id, date, tavg_f`` (ISO dates)."""
    records: dict[str, list[tuple[dt.date, float]]] = {}
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        for lineno, rec in enumerate(reader, start=2):
            try:
                day = dt.date.fromisoformat(rec["date"].strip())
                temp = float(rec["tavg_f"])
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            records.setdefault(rec["county_id"].strip(), []).append((day, temp))
    out = {}
    for county, rows in records.items():
        rows.sort()
        out[county] = DailyTemperatureSeries(county, tuple(d for d, _ in rows),
                                             np.array([t for _, t in rows]))
    return out


def write_daily_temperatures(series: Mapping[str, DailyTemperatureSeries], path: str | Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["county_id", "date", "tavg_f"])
        for county in sorted(series):
            s = series[county]
            for day, temp in zip(s.dates, s.temps):
                writer.writerow([county, day.isoformat(), repr(float(temp))])


def load_prices(path: str | Path) -> dict[int, float]:
    """CSV with columns ``year, price``."""
    out = {}
    with open(path, newline="") as handle:
        for lineno, rec in enumerate(csv.DictReader(handle), start=2):
            try:
                out[int(rec["year"])] = float(rec["price"])
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out
