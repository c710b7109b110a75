"""Normalized PV generation, per-slot quantile envelopes, forecast errors and
Monte-Carlo PV scenarios.

A scenario is the product of two independent draws: one historical day of
normalized generation (kept whole, so intra-day shape survives) and an
installed capacity in kWp.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

import numpy as np

from . import timegrid
from .empdist import SeededSampler, quantile, rws_index

QUANTILE_LEVELS = (10, 25, 50, 75, 90)
LOAD_FACTOR_TOLERANCE = 0.01


@dataclass(frozen=True, eq=False)
class NormalizedPVSeries:
    """Complete days of normalized generation, one row per day."""

    year: int
    days: np.ndarray        # day of year per row
    months: np.ndarray      # calendar month per row
    values: np.ndarray      # [day, slot]
    incomplete_days: tuple = ()
    load_factor_discrepancies: int = 0

    @property
    def fraction_above_one(self) -> float:
        return float((self.values > 1).mean()) if self.values.size else 0.0

    def month_pool(self, month: int) -> np.ndarray:
        return np.flatnonzero(self.months == month)


def normalize_generation(records, year: int | None = None) -> NormalizedPVSeries:
    """Divide measured generation by the monitored capacity of the same interval.

    Only days with all 96 intervals are kept; the rest are listed in
    ``incomplete_days``.  Where a load factor is supplied, intervals that
    differ from the computed ratio by more than 0.01 are counted.
    """
    records = list(records)
    if not records:
        raise ValueError("no PV records")
    if year is None:
        year = records[0].timestamp.year
    n_days = timegrid.days_in_year(year)
    grid = np.full((n_days, timegrid.SLOTS_PER_DAY), np.nan)
    lf_bad = 0
    for r in records:
        if r.monitored_capacity <= 0:
            raise ValueError(f"non-positive capacity at {r.timestamp}")
        v = r.measured_upscaled / r.monitored_capacity
        grid[r.day_of_year - 1, r.slot] = v
        if r.load_factor is not None and abs(v - r.load_factor) > LOAD_FACTOR_TOLERANCE:
            lf_bad += 1
    complete = ~np.isnan(grid).any(axis=1)
    seen = ~np.isnan(grid).all(axis=1)
    days = np.flatnonzero(complete) + 1
    return NormalizedPVSeries(
        year=year,
        days=days,
        months=np.asarray(timegrid.month_of_day(year, days), dtype=int),
        values=grid[complete],
        incomplete_days=tuple(int(d) + 1 for d in np.flatnonzero(seen & ~complete)),
        load_factor_discrepancies=lf_bad,
    )


@dataclass(frozen=True, eq=False)
class QuartileProfiles:
    scope: str              # "annual" or "month-<m>"
    levels: tuple
    values: np.ndarray      # [level, slot]
    n_days: int

    def rows(self) -> list[list]:
        out = [["slot", "hour"] + [f"q{lv:g}" for lv in self.levels]]
        for s in range(self.values.shape[1]):
            out.append([s, timegrid.slot_hour(s)] + [float(v) for v in self.values[:, s]])
        return out


def monthly_quartiles(series: NormalizedPVSeries, scope="annual",
                      levels=QUANTILE_LEVELS) -> QuartileProfiles:
    """Per-slot quantiles over all days in ``scope`` (a month 1-12 or ``"annual"``)."""
    if scope == "annual":
        pool = series.values
        label = "annual"
    else:
        m = int(scope)
        if not 1 <= m <= 12:
            raise ValueError(f"month out of range: {m}")
        pool = series.values[series.month_pool(m)]
        label = f"month-{m}"
    if len(pool) == 0:
        raise ValueError(f"no days in scope {label}")
    q = np.asarray(levels, dtype=float) / 100
    values = np.atleast_2d(quantile(pool, q, axis=0))
    return QuartileProfiles(label, tuple(levels), values, len(pool))


@dataclass(frozen=True)
class ForecastErrorReport:
    mse_week_ahead: float
    mse_day_ahead: float
    mse_hour_ahead: float
    ratio_wa_da: float
    ratio_da_ha: float
    p10_p90_coverage: float | None
    n_intervals: int
    daylight_only: bool = False

    def to_json(self, meta: dict | None = None) -> str:
        d = {"_meta": meta or {}}
        d.update(self.__dict__)
        return json.dumps(d, indent=2)


def _ratio(a: float, b: float) -> float:
    return a / b if b > 0 else math.inf


def forecast_errors(records, daylight_only: bool = False) -> ForecastErrorReport:
    """Mean squared error per forecast horizon and P10-P90 coverage.

    Averages run over intervals where the measurement and all three
    forecasts are present; ``daylight_only`` further restricts to intervals
    with positive measured generation.
    """
    records = list(records)
    cols = ("forecast_week_ahead", "forecast_day_ahead", "forecast_hour_ahead")
    for c in cols:
        if all(getattr(r, c) is None for r in records):
            raise ValueError(f"missing forecast column: {c}")
    meas = np.array([r.measured_upscaled for r in records], dtype=float)
    fc = {c: np.array([np.nan if getattr(r, c) is None else getattr(r, c) for r in records],
                      dtype=float) for c in cols}
    mask = ~np.isnan(meas)
    for c in cols:
        mask &= ~np.isnan(fc[c])
    if daylight_only:
        mask &= meas > 0
    if not mask.any():
        raise ValueError("no interval with measurement and all forecasts present")
    mse = {c: float(np.mean((fc[c][mask] - meas[mask]) ** 2)) for c in cols}

    p10 = np.array([np.nan if r.p10 is None else r.p10 for r in records], dtype=float)
    p90 = np.array([np.nan if r.p90 is None else r.p90 for r in records], dtype=float)
    band = ~np.isnan(p10) & ~np.isnan(p90) & ~np.isnan(meas)
    if daylight_only:
        band &= meas > 0
    coverage = float(np.mean((meas[band] >= p10[band]) & (meas[band] <= p90[band]))) if band.any() else None
    wa, da, ha = (mse[c] for c in cols)
    return ForecastErrorReport(wa, da, ha, _ratio(wa, da), _ratio(da, ha), coverage,
                               int(mask.sum()), daylight_only)


@dataclass(frozen=True)
class KwpDistribution:
    """Installed-capacity distribution: discrete ``{kWp: weight}`` or triangular."""

    form: str
    values: tuple = ()
    weights: tuple = ()
    minimum: float = 0.0
    mode: float = 0.0
    maximum: float = 0.0

    def __post_init__(self):
        if self.form == "discrete":
            if not self.values or len(self.values) != len(self.weights):
                raise ValueError("discrete kWp distribution needs matching values and weights")
            if any(v <= 0 for v in self.values) or any(w < 0 for w in self.weights):
                raise ValueError("kWp values must be positive and weights non-negative")
            s = sum(self.weights)
            if s <= 0:
                raise ValueError("kWp weights sum to zero")
            object.__setattr__(self, "weights", tuple(w / s for w in self.weights))
        elif self.form == "triangular":
            if not 0 < self.minimum <= self.mode <= self.maximum:
                raise ValueError("triangular kWp needs 0 < min <= mode <= max")
        else:
            raise ValueError(f"unknown kWp distribution form {self.form!r}")

    @classmethod
    def point(cls, kwp: float) -> KwpDistribution:
        return cls("discrete", (float(kwp),), (1.0,))

    @classmethod
    def discrete(cls, mapping: dict) -> KwpDistribution:
        items = sorted(mapping.items())
        return cls("discrete", tuple(float(k) for k, _ in items), tuple(float(w) for _, w in items))

    @classmethod
    def triangular(cls, lo: float, mode: float, hi: float) -> KwpDistribution:
        return cls("triangular", minimum=float(lo), mode=float(mode), maximum=float(hi))

    @classmethod
    def parse(cls, text: str) -> KwpDistribution:
        """Parse ``point:5``, ``tri:2,5,10`` or ``discrete:3=0.2,5=0.5,10=0.3``."""
        kind, _, rest = text.partition(":")
        kind = kind.strip().lower()
        try:
            if kind == "point":
                return cls.point(float(rest))
            if kind in ("tri", "triangular"):
                lo, mode, hi = (float(x) for x in rest.split(","))
                return cls.triangular(lo, mode, hi)
            if kind == "discrete":
                pairs = [re.split(r"[=:]", p) for p in rest.split(",") if p.strip()]
                return cls.discrete({float(k): float(w) for k, w in pairs})
        except ValueError as e:
            raise ValueError(f"bad kWp distribution {text!r}: {e}") from e
        raise ValueError(f"bad kWp distribution {text!r}")

    @property
    def mean(self) -> float:
        if self.form == "discrete":
            return float(np.dot(self.values, self.weights))
        return (self.minimum + self.mode + self.maximum) / 3

    def sample(self, sampler) -> float:
        u = sampler.uniform()
        if self.form == "discrete":
            return self.values[rws_index(np.cumsum(self.weights).tolist(), u)]
        a, c, b = self.minimum, self.mode, self.maximum
        if b == a:
            return a
        fc = (c - a) / (b - a)
        if u < fc:
            return a + math.sqrt(u * (b - a) * (c - a))
        return b - math.sqrt((1 - u) * (b - a) * (b - c))


@dataclass(frozen=True, eq=False)
class PVScenario:
    day_of_year: int
    month: int
    kwp: float
    power_kw: np.ndarray


def generate_pv_scenario(series: NormalizedPVSeries, month: int, kwp_dist: KwpDistribution,
                         sampler: SeededSampler) -> PVScenario:
    """One whole historical day from ``month`` scaled by a sampled capacity."""
    pool = series.month_pool(month)
    if len(pool) == 0:
        raise ValueError(f"no complete days for month {month}")
    row = pool[min(int(sampler.uniform() * len(pool)), len(pool) - 1)]
    kwp = kwp_dist.sample(sampler)
    return PVScenario(int(series.days[row]), month, kwp, kwp * series.values[row])


def generate_pv_batch(series, month: int, kwp_dist: KwpDistribution, n: int, seed: int) -> list[PVScenario]:
    if n < 1:
        raise ValueError("n must be >= 1")
    return [generate_pv_scenario(series, month, kwp_dist, SeededSampler(seed, k)) for k in range(n)]


def scenario_rows(scenarios) -> list[list]:
    n = len(scenarios[0].power_kw)
    rows = [["scenario", "day_of_year", "month", "kwp"] + [f"s{i}" for i in range(n)]]
    for k, s in enumerate(scenarios):
        rows.append([k, s.day_of_year, s.month, repr(float(s.kwp))] + [repr(float(v)) for v in s.power_kw])
    return rows
