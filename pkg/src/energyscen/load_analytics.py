"""Consumer pool analytics for quarter-hourly net-load profiles.

Net load is kWh per 15-minute interval with consumption positive and
injection negative; power is ``kWh * 4``.  Consumers are labelled with one
of five disjoint types:

    1  no PV, EV or HP
    2  PV only
    3  EV only
    4  PV and HP, no EV
    5  EV and PV, no HP
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass, field, fields
from typing import TYPE_CHECKING

import numpy as np

from . import timegrid

if TYPE_CHECKING:
    from .ingest import WeatherRecord

CONSUMER_TYPES = (1, 2, 3, 4, 5)

# Derived pools are unions of whole types.
DERIVED_POOLS = {
    "pv": (2, 4, 5),
    "ev": (3, 5),
    "no_ev_given_pv": (2, 4),
    "no_hp_given_pv": (2, 5),
}

# Conditional rows are normalised by their conditioning pool, not the population.
CONDITIONED_ON = {"no_ev_given_pv": "pv", "no_hp_given_pv": "pv"}

POOL_LABELS = {
    "all": "Total # consumers",
    "type1": "Type 1: no PV, EV, HP",
    "type2": "Type 2: only PV",
    "type3": "Type 3: only EV",
    "type4": "Type 4: with HP, PV",
    "type5": "Type 5: with EV, PV",
    "pv": "Consumers with PV",
    "ev": "Consumers with EV",
    "no_ev_given_pv": "P(no EV given PV)",
    "no_hp_given_pv": "P(no HP given PV)",
}


@dataclass(eq=False)
class ConsumerProfile:
    consumer_id: str
    consumer_type: int
    net_kwh: np.ndarray
    year: int = 2022

    def __post_init__(self):
        self.net_kwh = np.asarray(self.net_kwh, dtype=float)
        if self.consumer_type not in CONSUMER_TYPES:
            raise ValueError(f"unknown consumer type {self.consumer_type}")
        expected = timegrid.intervals_in_year(self.year)
        if self.net_kwh.shape != (expected,):
            raise ValueError(f"consumer {self.consumer_id}: expected {expected} intervals, "
                             f"got {self.net_kwh.shape}")

    def __eq__(self, other):
        if not isinstance(other, ConsumerProfile):
            return NotImplemented
        return (self.consumer_id == other.consumer_id and self.consumer_type == other.consumer_type
                and self.year == other.year and np.array_equal(self.net_kwh, other.net_kwh))


@dataclass(frozen=True)
class ConsumerMetadata:
    consumer_id: str
    consumer_type: int
    annual_net_kwh: float
    peak_kw: float
    peak_time: float
    peak_month: int
    peak_day_of_year: int
    reverse_peak_kw: float
    reverse_peak_time: float
    reverse_peak_month: int
    reverse_peak_day_of_year: int


def consumer_metadata(profile: ConsumerProfile) -> ConsumerMetadata:
    """Annual net energy and the timing of the annual peak and reverse peak.

    Ties go to the earliest interval of the year.  Times are the interval
    start as fractional hour of day.
    """
    net = profile.net_kwh
    ipk = int(np.argmax(net))
    irv = int(np.argmin(net))
    day_pk, slot_pk = divmod(ipk, timegrid.SLOTS_PER_DAY)
    day_rv, slot_rv = divmod(irv, timegrid.SLOTS_PER_DAY)
    return ConsumerMetadata(
        consumer_id=profile.consumer_id,
        consumer_type=profile.consumer_type,
        annual_net_kwh=float(net.sum()),
        peak_kw=float(net[ipk] * 4),
        peak_time=timegrid.slot_hour(slot_pk),
        peak_month=timegrid.month_of_day(profile.year, day_pk + 1),
        peak_day_of_year=day_pk + 1,
        reverse_peak_kw=float(net[irv] * 4),
        reverse_peak_time=timegrid.slot_hour(slot_rv),
        reverse_peak_month=timegrid.month_of_day(profile.year, day_rv + 1),
        reverse_peak_day_of_year=day_rv + 1,
    )


@dataclass(frozen=True)
class PoolSummary:
    """One row of the pool summary table.

    ``mode_*_time`` is the most common 1-hour bin (its start hour);
    ``mean_*_time`` is the plain average, emitted alongside because
    fractional table entries suggest averaging may have been used.
    """

    label: str
    consumer_count: int
    probability: float
    mean_net_kwh: float
    max_net_kwh: float
    min_net_kwh: float
    mean_peak_kw: float
    mean_reverse_kw: float
    mode_peak_time: int
    mode_peak_month: int
    mode_reverse_peak_time: int
    mode_reverse_peak_month: int
    mean_peak_time: float
    mean_reverse_peak_time: float


TABLE1_COLUMNS = (
    ("label", ""), ("consumer_count", "# Consumers"), ("probability", "Probability"),
    ("mean_net_kwh", "Mean Net load (kWh)"), ("max_net_kwh", "Max Net kWh"),
    ("min_net_kwh", "Min Net kWh"), ("mean_peak_kw", "Mean Peak kW"),
    ("mean_reverse_kw", "Mean Reverse kW"), ("mode_peak_time", "Mode Peak time"),
    ("mode_peak_month", "Peak month"), ("mode_reverse_peak_time", "Reverse peak time"),
    ("mode_reverse_peak_month", "Reverse peak month"),
    ("mean_peak_time", "Mean peak time"), ("mean_reverse_peak_time", "Mean reverse peak time"),
)


def _mode(values: Iterable[int]) -> int:
    # most common value; smallest wins a tie
    c = Counter(values)
    best = max(c.values())
    return min(v for v, n in c.items() if n == best)


def _as_metadata(pool) -> list[ConsumerMetadata]:
    return [m if isinstance(m, ConsumerMetadata) else consumer_metadata(m) for m in pool]


def pool_summary(pool, total_population: int, label: str = "") -> PoolSummary:
    """Summarise a pool of profiles (or precomputed metadata)."""
    meta = _as_metadata(pool)
    if not meta:
        raise ValueError("cannot summarise an empty pool")
    if total_population < len(meta):
        raise ValueError("total_population smaller than pool")
    nets = np.array([m.annual_net_kwh for m in meta])
    return PoolSummary(
        label=label,
        consumer_count=len(meta),
        probability=len(meta) / total_population,
        mean_net_kwh=float(nets.mean()),
        max_net_kwh=float(nets.max()),
        min_net_kwh=float(nets.min()),
        mean_peak_kw=float(np.mean([m.peak_kw for m in meta])),
        mean_reverse_kw=float(np.mean([m.reverse_peak_kw for m in meta])),
        mode_peak_time=_mode(int(m.peak_time) for m in meta),
        mode_peak_month=_mode(m.peak_month for m in meta),
        mode_reverse_peak_time=_mode(int(m.reverse_peak_time) for m in meta),
        mode_reverse_peak_month=_mode(m.reverse_peak_month for m in meta),
        mean_peak_time=float(np.mean([m.peak_time for m in meta])),
        mean_reverse_peak_time=float(np.mean([m.reverse_peak_time for m in meta])),
    )


def derived_pools(profiles) -> dict[str, list]:
    """Named pools: ``all``, ``type1``..``type5`` and the PV/EV unions.

    Works on profiles or metadata alike; members keep input order.
    """
    items = list(profiles)
    pools = {"all": items}
    for t in CONSUMER_TYPES:
        pools[f"type{t}"] = [p for p in items if p.consumer_type == t]
    for name, types in DERIVED_POOLS.items():
        pools[name] = [p for p in items if p.consumer_type in types]
    return pools


def summary_table(profiles) -> list[PoolSummary]:
    """Every pool's summary in table row order; empty pools are skipped.

    Probability is count over the population, except for the conditional
    rows, which divide by the size of the conditioning pool.
    """
    meta = sorted(_as_metadata(profiles), key=lambda m: m.consumer_id)
    pools = derived_pools(meta)
    out = []
    for name, label in POOL_LABELS.items():
        if not pools[name]:
            continue
        denom = len(pools[CONDITIONED_ON.get(name, "all")])
        out.append(pool_summary(pools[name], denom, label))
    return out


def table_rows(summaries: list[PoolSummary]) -> list[list]:
    header = [title or "pool" for _, title in TABLE1_COLUMNS]
    rows = [header]
    for s in summaries:
        rows.append([getattr(s, name) for name, _ in TABLE1_COLUMNS])
    return rows


@dataclass(frozen=True, eq=False)
class DayHistogram:
    kind: str
    counts: np.ndarray  # index 0 is day 1
    pool_size: int

    def __post_init__(self):
        if self.kind not in ("peak", "reverse_peak"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if int(np.sum(self.counts)) != self.pool_size:
            raise ValueError("day histogram total does not match pool size")

    def count(self, day: int) -> int:
        return int(self.counts[day - 1])


def peak_day_distribution(pool, kind: str = "peak", year: int | None = None) -> DayHistogram:
    """Number of consumers whose annual (reverse) peak falls on each day."""
    if kind not in ("peak", "reverse_peak", "reverse"):
        raise ValueError(f"unknown kind {kind!r}")
    pool = list(pool)
    meta = _as_metadata(pool)
    if year is None:
        year = next((p.year for p in pool if isinstance(p, ConsumerProfile)), 2022)
    days = [m.peak_day_of_year if kind == "peak" else m.reverse_peak_day_of_year for m in meta]
    counts = np.bincount(np.asarray(days, dtype=int) - 1, minlength=timegrid.days_in_year(year))
    return DayHistogram("peak" if kind == "peak" else "reverse_peak", counts, len(meta))


@dataclass(frozen=True)
class RepresentativeWeek:
    start_day: int
    end_day: int
    count: int
    fraction: float

    def __post_init__(self):
        if not 1 <= self.start_day <= self.end_day:
            raise ValueError("invalid window")


def worst_week(hist: DayHistogram, window_days: int = 7) -> RepresentativeWeek:
    """Window of ``window_days`` consecutive days holding the most peaks.

    Windows stay inside the year; the earliest start wins a tie.
    """
    if window_days < 1:
        raise ValueError("window_days must be >= 1")
    counts = np.asarray(hist.counts, dtype=np.int64)
    w = min(window_days, len(counts))
    cs = np.concatenate([[0], np.cumsum(counts)])
    sums = cs[w:] - cs[:-w]
    start = int(np.argmax(sums))  # argmax returns the first maximum
    count = int(sums[start])
    frac = count / hist.pool_size if hist.pool_size else 0.0
    return RepresentativeWeek(start + 1, start + w, count, frac)


@dataclass(frozen=True)
class DayWeather:
    day_of_year: int
    n_records: int
    mean_temp: float
    total_rainfall: float
    daylight_ghi_sum: float


@dataclass
class WeatherSlice:
    week: RepresentativeWeek
    records: list
    daily: list = field(default_factory=list)


def align_weather(weather: list[WeatherRecord], week: RepresentativeWeek) -> WeatherSlice:
    """Weather records falling in the week plus per-day aggregates.

    ``daylight_ghi_sum`` adds up GHI samples where GHI is positive (W/m2
    per sample, not converted to energy since sampling rates differ).
    """
    inside = [r for r in weather if week.start_day <= r.day_of_year <= week.end_day]
    if not inside:
        raise ValueError(f"no weather records between days {week.start_day} and {week.end_day}")
    inside.sort(key=lambda r: r.timestamp)
    by_day: dict[int, list] = {}
    for r in inside:
        by_day.setdefault(r.day_of_year, []).append(r)
    daily = [
        DayWeather(
            day_of_year=d,
            n_records=len(rs),
            mean_temp=float(np.mean([r.ambient_temp for r in rs])),
            total_rainfall=float(np.sum([r.rainfall for r in rs])),
            daylight_ghi_sum=float(np.sum([r.ghi for r in rs if r.ghi > 0])),
        )
        for d, rs in sorted(by_day.items())
    ]
    return WeatherSlice(week, inside, daily)


def metadata_rows(meta: list[ConsumerMetadata]) -> list[list]:
    names = [f.name for f in fields(ConsumerMetadata)]
    return [names] + [[getattr(m, n) for n in names] for m in meta]
