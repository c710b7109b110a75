"""Quarter-hour calendar for a single analysis year.

Intervals are addressed by ``(day_of_year, slot)`` with 96 slots per day.
Timezone-aware timestamps are mapped onto fixed standard time (UTC+1) so
every day has exactly 96 slots and no DST gaps or duplicates appear.
"""

from __future__ import annotations

import datetime as dt

import numpy as np
import pandas as pd

SLOTS_PER_DAY = 96
SLOT_HOURS = 0.25
STANDARD_OFFSET = pd.Timedelta(hours=1)


def days_in_year(year: int) -> int:
    return 366 if (year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)) else 365


def intervals_in_year(year: int) -> int:
    return days_in_year(year) * SLOTS_PER_DAY


def month_of_day(year: int, day_of_year) -> np.ndarray | int:
    """Calendar month (1-12) of a 1-based day of year; vectorised over arrays."""
    starts = np.cumsum([0] + [
        (dt.date(year + (m == 12), m % 12 + 1, 1) - dt.date(year, m, 1)).days for m in range(1, 13)
    ])
    months = np.searchsorted(starts, np.asarray(day_of_year) - 1, side="right")
    return int(months) if np.ndim(months) == 0 else months


def slot_hour(slot) -> float | np.ndarray:
    """Interval-start hour of day for a slot index."""
    return slot * SLOT_HOURS


def timestamp_of(year: int, day_of_year: int, slot: int) -> dt.datetime:
    return dt.datetime(year, 1, 1) + dt.timedelta(days=day_of_year - 1, minutes=15 * slot)


def to_wall_clock(ts: pd.Series) -> pd.Series:
    """Aware timestamps -> naive fixed standard time; naive ones pass through."""
    if isinstance(ts.dtype, pd.DatetimeTZDtype):
        return ts.dt.tz_convert("UTC").dt.tz_localize(None) + STANDARD_OFFSET
    return ts


def calendar_keys(ts: pd.Series, year: int):
    """Return ``(day_of_year, slot, on_grid, in_year)`` arrays for timestamps.

    ``on_grid`` is False for timestamps not aligned to a quarter hour.
    Missing timestamps (NaT) come back with ``in_year`` False.
    """
    wall = to_wall_clock(ts)
    valid = wall.notna().to_numpy()
    doy = wall.dt.dayofyear.fillna(0).astype(int).to_numpy()
    hour = wall.dt.hour.fillna(0).astype(int).to_numpy()
    minute = wall.dt.minute.fillna(0).astype(int).to_numpy()
    second = wall.dt.second.fillna(0).astype(int).to_numpy()
    in_year = valid & (wall.dt.year.fillna(0).astype(int).to_numpy() == year)
    on_grid = (minute % 15 == 0) & (second == 0)
    slot = hour * 4 + minute // 15
    return doy, slot, on_grid, in_year
