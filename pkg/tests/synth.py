"""Synthetic inputs shared by the test modules."""

from __future__ import annotations

import datetime as dt

import numpy as np

from energyscen import timegrid
from energyscen.ev_scenario import ChargingSession
from energyscen.ingest import Schema
from energyscen.load_analytics import ConsumerProfile

EV_TEST_SCHEMA = Schema(columns={
    "session_id": "id", "arrival": "arrival", "departure": "departure",
    "connection_time": "conn", "charge_time": "charge", "peak_power": "peak",
    "charged_energy": "energy",
})

LOAD_TEST_SCHEMA = Schema(columns={
    "consumer_id": "id", "consumer_type": "type", "interval_start": "start",
    "offtake": "offtake", "injection": "injection",
}, delimiter=";")


def random_sessions(rng: np.random.Generator, n: int) -> list[ChargingSession]:
    """Sessions that satisfy every invariant with some margin."""
    out = []
    for _ in range(n):
        t_arr = rng.integers(0, 96) / 4
        conn = float(rng.uniform(1.0, 14.0))
        ch = float(rng.uniform(0.2, 0.8)) * conn
        p = float(rng.uniform(1.5, 22.0))
        e = min(float(rng.uniform(0.1, 0.7)) * p * ch, 89.0)
        out.append(ChargingSession(t_arr, (t_arr + conn) % 24, conn, ch, p, e))
    return out


def ev_csv(rows: list[tuple]) -> str:
    """``rows`` are (id, arrival, departure, conn, charge, peak, energy) string tuples."""
    lines = ["id,arrival,departure,conn,charge,peak,energy"]
    lines += [",".join(str(x) for x in r) for r in rows]
    return "\n".join(lines) + "\n"


def load_csv(consumers: list[tuple[str, int, np.ndarray, np.ndarray]], year: int = 2022,
             drop: dict | None = None) -> str:
    """Fluvius-like file; ``drop`` maps consumer id -> interval indices to omit."""
    drop = drop or {}
    start = dt.datetime(year, 1, 1)
    stamps = [(start + dt.timedelta(minutes=15 * i)).strftime("%Y-%m-%dT%H:%M:%S")
              for i in range(timegrid.intervals_in_year(year))]
    lines = ["id;type;start;offtake;injection"]
    for cid, ctype, off, inj in consumers:
        skip = set(drop.get(cid, ()))
        lines += [f"{cid};{ctype};{stamps[i]};{off[i]:.3f};{inj[i]:.3f}"
                  for i in range(len(stamps)) if i not in skip]
    return "\n".join(lines) + "\n"


def profile_with(values: dict[int, float], cid="c", ctype=1, base=0.0, year=2022) -> ConsumerProfile:
    """Profile at ``base`` kWh everywhere except the given interval indices."""
    net = np.full(timegrid.intervals_in_year(year), base)
    for i, v in values.items():
        net[i] = v
    return ConsumerProfile(cid, ctype, net, year)


def interval(day: int, hour: float) -> int:
    return (day - 1) * 96 + int(round(hour * 4))


class FixedSampler:
    """Sampler stub replaying a fixed list of uniforms."""

    def __init__(self, values):
        self.values = list(values)

    def uniform(self) -> float:
        return self.values.pop(0)
