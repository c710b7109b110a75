"""EV charging-session model and scenario generator.

The model is a chain of binned empirical distributions fitted on one set
of sessions:

    arrival                          pdf_arrival
    departure | arrival              cond_departure
    peak power                       pdf_peak_power
    charged energy | peak power      cond_energy
    charge time | (connection, peak power, energy)   joint_charge_time

A scenario draws arrival, then departure given arrival (connection time is
their difference modulo 24 h), then peak power and energy given power, and
finally charge time from the joint table.  A conditioning cell that was
never observed aborts the attempt and the draw starts again from arrival.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .empdist import (
    BinSpec,
    ConditionalTable,
    Histogram1D,
    JointConditionalTable,
    SeededSampler,
    build_conditional,
    build_histogram,
    build_joint_conditional,
    quantile,
    rws_index,
    rws_sample,
)

log = logging.getLogger(__name__)

SESSION_FIELDS = ("t_arr", "t_dep", "dt_conn", "dt_ch", "p_peak", "e_ch")
ENERGY_SLACK = 1e-6


@dataclass(frozen=True)
class EVBinConfig:
    """Discretisation of each session variable (defaults are a modelling choice)."""

    arrival: BinSpec = BinSpec(0.0, 1.0, 24, "hours")
    departure: BinSpec = BinSpec(0.0, 1.0, 24, "hours")
    connection: BinSpec = BinSpec(0.0, 0.5, 48, "hours")
    charge: BinSpec = BinSpec(0.0, 0.5, 48, "hours")
    peak_power: BinSpec = BinSpec(0.0, 1.0, 23, "kW")
    energy: BinSpec = BinSpec(0.0, 2.0, 45, "kWh")

    def to_dict(self) -> dict:
        return {k: v.to_dict() for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d: dict) -> EVBinConfig:
        return cls(**{k: BinSpec.from_dict(v) for k, v in d.items()})


# Coarse peak-power grouping for summaries: 0-4, 4-8, ... kW.
COARSE_POWER = BinSpec(0.0, 4.0, 6, "kW")


@dataclass(frozen=True)
class ChargingSession:
    t_arr: float
    t_dep: float
    dt_conn: float
    dt_ch: float
    p_peak: float
    e_ch: float

    def violations(self) -> list[str]:
        out = []
        if not (0 <= self.t_arr < 24 and 0 <= self.t_dep < 24):
            out.append("time of day out of range")
        if abs((self.t_dep - self.t_arr) % 24 - self.dt_conn) > 1e-9:
            out.append("connection time inconsistent with arrival/departure")
        if self.dt_ch > self.dt_conn:
            out.append("charge time exceeds connection time")
        if self.e_ch > self.p_peak * self.dt_ch + ENERGY_SLACK:
            out.append("energy exceeds peak power x charge time")
        if not 0 <= self.p_peak <= 23:
            out.append("peak power out of range")
        if self.dt_ch < 0 or self.e_ch < 0:
            out.append("negative charge time or energy")
        return out


def _hour_of_day(t) -> float:
    return t.hour + t.minute / 60 + t.second / 3600


def session_from_record(rec) -> ChargingSession:
    """Hour-of-day view of a raw session record."""
    t_arr = _hour_of_day(rec.arrival)
    t_dep = _hour_of_day(rec.departure)
    return ChargingSession(t_arr, t_dep, rec.connection_time, rec.charge_time,
                           rec.peak_power, rec.charged_energy)


@dataclass(frozen=True, eq=False)
class SessionModel:
    pdf_arrival: Histogram1D
    cond_departure: ConditionalTable
    pdf_peak_power: Histogram1D
    cond_energy: ConditionalTable
    joint_charge_time: JointConditionalTable
    bins: EVBinConfig
    n_sessions: int
    n_excluded: int = 0

    def summary(self) -> dict:
        return {
            "sessions_used": self.n_sessions,
            "sessions_excluded_out_of_range": self.n_excluded,
            "arrival_bins_occupied": len(self.pdf_arrival.nonempty_bins),
            "peak_power_bins_occupied": len(self.pdf_peak_power.nonempty_bins),
            "empty_departure_rows": len(self.cond_departure.empty_rows),
            "empty_energy_rows": len(self.cond_energy.empty_rows),
            "joint_cells": len(self.joint_charge_time),
        }


def _in_range(s: ChargingSession, b: EVBinConfig) -> bool:
    return all(spec.index(v) is not None for spec, v in (
        (b.arrival, s.t_arr), (b.departure, s.t_dep), (b.connection, s.dt_conn),
        (b.charge, s.dt_ch), (b.peak_power, s.p_peak), (b.energy, s.e_ch)))


def fit_session_model(sessions, bins: EVBinConfig | None = None) -> SessionModel:
    """Fit every distribution of the chain from the same set of sessions.

    Accepts :class:`ChargingSession` objects or raw ingest records.  Sessions
    with any variable outside its bin range are dropped from all tables so
    the tables stay mutually consistent; the count is kept on the model.
    """
    bins = bins or EVBinConfig()
    sessions = [s if isinstance(s, ChargingSession) else session_from_record(s) for s in sessions]
    if not sessions:
        raise ValueError("cannot fit a session model on zero sessions")
    used = [s for s in sessions if _in_range(s, bins)]
    if not used:
        raise ValueError("no session falls inside the configured bin ranges")
    if len(used) < len(sessions):
        log.info("excluded %d out-of-range sessions", len(sessions) - len(used))
    model = SessionModel(
        pdf_arrival=build_histogram([s.t_arr for s in used], bins.arrival),
        cond_departure=build_conditional([(s.t_arr, s.t_dep) for s in used],
                                         bins.arrival, bins.departure),
        pdf_peak_power=build_histogram([s.p_peak for s in used], bins.peak_power),
        cond_energy=build_conditional([(s.p_peak, s.e_ch) for s in used],
                                      bins.peak_power, bins.energy),
        joint_charge_time=build_joint_conditional(
            [(s.dt_conn, s.p_peak, s.e_ch, s.dt_ch) for s in used],
            (bins.connection, bins.peak_power, bins.energy), bins.charge),
        bins=bins,
        n_sessions=len(used),
        n_excluded=len(sessions) - len(used),
    )
    return model


class GenerationError(RuntimeError):
    def __init__(self, msg: str, diagnostics: dict):
        super().__init__(f"{msg}: {diagnostics}")
        self.diagnostics = diagnostics


@dataclass
class GenerationOptions:
    peak_sampling: str = "marginal"   # or "uniform" over non-empty bins
    max_attempts: int = 1000
    jitter_retries: int = 10
    midpoint: bool = False


def _draw_peak(model: SessionModel, sampler, opts: GenerationOptions) -> tuple[int, float]:
    h = model.pdf_peak_power
    if opts.peak_sampling == "uniform":
        nz = h.nonempty_bins
        i = nz[min(int(sampler.uniform() * len(nz)), len(nz) - 1)]
    elif opts.peak_sampling == "marginal":
        i = rws_index(h._cum, sampler.uniform())
    else:
        raise ValueError(f"unknown peak sampling mode {opts.peak_sampling!r}")
    return i, _place(h.spec, i, sampler, opts)


def _place(spec: BinSpec, i: int, sampler, opts: GenerationOptions) -> float:
    return spec.midpoint(i) if opts.midpoint else spec.value_in_bin(i, sampler.uniform())


def generate_session(model: SessionModel, sampler: SeededSampler,
                     max_attempts: int | None = None,
                     options: GenerationOptions | None = None) -> tuple[ChargingSession, int]:
    """Draw one consistent session; returns ``(session, attempts)``.

    An attempt is one pass through the chain.  It fails on an unseen joint
    cell, or when ``jitter_retries`` re-placements inside the chosen bins
    cannot satisfy charge <= connection and energy <= power x charge time.
    """
    opts = options or GenerationOptions()
    max_attempts = max_attempts or opts.max_attempts
    b = model.bins
    no_cell = jitter_fail = 0
    for attempt in range(1, max_attempts + 1):
        i_a = rws_index(model.pdf_arrival._cum, sampler.uniform())
        t_arr = _place(b.arrival, i_a, sampler, opts)
        t_dep = rws_sample(model.cond_departure.row(i_a), sampler, opts.midpoint)
        dt_conn = (t_dep - t_arr) % 24.0
        i_p, p_peak = _draw_peak(model, sampler, opts)
        i_e = rws_index(model.cond_energy.row(i_p)._cum, sampler.uniform())
        e_ch = _place(b.energy, i_e, sampler, opts)
        i_c = b.connection.index(dt_conn)
        cell = model.joint_charge_time.lookup((i_c, i_p, i_e)) if i_c is not None else None
        if not cell:
            no_cell += 1
            continue
        i_t = rws_index(cell._cum, sampler.uniform())
        dt_ch = _place(b.charge, i_t, sampler, opts)
        for _ in range(opts.jitter_retries):
            if dt_ch <= dt_conn and e_ch <= p_peak * dt_ch + ENERGY_SLACK:
                return ChargingSession(t_arr, t_dep, dt_conn, dt_ch, p_peak, e_ch), attempt
            if opts.midpoint:
                break
            p_peak = _place(b.peak_power, i_p, sampler, opts)
            e_ch = _place(b.energy, i_e, sampler, opts)
            dt_ch = _place(b.charge, i_t, sampler, opts)
        jitter_fail += 1
    raise GenerationError("max_attempts exhausted", {
        "attempts": max_attempts, "unseen_joint_cell": no_cell, "inconsistent_jitter": jitter_fail,
        "seed": getattr(sampler, "seed", None), "stream_id": getattr(sampler, "stream_id", None)})


@dataclass
class Batch:
    sessions: list
    attempts: list
    seed: int

    @property
    def stats(self) -> dict:
        a = np.asarray(self.attempts)
        return {"n": len(a), "total_attempts": int(a.sum()), "restarted": int((a > 1).sum()),
                "max_attempts_used": int(a.max())}


def generate_batch(model: SessionModel, n: int, seed: int,
                   options: GenerationOptions | None = None, threads: int = 1) -> Batch:
    """``n`` sessions; scenario ``k`` uses sampler stream ``k``.

    Output is independent of ``threads`` since every scenario owns its stream
    and results are collected in scenario order.
    """
    if n < 1:
        raise ValueError("n must be >= 1")

    def one(k):
        return generate_session(model, SeededSampler(seed, k), options=options)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(one, range(n)))
    else:
        results = [one(k) for k in range(n)]
    return Batch([s for s, _ in results], [a for _, a in results], seed)


def sessions_to_csv(sessions, header_lines: tuple = ()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SESSION_FIELDS)
    for s in sessions:
        w.writerow([repr(float(getattr(s, f))) for f in SESSION_FIELDS])
    return buf.getvalue()


def sessions_to_json(sessions, meta: dict | None = None) -> str:
    doc = {"_meta": meta or {}, "sessions": [asdict(s) for s in sessions]}
    return json.dumps(doc, indent=1)


@dataclass(frozen=True, eq=False)
class PowerProfile:
    """Per-slot average power (kW) over a two-day window starting at midnight.

    The second day only holds charging that spills past midnight.
    """

    resolution: int
    power_kw: np.ndarray

    @property
    def slot_hours(self) -> float:
        return self.resolution / 60

    @property
    def slots_per_day(self) -> int:
        return 1440 // self.resolution

    def energy_kwh(self) -> float:
        return float(self.power_kw.sum() * self.slot_hours)

    def daily(self) -> np.ndarray:
        """Fold the spill-over day back onto the first (daily recurring view)."""
        k = self.slots_per_day
        return self.power_kw[:k] + self.power_kw[k:]


def synthesize_power_profile(session: ChargingSession, resolution: int = 15) -> PowerProfile:
    """Uncontrolled charging: constant ``E/dt_ch`` from arrival until the energy is in.

    Partially covered slots get the prorated average power.
    """
    if 1440 % resolution:
        raise ValueError("resolution must divide a day")
    n = 2 * 1440 // resolution
    h = resolution / 60
    power = np.zeros(n)
    if session.e_ch > 0:
        if session.dt_ch <= 0:
            raise ValueError("positive energy with zero charge time")
        p_avg = session.e_ch / session.dt_ch
        a, b = session.t_arr, session.t_arr + session.dt_ch
        lo = np.arange(n) * h
        overlap = np.clip(np.minimum(lo + h, b) - np.maximum(lo, a), 0.0, None)
        power = p_avg * overlap / h
    return PowerProfile(resolution, power)


FANCHART_LEVELS = (5, 25, 50, 75, 95)


@dataclass(frozen=True, eq=False)
class FanchartTable:
    levels: tuple
    values: np.ndarray  # [level, slot]
    resolution: int

    def rows(self) -> list[list]:
        out = [["slot", "hour"] + [f"p{lv:g}" for lv in self.levels]]
        for s in range(self.values.shape[1]):
            out.append([s, s * self.resolution / 60] + [float(v) for v in self.values[:, s]])
        return out


def fanchart(profiles, levels=FANCHART_LEVELS, fold: bool = False) -> FanchartTable:
    """Per-slot percentiles across scenarios (type-7 interpolation).

    With ``fold=True`` each profile's spill-over day is folded back onto the
    first, giving a 24 h view.
    """
    profiles = list(profiles)
    if not profiles:
        raise ValueError("fanchart needs at least one profile")
    res = {p.resolution for p in profiles}
    if len(res) != 1:
        raise ValueError(f"mixed resolutions: {sorted(res)}")
    data = np.stack([p.daily() if fold else p.power_kw for p in profiles])
    q = np.asarray(levels, dtype=float) / 100
    values = np.atleast_2d(quantile(data, q, axis=0))
    return FanchartTable(tuple(levels), values, res.pop())
