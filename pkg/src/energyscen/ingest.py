"""Parsing and validation of the EV, PV, load and weather source files.

Every loader reads a delimited text file with a header row, maps provider
headers onto canonical roles through a :class:`Schema`, and splits the
rows into accepted records and a rejection list (file line number plus a
reason).  A load aborts when more than ``max_reject_fraction`` of the rows
are rejected, which usually means the column mapping is wrong.

The load-profile pool can be written to a compact binary store; see
``docs/formats.md`` for the byte layout.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import hashlib
import io
import json
import logging
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import timegrid
from .load_analytics import ConsumerProfile

log = logging.getLogger(__name__)


class IngestError(Exception):
    """File unreadable, or too many rows rejected."""


class SchemaError(IngestError):
    """Required columns missing from the header."""


class ChecksumError(IngestError):
    """Compact store content does not match its recorded checksum."""


@dataclass(frozen=True)
class Schema:
    """Declarative mapping of canonical roles to provider column headers.

    ``columns`` maps role -> header.  Roles listed in ``optional`` may be
    absent from the file.  ``source_tz`` localises naive timestamps; if
    ``local_tz`` is set, timestamps are converted to that zone and the
    timezone is dropped (hour-of-day analyses want local wall time).
    """

    columns: dict
    delimiter: str = ","
    datetime_format: str | None = None
    source_tz: str | None = None
    local_tz: str | None = None
    optional: tuple = ()
    max_reject_fraction: float = 0.10
    year: int = 2022
    units: str = "kwh"          # load files: "kwh" per interval or "kw" average power
    decimals: int = 3           # native precision of load energies (kWh)
    load_factor_scale: float = 1.0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["optional"] = list(self.optional)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Schema:
        d = dict(d)
        d["optional"] = tuple(d.get("optional", ()))
        return cls(**d)


# Defaults for the providers' published formats.  Header names are not given
# anywhere authoritative; override through the run config when they drift.
ELAAD_SCHEMA = Schema(
    columns={
        "session_id": "TransactionId",
        "arrival": "UTCTransactionStart",
        "departure": "UTCTransactionStop",
        "connection_time": "ConnectedTime",
        "charge_time": "ChargeTime",
        "charged_energy": "TotalEnergy",
        "peak_power": "MaxPower",
    },
    source_tz="UTC",
    local_tz="Europe/Amsterdam",
)

ELIA_PV_SCHEMA = Schema(
    columns={
        "timestamp": "Datetime",
        "measured_upscaled": "Measured & Upscaled",
        "forecast_week_ahead": "Week-ahead forecast",
        "forecast_day_ahead": "Day Ahead 11AM forecast",
        "forecast_hour_ahead": "Most recent forecast",
        "p10": "Most recent P10",
        "p90": "Most recent P90",
        "monitored_capacity": "Monitored capacity",
        "load_factor": "Load factor",
    },
    delimiter=";",
    optional=("forecast_week_ahead", "forecast_day_ahead", "forecast_hour_ahead",
              "p10", "p90", "load_factor"),
    load_factor_scale=0.01,
)

FLUVIUS_SCHEMA = Schema(
    columns={
        "consumer_id": "EAN_ID",
        "consumer_type": "type",
        "interval_start": "Datum_Startuur",
        "offtake": "Volume_Afname_kWh",
        "injection": "Volume_Injectie_kWh",
    },
    delimiter=";",
)

WEATHER_SCHEMA = Schema(
    columns={
        "timestamp": "timestamp",
        "ambient_temp": "ambient_temp",
        "wind_speed": "wind_speed",
        "humidity": "humidity",
        "wind_direction": "wind_direction",
        "ghi": "ghi",
        "dhi": "dhi",
        "rainfall": "rainfall",
    },
)

# Canonical layouts written by ``energyscen ingest`` (role names as headers).
CANONICAL_EV_SCHEMA = Schema(columns={r: r for r in ELAAD_SCHEMA.columns})
CANONICAL_PV_SCHEMA = Schema(columns={r: r for r in ELIA_PV_SCHEMA.columns},
                             optional=ELIA_PV_SCHEMA.optional)

DEFAULT_SCHEMAS = {"ev": ELAAD_SCHEMA, "pv": ELIA_PV_SCHEMA, "load": FLUVIUS_SCHEMA,
                   "weather": WEATHER_SCHEMA}


@dataclass(frozen=True)
class RawSessionRecord:
    session_id: str
    arrival: dt.datetime
    departure: dt.datetime
    connection_time: float
    charge_time: float
    peak_power: float
    charged_energy: float


@dataclass(frozen=True)
class RawPVRecord:
    timestamp: dt.datetime
    day_of_year: int
    slot: int
    measured_upscaled: float
    monitored_capacity: float
    forecast_week_ahead: float | None = None
    forecast_day_ahead: float | None = None
    forecast_hour_ahead: float | None = None
    p10: float | None = None
    p90: float | None = None
    load_factor: float | None = None


@dataclass(frozen=True)
class WeatherRecord:
    timestamp: dt.datetime
    day_of_year: int
    ambient_temp: float
    wind_speed: float
    humidity: float
    wind_direction: float
    ghi: float
    dhi: float
    rainfall: float


@dataclass(frozen=True)
class Rejection:
    line: int
    reason: str


@dataclass
class IngestResult:
    """Accepted records plus the rows that were turned away."""

    records: list
    rejected: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    input_rows: int = 0

    def __post_init__(self):
        if not self.input_rows:
            self.input_rows = len(self.records) + len(self.rejected)


# -- helpers --------------------------------------------------------------------


def _read_frame(path, schema: Schema, dtype=str) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"unreadable file: {path}")
    try:
        skip = _leading_comment_lines(path)
        df = pd.read_csv(path, sep=schema.delimiter, dtype=dtype, keep_default_na=False,
                         skipinitialspace=True, skiprows=skip)
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestError(f"unreadable file {path}: {e}") from e
    missing = [role for role, col in schema.columns.items()
               if col not in df.columns and role not in schema.optional]
    if missing:
        raise SchemaError(
            f"header mismatch in {path.name}: missing "
            + ", ".join(f"{schema.columns[r]!r} ({r})" for r in missing))
    df.attrs["first_line"] = skip + 2
    return df


def _leading_comment_lines(path: Path) -> int:
    # metadata header lines ("# ...") written by this tool's own exports
    n = 0
    with open(path, encoding="utf-8", errors="replace") as f:
        for line in f:
            if not line.startswith("#"):
                break
            n += 1
    return n


def _numeric(df: pd.DataFrame, schema: Schema, role: str) -> pd.Series:
    col = schema.columns.get(role)
    if col is None or col not in df.columns:
        return pd.Series(np.nan, index=df.index)
    s = df[col]
    if s.dtype == object:
        s = s.str.strip()
    return pd.to_numeric(s, errors="coerce")


def _has_offset(values: pd.Series) -> bool:
    sample = values.dropna()
    sample = sample[sample.astype(str).str.len() > 0]
    if sample.empty:
        return False
    return bool(sample.astype(str).str.contains(r"(?:Z|[+-]\d{2}:?\d{2})$", regex=True).any())


def _timestamps(df: pd.DataFrame, schema: Schema, role: str) -> pd.Series:
    raw = df[schema.columns[role]].astype(str).str.strip().replace("", None)
    fmt = schema.datetime_format or "ISO8601"
    if _has_offset(raw):
        ts = pd.to_datetime(raw, format=fmt, errors="coerce", utc=True)
    else:
        ts = pd.to_datetime(raw, format=fmt, errors="coerce")
        if schema.source_tz:
            ts = ts.dt.tz_localize(schema.source_tz, ambiguous="NaT", nonexistent="NaT")
    if schema.local_tz and isinstance(ts.dtype, pd.DatetimeTZDtype):
        ts = ts.dt.tz_convert(schema.local_tz).dt.tz_localize(None)
    return ts


class _Rejector:
    """First-failing-check-wins reason bookkeeping for a frame."""

    def __init__(self, df: pd.DataFrame):
        self.reason = np.full(len(df), None, dtype=object)
        self.first_line = df.attrs.get("first_line", 2)

    def check(self, bad, reason: str):
        bad = np.asarray(bad, dtype=bool)
        self.reason[bad & (self.reason == None)] = reason

    @property
    def ok(self) -> np.ndarray:
        return self.reason == None

    def rejections(self) -> list[Rejection]:
        return [Rejection(int(i) + self.first_line, str(r)) for i, r in enumerate(self.reason) if r is not None]


def _finish(records, rej: _Rejector, schema: Schema, path, warnings=None) -> IngestResult:
    rejected = rej.rejections()
    n = len(rej.reason)
    if n and len(rejected) / n > schema.max_reject_fraction:
        summary = ", ".join(f"{r}: {c}" for r, c in Counter(x.reason for x in rejected).most_common())
        raise IngestError(
            f"{Path(path).name}: {len(rejected)}/{n} rows rejected "
            f"(> {schema.max_reject_fraction:.0%}): {summary}")
    for w in warnings or ():
        log.warning(w)
    return IngestResult(records, rejected, list(warnings or ()), n)


def _opt(x: float) -> float | None:
    return None if np.isnan(x) else float(x)


# -- loaders --------------------------------------------------------------------


def load_ev_dataset(path, schema: Schema = ELAAD_SCHEMA) -> IngestResult:
    """Parse EV charging sessions into :class:`RawSessionRecord` objects."""
    df = _read_frame(path, schema)
    rej = _Rejector(df)
    arr = _timestamps(df, schema, "arrival")
    dep = _timestamps(df, schema, "departure")
    conn = _numeric(df, schema, "connection_time")
    chg = _numeric(df, schema, "charge_time")
    peak = _numeric(df, schema, "peak_power")
    energy = _numeric(df, schema, "charged_energy")

    rej.check(arr.isna(), "unparsable arrival")
    rej.check(dep.isna(), "unparsable departure")
    for name, s in (("connection_time", conn), ("charge_time", chg),
                    ("peak_power", peak), ("charged_energy", energy)):
        rej.check(s.isna(), f"unparsable {name}")
    rej.check((dep < arr).fillna(False), "departure before arrival")
    rej.check((conn < 0) | (chg < 0), "negative duration")
    rej.check(chg > conn + 0.01, "charge exceeds connection")
    rej.check((peak < 0) | (peak > 23), "peak power out of range")
    rej.check(energy < 0, "negative charged energy")
    rej.check(conn >= 24, "multi-day session out of range")

    ids = df[schema.columns["session_id"]].astype(str)
    ok = rej.ok
    records = [
        RawSessionRecord(ids.iat[i], arr.iat[i].to_pydatetime(), dep.iat[i].to_pydatetime(),
                         float(conn.iat[i]), float(chg.iat[i]), float(peak.iat[i]),
                         float(energy.iat[i]))
        for i in np.flatnonzero(ok)
    ]
    return _finish(records, rej, schema, path)


def load_pv_dataset(path, schema: Schema = ELIA_PV_SCHEMA) -> IngestResult:
    """Parse quarter-hourly PV records for the schema's analysis year."""
    df = _read_frame(path, schema)
    rej = _Rejector(df)
    ts = _timestamps(df, schema, "timestamp")
    doy, slot, on_grid, in_year = timegrid.calendar_keys(ts, schema.year)
    wall = timegrid.to_wall_clock(ts)
    cols = {role: _numeric(df, schema, role).to_numpy(dtype=float) for role in (
        "measured_upscaled", "monitored_capacity", "forecast_week_ahead", "forecast_day_ahead",
        "forecast_hour_ahead", "p10", "p90", "load_factor")}
    cols["load_factor"] = cols["load_factor"] * schema.load_factor_scale

    rej.check(ts.isna(), "unparsable timestamp")
    rej.check(~in_year, "outside analysis year")
    rej.check(~on_grid, "timestamp not on quarter-hour grid")
    rej.check(np.isnan(cols["measured_upscaled"]), "unparsable measured_upscaled")
    rej.check(np.isnan(cols["monitored_capacity"]), "unparsable monitored_capacity")
    rej.check(cols["monitored_capacity"] <= 0, "non-positive capacity")
    rej.check(cols["measured_upscaled"] < 0, "negative measured generation")
    rej.check(cols["p10"] > cols["p90"], "p10 exceeds p90")

    ok = rej.ok
    keys = doy * timegrid.SLOTS_PER_DAY + slot
    dup = pd.Series(keys).where(ok).duplicated(keep="first").to_numpy() & ok
    rej.check(dup, "duplicate interval")
    ok = rej.ok

    records = [
        RawPVRecord(
            wall.iat[i].to_pydatetime(), int(doy[i]), int(slot[i]),
            float(cols["measured_upscaled"][i]), float(cols["monitored_capacity"][i]),
            _opt(cols["forecast_week_ahead"][i]), _opt(cols["forecast_day_ahead"][i]),
            _opt(cols["forecast_hour_ahead"][i]), _opt(cols["p10"][i]), _opt(cols["p90"][i]),
            _opt(cols["load_factor"][i]),
        )
        for i in np.flatnonzero(ok)
    ]
    warnings = []
    expected = timegrid.intervals_in_year(schema.year)
    if len(records) != expected:
        warnings.append(f"{Path(path).name}: {len(records)} PV intervals accepted, "
                        f"expected {expected} for {schema.year}")
    return _finish(records, rej, schema, path, warnings)


def load_weather(path, schema: Schema = WEATHER_SCHEMA) -> IngestResult:
    df = _read_frame(path, schema)
    rej = _Rejector(df)
    ts = _timestamps(df, schema, "timestamp")
    wall = timegrid.to_wall_clock(ts)
    in_year = (wall.dt.year == schema.year).fillna(False).to_numpy()
    names = ("ambient_temp", "wind_speed", "humidity", "wind_direction", "ghi", "dhi", "rainfall")
    v = {n: _numeric(df, schema, n).to_numpy(dtype=float) for n in names}

    rej.check(ts.isna(), "unparsable timestamp")
    rej.check(~in_year, "outside analysis year")
    for n in names:
        rej.check(np.isnan(v[n]), f"unparsable {n}")
    rej.check((v["humidity"] < 0) | (v["humidity"] > 100), "humidity out of range")
    rej.check(v["dhi"] < 0, "negative irradiance")
    rej.check(v["dhi"] > v["ghi"], "diffuse exceeds global")
    rej.check((v["wind_direction"] < 0) | (v["wind_direction"] >= 360), "wind direction out of range")
    rej.check((v["wind_speed"] < 0) | (v["rainfall"] < 0), "negative wind speed or rainfall")

    doy = wall.dt.dayofyear.fillna(0).astype(int).to_numpy()
    records = [
        WeatherRecord(wall.iat[i].to_pydatetime(), int(doy[i]), *(float(v[n][i]) for n in names))
        for i in np.flatnonzero(rej.ok)
    ]
    return _finish(records, rej, schema, path)


@dataclass
class FluviusResult:
    profiles: list
    rejected: list = field(default_factory=list)  # (consumer_id, reason)
    input_rows: int = 0


def load_fluvius(path, schema: Schema = FLUVIUS_SCHEMA) -> FluviusResult:
    """Group interval rows into one :class:`ConsumerProfile` per consumer.

    Net load is ``offtake - injection`` per interval, computed on the integer
    grid given by ``schema.decimals`` so values are exact at the dataset's
    native precision.  Consumers with missing intervals are rejected (no
    imputation); duplicate intervals and unknown type labels are errors.
    """
    df = _read_frame(path, schema, dtype={schema.columns["consumer_id"]: str,
                                          schema.columns["consumer_type"]: str})
    ids = df[schema.columns["consumer_id"]].astype(str).str.strip().to_numpy()
    types = pd.to_numeric(df[schema.columns["consumer_type"]], errors="coerce")
    bad_type = ~types.isin([1, 2, 3, 4, 5])
    if bad_type.any():
        i = int(np.flatnonzero(bad_type.to_numpy())[0])
        raise IngestError(f"unknown consumer_type {df[schema.columns['consumer_type']].iat[i]!r} "
                          f"at line {i + df.attrs['first_line']}")
    types = types.astype(int).to_numpy()

    ts = _timestamps(df, schema, "interval_start")
    doy, slot, on_grid, in_year = timegrid.calendar_keys(ts, schema.year)
    scale = 10 ** schema.decimals
    unit = 0.25 if schema.units == "kw" else 1.0
    off = _numeric(df, schema, "offtake").to_numpy(dtype=float) * unit
    inj = _numeric(df, schema, "injection").to_numpy(dtype=float) * unit

    bad = ~in_year | ~on_grid | np.isnan(off) | np.isnan(inj) | (off < 0) | (inj < 0)
    n_int = timegrid.intervals_in_year(schema.year)
    keys = (doy - 1) * timegrid.SLOTS_PER_DAY + slot

    profiles, rejected = [], []
    order = pd.Series(np.arange(len(df))).groupby(ids, sort=True)
    for cid, rows in order:
        rows = rows.to_numpy()
        ctypes = np.unique(types[rows])
        if len(ctypes) != 1:
            raise IngestError(f"consumer {cid} has conflicting type labels {ctypes.tolist()}")
        if bad[rows].any():
            i = int(rows[bad[rows]][0])
            rejected.append((cid, f"invalid interval row at line {i + df.attrs['first_line']}"))
            continue
        k = keys[rows]
        if len(np.unique(k)) != len(k):
            dup = pd.Series(k).duplicated().to_numpy()
            first = int(k[dup][0])
            raise IngestError(f"duplicate interval for consumer {cid}: "
                              f"{timegrid.timestamp_of(schema.year, first // 96 + 1, first % 96)}")
        present = np.zeros(n_int, dtype=bool)
        present[k] = True
        if not present.all():
            m = int(np.flatnonzero(~present)[0])
            rejected.append((cid, "missing interval "
                             f"{timegrid.timestamp_of(schema.year, m // 96 + 1, m % 96).isoformat()}"))
            continue
        net_units = np.empty(n_int, dtype=np.int64)
        net_units[k] = np.round(off[rows] * scale).astype(np.int64) - np.round(inj[rows] * scale).astype(np.int64)
        profiles.append(ConsumerProfile(cid, int(ctypes[0]), net_units / scale, schema.year))
    for cid, reason in rejected:
        log.warning("rejected consumer %s: %s", cid, reason)
    return FluviusResult(profiles, rejected, len(df))


# -- compact store --------------------------------------------------------------

MAGIC = b"ESCPOOL\0"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sBBHII")
_DTYPES = {1: np.dtype("<i2"), 2: np.dtype("<i4"), 3: np.dtype("<i8")}


def manifest_path_for(out_path) -> Path:
    out_path = Path(out_path)
    return out_path.with_name(out_path.name + ".manifest.json")


def compact_store(profiles, out_path, decimals: int = 3, meta: dict | None = None) -> dict:
    """Write ``profiles`` to a compact binary file plus a JSON manifest.

    Values are stored as little-endian integers in units of ``10**-decimals``
    kWh, using the narrowest of int16/int32/int64 that fits each consumer.
    Raises ValueError when a value is not exactly representable at that
    precision, since the store would then not round-trip.
    """
    profiles = list(profiles)
    if not profiles:
        raise ValueError("no profiles to store")
    year = profiles[0].year
    n_int = len(profiles[0].net_kwh)
    scale = 10 ** decimals
    body = bytearray(_HEADER.pack(MAGIC, FORMAT_VERSION, decimals, year, len(profiles), n_int))
    for p in profiles:
        if len(p.net_kwh) != n_int or p.year != year:
            raise ValueError(f"consumer {p.consumer_id}: inconsistent length or year")
        units = np.round(p.net_kwh * scale).astype(np.int64)
        if not np.array_equal(units / scale, p.net_kwh):
            raise ValueError(f"consumer {p.consumer_id}: values not representable at {decimals} decimals")
        code = next(c for c, d in _DTYPES.items()
                    if units.size == 0 or (units.min() >= np.iinfo(d).min and units.max() <= np.iinfo(d).max))
        cid = p.consumer_id.encode("utf-8")
        body += struct.pack("<H", len(cid)) + cid + struct.pack("<BB", p.consumer_type, code)
        body += units.astype(_DTYPES[code]).tobytes()
    digest = hashlib.sha256(body).hexdigest()
    body += bytes.fromhex(digest)

    out_path = Path(out_path)
    try:
        out_path.write_bytes(bytes(body))
    except OSError as e:
        raise IngestError(f"cannot write compact store {out_path}: {e}") from e
    manifest = {}
    if meta:
        manifest["_meta"] = meta
    manifest.update({
        "format": "energyscen-compact-pool",
        "version": FORMAT_VERSION,
        "year": year,
        "decimals": decimals,
        "consumer_count": len(profiles),
        "interval_count": n_int,
        "consumers_per_type": {str(t): c for t, c in sorted(Counter(p.consumer_type for p in profiles).items())},
        "file_bytes": len(body),
        "sha256": digest,
        "consumer_ids": [p.consumer_id for p in profiles],
    })
    manifest_path_for(out_path).write_text(json.dumps(manifest, indent=2) + "\n")
    read_compact(out_path)  # verification read
    return manifest


def read_compact(path, verify_manifest: bool = True) -> list[ConsumerProfile]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise IngestError(f"unreadable compact store {path}: {e}") from e
    if len(data) < _HEADER.size + 32:
        raise ChecksumError(f"{path.name}: truncated compact store")
    body, trailer = data[:-32], data[-32:]
    digest = hashlib.sha256(body).hexdigest()
    if digest != trailer.hex():
        raise ChecksumError(f"{path.name}: checksum mismatch")
    mpath = manifest_path_for(path)
    if verify_manifest and mpath.is_file():
        recorded = json.loads(mpath.read_text()).get("sha256")
        if recorded != digest:
            raise ChecksumError(f"{path.name}: checksum does not match manifest")

    magic, version, decimals, year, n_cons, n_int = _HEADER.unpack_from(body, 0)
    if magic != MAGIC:
        raise IngestError(f"{path.name}: not a compact pool file")
    if version != FORMAT_VERSION:
        raise IngestError(f"{path.name}: unsupported format version {version}")
    scale = 10 ** decimals
    off = _HEADER.size
    profiles = []
    for _ in range(n_cons):
        (n,) = struct.unpack_from("<H", body, off)
        off += 2
        cid = body[off:off + n].decode("utf-8")
        off += n
        ctype, code = struct.unpack_from("<BB", body, off)
        off += 2
        dtype = _DTYPES[code]
        units = np.frombuffer(body, dtype=dtype, count=n_int, offset=off).astype(np.int64)
        off += n_int * dtype.itemsize
        profiles.append(ConsumerProfile(cid, ctype, units / scale, year))
    if off != len(body):
        raise IngestError(f"{path.name}: {len(body) - off} trailing bytes")
    return profiles


def records_to_csv(records, header_lines: tuple = ()) -> str:
    """Canonical delimited dump of ingest records (role names as headers)."""
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    if not records:
        return buf.getvalue()
    names = [f.name for f in dataclasses.fields(records[0])]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for r in records:
        row = []
        for n in names:
            v = getattr(r, n)
            if isinstance(v, dt.datetime):
                v = v.isoformat()
            elif isinstance(v, float):
                v = repr(v)
            elif v is None:
                v = ""
            row.append(v)
        w.writerow(row)
    return buf.getvalue()


def rejections_to_csv(rejected, header_lines: tuple = ()) -> str:
    lines = [f"# {h}\n" for h in header_lines] + ["line,reason\n"]
    lines += [f"{r.line},{r.reason}\n" for r in rejected]
    return "".join(lines)
