"""Write small synthetic files in the layouts of the four public sources.

The output is meant for smoke runs of the CLI and of the dataset-gated
acceptance tests; it carries none of the statistics of the real data.

    python3 scripts/make_synthetic_datasets.py --out /tmp/energyscen-data
    ENERGYSCEN_DATA_DIR=/tmp/energyscen-data pytest -m requires_data
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
import pandas as pd

YEAR = 2022


def elaad(rng: np.random.Generator, n: int) -> pd.DataFrame:
    # arrivals around 8h and 18h local, mostly low-power short sessions
    hour = np.where(rng.random(n) < 0.6, rng.normal(8.5, 1.5, n), rng.normal(18, 2, n)) % 24
    day = rng.integers(0, 365, n)
    start = pd.Timestamp(f"{YEAR}-01-01", tz="UTC") + pd.to_timedelta(day, "D") + pd.to_timedelta(hour, "h")
    start = start.round("s")
    conn = np.clip(rng.gamma(3.0, 2.5, n), 0.3, 23.5)
    charge = conn * rng.uniform(0.2, 0.95, n)
    power = np.where(rng.random(n) < 0.6, rng.uniform(1.5, 3.9, n), rng.uniform(4, 22, n))
    energy = np.minimum(power * charge * rng.uniform(0.4, 0.95, n), 89.0)
    return pd.DataFrame({
        "TransactionId": np.arange(n),
        "UTCTransactionStart": start.strftime("%Y-%m-%d %H:%M:%S"),
        "UTCTransactionStop": (start + pd.to_timedelta(conn, "h")).round("s").strftime("%Y-%m-%d %H:%M:%S"),
        "ConnectedTime": conn.round(4),
        "ChargeTime": charge.round(4),
        "TotalEnergy": energy.round(3),
        "MaxPower": power.round(2),
    })


def _solar_shape(stamps: pd.DatetimeIndex) -> np.ndarray:
    doy = stamps.dayofyear.to_numpy()
    hour = (stamps.hour + stamps.minute / 60).to_numpy()
    daylen = 12 + 4.2 * np.sin(2 * np.pi * (doy - 80) / 365)
    x = (hour - (13 - daylen / 2)) / daylen
    day = (x > 0) & (x < 1)
    return np.where(day, np.sin(np.pi * x), 0.0) * (0.55 + 0.25 * np.sin(2 * np.pi * (doy - 80) / 365))


def elia(rng: np.random.Generator) -> pd.DataFrame:
    stamps = pd.date_range(f"{YEAR}-01-01", periods=35_040, freq="15min")  # standard time
    cap = np.linspace(6200, 7400, len(stamps))
    cloud = np.repeat(rng.uniform(0.3, 1.0, 365), 96)
    meas = cap * _solar_shape(stamps) * cloud
    err = lambda s: meas + rng.normal(0, s, len(meas)) * (meas > 0)
    wa, da, ha = err(420), err(200), err(135)
    local = stamps.tz_localize("Etc/GMT-1").tz_convert("Europe/Brussels")
    return pd.DataFrame({
        "Datetime": local.strftime("%Y-%m-%dT%H:%M:%S%z").str.replace(r"(\d{2})(\d{2})$", r"\1:\2", regex=True),
        "Measured & Upscaled": meas.round(3),
        "Week-ahead forecast": np.clip(wa, 0, None).round(3),
        "Day Ahead 11AM forecast": np.clip(da, 0, None).round(3),
        "Most recent forecast": np.clip(ha, 0, None).round(3),
        "Most recent P10": np.clip(ha - 250, 0, None).round(3),
        "Most recent P90": np.clip(ha + 250, 0, None).round(3),
        "Monitored capacity": cap.round(3),
        "Load factor": (100 * meas / cap).round(2),
    })


def fluvius(rng: np.random.Generator, per_type: int) -> pd.DataFrame:
    stamps = pd.date_range(f"{YEAR}-01-01", periods=35_040, freq="15min")
    hour = (stamps.hour + stamps.minute / 60).to_numpy()
    doy = stamps.dayofyear.to_numpy()
    winter = 1 + 0.4 * np.cos(2 * np.pi * (doy - 15) / 365)
    base = 0.07 * winter * (1 + 0.8 * np.exp(-((hour - 18.5) ** 2) / 4))
    sun = _solar_shape(stamps)
    frames = []
    for t in range(1, 6):
        for k in range(per_type):
            load = base * rng.uniform(0.6, 1.6) * rng.gamma(4, 0.25, len(stamps))
            if t in (3, 5):          # EV: evening charging blocks
                ev = (rng.random(365) < 0.5).repeat(96) & (hour >= 18) & (hour < 21)
                load = load + ev * rng.uniform(1.5, 2.8)
            if t == 4:               # heat pump
                load = load + 0.12 * winter ** 3
            pv = sun * rng.uniform(0.8, 1.6) if t in (2, 4, 5) else 0.0
            net = load - pv
            frames.append(pd.DataFrame({
                "EAN_ID": f"EAN{t}{k:04d}",
                "type": t,
                "Datum_Startuur": stamps.strftime("%Y-%m-%dT%H:%M:%S"),
                "Volume_Afname_kWh": np.clip(net, 0, None).round(3),
                "Volume_Injectie_kWh": np.clip(-net, 0, None).round(3),
            }))
    return pd.concat(frames, ignore_index=True)


def weather(rng: np.random.Generator) -> pd.DataFrame:
    stamps = pd.date_range(f"{YEAR}-01-01", periods=35_040, freq="15min")
    doy = stamps.dayofyear.to_numpy()
    ghi = 900 * _solar_shape(stamps) * np.repeat(rng.uniform(0.3, 1.0, 365), 96)
    return pd.DataFrame({
        "timestamp": stamps.strftime("%Y-%m-%dT%H:%M:%S"),
        "ambient_temp": (10 - 8 * np.cos(2 * np.pi * (doy - 15) / 365) + rng.normal(0, 2, len(doy))).round(2),
        "wind_speed": rng.gamma(2, 1.8, len(doy)).round(2),
        "humidity": rng.uniform(40, 100, len(doy)).round(1),
        "wind_direction": rng.uniform(0, 360, len(doy)).round(0) % 360,
        "ghi": ghi.round(1),
        "dhi": (ghi * rng.uniform(0.2, 0.8, len(doy))).round(1),
        "rainfall": np.where(rng.random(len(doy)) < 0.05, rng.exponential(0.4, len(doy)), 0).round(2),
    })


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--out", default="synthetic-data")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sessions", type=int, default=20_000)
    ap.add_argument("--consumers-per-type", type=int, default=2)
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    elaad(rng, args.sessions).to_csv(out / "elaad.csv", index=False)
    elia(rng).to_csv(out / "elia_pv_2022.csv", sep=";", index=False)
    fluvius(rng, args.consumers_per_type).to_csv(out / "fluvius_2022.csv", sep=";", index=False)
    weather(rng).to_csv(out / "weather.csv", index=False)
    for p in sorted(out.iterdir()):
        print(f"{p}  {p.stat().st_size / 1e6:.1f} MB")


if __name__ == "__main__":
    main()
