"""Pool summary table, peak-day distributions and worst windows for a load pool.

Accepts a raw load file or a compact store written by ``energyscen ingest load``.

    python3 scripts/load_peaks_report.py --pool DATA/fluvius_2022.csv --weather DATA/weather.csv
"""

from __future__ import annotations

import argparse
from pathlib import Path

from energyscen.ingest import load_fluvius, load_weather, read_compact
from energyscen.load_analytics import (
    TABLE1_COLUMNS,
    align_weather,
    peak_day_distribution,
    summary_table,
    worst_week,
)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--pool", required=True)
    ap.add_argument("--weather")
    ap.add_argument("--windows", default="7,8,9")
    args = ap.parse_args(argv)

    path = Path(args.pool)
    if path.suffix == ".bin":
        pool = read_compact(path)
    else:
        res = load_fluvius(path)
        pool = res.profiles
        for cid, reason in res.rejected:
            print(f"rejected {cid}: {reason}")

    cols = [name for name, _ in TABLE1_COLUMNS][1:8]
    print(f"{'pool':<24}" + "".join(f"{c[:12]:>14}" for c in cols))
    for s in summary_table(pool):
        print(f"{s.label:<24}" + "".join(f"{getattr(s, c):>14.4g}" for c in cols))

    weather = load_weather(args.weather).records if args.weather else None
    for kind in ("peak", "reverse_peak"):
        hist = peak_day_distribution(pool, kind)
        for w in (int(x) for x in args.windows.split(",")):
            week = worst_week(hist, w)
            line = f"{kind:<13} window {w}: days {week.start_day}-{week.end_day}, {week.fraction:.1%} of pool"
            if weather:
                daily = align_weather(weather, week).daily
                t = sum(d.mean_temp for d in daily) / len(daily)
                line += f", mean temp {t:.1f} C"
            print(line)


if __name__ == "__main__":
    main()
