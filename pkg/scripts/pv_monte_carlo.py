"""Monthly PV quartiles, forecast error summary and Monte-Carlo day scenarios.

    python3 scripts/pv_monte_carlo.py --pv DATA/elia_pv_2022.csv --month 6 --kwp tri:2,5,10
"""

from __future__ import annotations

import argparse

import numpy as np

from energyscen.empdist import quantile
from energyscen.ingest import load_pv_dataset
from energyscen.pv_scenario import (
    KwpDistribution,
    forecast_errors,
    generate_pv_batch,
    monthly_quartiles,
    normalize_generation,
)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--pv", required=True)
    ap.add_argument("--month", type=int, default=6)
    ap.add_argument("--kwp", default="tri:2,5,10")
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    res = load_pv_dataset(args.pv)
    for w in res.warnings:
        print("warning:", w)
    series = normalize_generation(res.records)
    print(f"complete days: {len(series.days)}, incomplete: {len(series.incomplete_days)}, "
          f"values > 1: {series.fraction_above_one:.2%}, load-factor mismatches: "
          f"{series.load_factor_discrepancies}")

    rep = forecast_errors(res.records)
    print(f"MSE WA={rep.mse_week_ahead:.0f} DA={rep.mse_day_ahead:.0f} HA={rep.mse_hour_ahead:.0f}  "
          f"WA/DA={rep.ratio_wa_da:.2f} DA/HA={rep.ratio_da_ha:.2f}  P10-P90 coverage={rep.p10_p90_coverage:.2f}")

    noon = slice(44, 52)
    print("\nmonth  q25(noon)  q50(noon)  q75(noon)")
    for m in range(1, 13):
        if len(series.month_pool(m)) == 0:
            continue
        q = monthly_quartiles(series, m, levels=(25, 50, 75))
        print(f"{m:5d}  " + "  ".join(f"{v:9.3f}" for v in q.values[:, noon].mean(axis=1)))

    dist = KwpDistribution.parse(args.kwp)
    scen = generate_pv_batch(series, args.month, dist, args.n, args.seed)
    kwp = np.array([s.kwp for s in scen])
    daily_kwh = np.array([s.power_kw.sum() * 0.25 for s in scen])
    print(f"\n{args.n} scenarios, month {args.month}, kWp {args.kwp}: mean kWp {kwp.mean():.3f} "
          f"(distribution mean {dist.mean:.3f})")
    print("daily energy kWh p10/p50/p90: " + " / ".join(f"{v:.2f}" for v in quantile(daily_kwh, [0.1, 0.5, 0.9])))


if __name__ == "__main__":
    main()
