"""Fit the EV session model on a session file and print a 24 h fanchart.

    python3 scripts/ev_fanchart_demo.py --sessions DATA/elaad.csv --n 1000 --seed 1
"""

from __future__ import annotations

import argparse

import numpy as np

from energyscen.ev_scenario import (
    COARSE_POWER,
    GenerationOptions,
    fanchart,
    fit_session_model,
    generate_batch,
    synthesize_power_profile,
)
from energyscen.ingest import load_ev_dataset


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--sessions", required=True)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--peak-sampling", choices=("marginal", "uniform"), default="marginal")
    args = ap.parse_args(argv)

    res = load_ev_dataset(args.sessions)
    model = fit_session_model(res.records)
    print(f"sessions: {len(res.records)} accepted, {len(res.rejected)} rejected")
    for k, v in model.summary().items():
        print(f"  {k}: {v}")

    batch = generate_batch(model, args.n, args.seed, GenerationOptions(peak_sampling=args.peak_sampling))
    print(f"generation: {batch.stats}")

    power = np.array([s.p_peak for s in batch.sessions])
    energy = np.array([s.e_ch for s in batch.sessions])
    print(f"share P_peak < 4 kW and E_ch < 10 kWh: {np.mean((power < 4) & (energy < 10)):.3f}")
    groups = np.bincount([COARSE_POWER.index(min(p, 23.99)) for p in power], minlength=COARSE_POWER.count)
    for i, c in enumerate(groups):
        lo = COARSE_POWER.bin_lo(i)
        print(f"  {lo:4.0f}-{lo + COARSE_POWER.width:<4.0f} kW  {c / args.n:6.1%}")

    fan = fanchart([synthesize_power_profile(s) for s in batch.sessions], fold=True)
    print("\nhour   " + "  ".join(f"p{lv:<5g}" for lv in fan.levels))
    for slot in range(0, fan.values.shape[1], 4):
        print(f"{slot / 4:5.1f}  " + "  ".join(f"{v:6.2f}" for v in fan.values[:, slot]))


if __name__ == "__main__":
    main()
