#!/usr/bin/env python3
"""Weak or strong Landau damping run with a damping-rate fit on the output.

Example:
    python scripts/run_landau_damping.py --case weak --t-end 20 --out out/
"""

import argparse
from pathlib import Path

import numpy as np

from lrvlasov.config import from_preset
from lrvlasov.driver import run
from lrvlasov.io import write_diagnostics


def fit_peak_decay(series, t_lo=2.0, t_hi=15.0):
    t = np.array([r.t for r in series])
    ee = np.array([r.efield_energy for r in series])
    mask = (t >= t_lo) & (t <= t_hi)
    ti, ei = t[mask], ee[mask]
    peaks = (ei[1:-1] > ei[:-2]) & (ei[1:-1] > ei[2:])
    tp, ep = ti[1:-1][peaks], ei[1:-1][peaks]
    if len(tp) < 3:
        return None
    return float(np.polyfit(tp, np.log(ep), 1)[0])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--case", choices=("weak", "strong"), default="weak")
    ap.add_argument("--method", default="macro",
                    choices=("plain", "conservative", "macro"))
    ap.add_argument("--t-end", type=float, default=None)
    ap.add_argument("--out", default="out")
    args = ap.parse_args()

    preset = "weak_landau_1d" if args.case == "weak" else "strong_landau_1d"
    overrides = {"method": args.method}
    if args.t_end is not None:
        overrides["t_end"] = args.t_end
    cfg = from_preset(preset, **overrides)

    series = run(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{preset}_{args.method}.csv"
    write_diagnostics(series, csv_path)

    m0, e0 = series[0].mass, series[0].energy
    print(f"{preset} ({args.method}), {len(series)} rows to t={series[-1].t:g}")
    print(f"  mass drift   {max(abs(r.mass - m0) / m0 for r in series):.2e}")
    print(f"  energy drift {max(abs(r.energy - e0) / abs(e0) for r in series):.2e}")
    slope = fit_peak_decay(series)
    if slope is not None:
        print(f"  electric-energy peak decay rate {slope:.4f}"
              f" (field amplitude rate {slope / 2:.4f})")
    print(f"wrote {csv_path}")


if __name__ == "__main__":
    main()
