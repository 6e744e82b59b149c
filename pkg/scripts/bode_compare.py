"""Averaged transfer functions against AC sweeps of the switched circuit.

Runs Gvd, Gvv and Zo at the configured operating point (the bundled
prototype by default) from 10 Hz to just below f_sw/2. Points above f_sw/4
are marked informational.

    python scripts/bode_compare.py [--config FILE] [--points 14] [--out DIR]
"""
from __future__ import annotations

import argparse
import csv
import time
import warnings
from pathlib import Path

import numpy as np

from afz.config import bundled_path, load_config
from afz.sim.transient import ac_sweep
from afz.smallsignal import build_model, compare_with_simulation
from afz.verify import SMALL_SIGNAL_SETTINGS, small_signal_setup


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(bundled_path()))
    ap.add_argument("--points", type=int, default=14)
    ap.add_argument("--out", default=None, help="write bode_<tf>.csv files here")
    args = ap.parse_args()

    cfg = load_config(args.config)
    op = cfg.operating_point()
    p = small_signal_setup(cfg.converter_params(), op)
    freqs = np.geomspace(10.0, 0.48 * p.f_sw, args.points)
    _, tfs = build_model(p, op)
    print(f"V_i={op.V_i:g} V  D={op.D:g}  R={op.R_load:.4g} Ohm  C_d={p.C_d * 1e9:.4g} nF  "
          f"f_o={tfs['Gvd'].f_o:.4g} Hz")
    for tg in ("Gvd", "Gvv", "Zo"):
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            pts = ac_sweep(p, op, tg, freqs, settings=SMALL_SIGNAL_SETTINGS)
        rep = compare_with_simulation(tfs[tg], pts, p.f_sw)
        ana = tfs[tg].response(freqs)
        print(f"\n{tg}  ({time.perf_counter() - t0:.1f} s)  "
              f"worst up to f_sw/4: {rep.max_mag_db:.2f} dB, {rep.max_phase_deg:.2f} deg")
        print(f"{'f (Hz)':>10} {'model dB':>9} {'sim dB':>8} {'model deg':>10} {'sim deg':>8}")
        rows = []
        for f, a, pt, info in zip(freqs, ana, pts, rep.informational):
            row = (f, 20 * np.log10(abs(a)), pt.mag_db, np.degrees(np.angle(a)), pt.phase_deg)
            rows.append(row)
            mark = "  (informational)" if info else ""
            print(f"{row[0]:10.1f} {row[1]:9.2f} {row[2]:8.2f} {row[3]:10.1f} {row[4]:8.1f}{mark}")
        if args.out:
            path = Path(args.out) / f"bode_{tg.lower()}.csv"
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["freq_hz", "model_mag_db", "sim_mag_db", "model_phase_deg",
                            "sim_phase_deg"])
                w.writerows([f"{v:.6g}" for v in r] for r in rows)


if __name__ == "__main__":
    main()
