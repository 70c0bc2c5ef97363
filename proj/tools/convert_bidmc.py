#!/usr/bin/env python3
"""Convert the BIDMC PPG and Respiration dataset (CSV release) to the
respwave recording CSV.

    convert_bidmc.py <dir with bidmc_NN_Signals.csv> <output dir>

PLETH and RESP (impedance) are copied at 125 Hz; respwave resamples to 30 Hz on
load. Breath annotations from the first annotator become instantaneous rates
(60 / inter-breath interval) in <id>.rr.csv.
"""
import argparse
import pathlib
import sys

import numpy as np
import pandas as pd

FS = 125.0


def convert(signals_path, out_dir):
    stem = signals_path.name.replace("_Signals.csv", "")
    subject = stem.replace("_", "")
    sig = pd.read_csv(signals_path)
    sig.columns = [c.strip() for c in sig.columns]
    ppg = sig["PLETH"].to_numpy(dtype=float)
    resp = sig["RESP"].to_numpy(dtype=float)
    keep = np.isfinite(ppg) & np.isfinite(resp)
    if not keep.all():
        # short gaps only; drop the rows rather than invent samples
        ppg, resp = ppg[keep], resp[keep]
    with open(out_dir / f"{subject}.csv", "w") as f:
        f.write(f"subject_id,fs,resp_kind\n{subject},{FS:g},impedance\nppg,resp\n")
        for a, b in zip(ppg, resp):
            f.write(f"{a:.9g},{b:.9g}\n")

    breaths_path = signals_path.with_name(f"{stem}_Breaths.csv")
    if breaths_path.exists():
        br = pd.read_csv(breaths_path)
        samples = br.iloc[:, 0].dropna().to_numpy(dtype=float)
        t = np.sort(samples) / FS
        if len(t) > 1:
            with open(out_dir / f"{subject}.rr.csv", "w") as f:
                f.write("t_sec,rr_bpm\n")
                for a, b in zip(t[:-1], t[1:]):
                    f.write(f"{0.5 * (a + b):.6g},{60.0 / (b - a):.6g}\n")
    return subject


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("src", type=pathlib.Path)
    ap.add_argument("out", type=pathlib.Path)
    args = ap.parse_args()
    files = sorted(args.src.glob("bidmc_*_Signals.csv"))
    if not files:
        sys.exit(f"no bidmc_*_Signals.csv files in {args.src}")
    args.out.mkdir(parents=True, exist_ok=True)
    for path in files:
        print(convert(path, args.out))


if __name__ == "__main__":
    main()
