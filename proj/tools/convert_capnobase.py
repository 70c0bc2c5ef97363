#!/usr/bin/env python3
"""Convert CapnoBase IEEE TBME benchmark recordings (*_8min.mat) to the
respwave recording CSV.

    convert_capnobase.py <dir with *_8min.mat> <output dir>

Writes <id>.csv (PPG + CO2 at the native 300 Hz; respwave resamples on load)
and <id>.rr.csv with the expert breath-rate annotations taken from
reference.rr.co2.
"""
import argparse
import pathlib
import sys

import numpy as np


def load_mat(path):
    try:
        from scipy.io import loadmat
        m = loadmat(path, squeeze_me=True, struct_as_record=False)
        get = lambda *keys: _walk_scipy(m, keys)
    except NotImplementedError:  # v7.3 files are HDF5
        import h5py
        f = h5py.File(path, "r")
        get = lambda *keys: np.asarray(f["/".join(keys)]).squeeze()
    fs = float(get("param", "samplingrate", "pleth"))
    ppg = np.asarray(get("signal", "pleth", "y"), dtype=float).ravel()
    co2 = np.asarray(get("signal", "co2", "y"), dtype=float).ravel()
    rr_t = np.asarray(get("reference", "rr", "co2", "x"), dtype=float).ravel()
    rr_v = np.asarray(get("reference", "rr", "co2", "y"), dtype=float).ravel()
    return fs, ppg, co2, rr_t, rr_v


def _walk_scipy(m, keys):
    node = m[keys[0]]
    for k in keys[1:]:
        node = getattr(node, k)
    return node


def write(out_dir, subject, fs, ppg, co2, rr_t, rr_v):
    n = min(len(ppg), len(co2))
    with open(out_dir / f"{subject}.csv", "w") as f:
        f.write(f"subject_id,fs,resp_kind\n{subject},{fs:g},capnography\nppg,resp\n")
        for a, b in zip(ppg[:n], co2[:n]):
            f.write(f"{a:.9g},{b:.9g}\n")
    ok = np.isfinite(rr_t) & np.isfinite(rr_v)
    with open(out_dir / f"{subject}.rr.csv", "w") as f:
        f.write("t_sec,rr_bpm\n")
        for t, v in zip(rr_t[ok], rr_v[ok]):
            f.write(f"{t:.6g},{v:.6g}\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("src", type=pathlib.Path)
    ap.add_argument("out", type=pathlib.Path)
    args = ap.parse_args()
    files = sorted(args.src.glob("*_8min.mat"))
    if not files:
        sys.exit(f"no *_8min.mat files in {args.src}")
    args.out.mkdir(parents=True, exist_ok=True)
    for path in files:
        subject = "capno" + path.name.split("_")[0]
        write(args.out, subject, *load_mat(path))
        print(subject)


if __name__ == "__main__":
    main()
