#!/usr/bin/env python3
"""One-time converter: SHD/SSC HDF5 archives -> native sample files + manifest.

The engine reads a small binary event format instead of HDF5 so it carries no
archive dependencies. Run this once per split:

    python3 tools/shd_to_native.py shd_train.h5 data/shd/train --name shd --split train
    python3 tools/shd_to_native.py shd_test.h5  data/shd/test  --name shd --split test

The upstream archives (shd_train.h5, shd_test.h5, ssc_*.h5) ship with
'spikes/times' in seconds, 'spikes/units' in [0, 700), and 'labels'.
"""

import argparse
import json
import struct
import sys
from pathlib import Path

try:
    import h5py
except ImportError:
    sys.exit("this converter needs h5py (pip install h5py)")

MAGIC = b"SNNE"
VERSION = 1


def write_sample(path: Path, label: int, times_ms, units, duration_ms: float) -> None:
    order = sorted(range(len(times_ms)), key=lambda i: times_ms[i])
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HHfI", VERSION, label, duration_ms, len(order)))
        for i in order:
            f.write(struct.pack("<fH", times_ms[i], units[i]))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("h5_file")
    ap.add_argument("out_dir")
    ap.add_argument("--name", default="shd")
    ap.add_argument("--split", default="train")
    ap.add_argument("--channels", type=int, default=700)
    ap.add_argument("--limit", type=int, default=0, help="convert only the first N samples")
    args = ap.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with h5py.File(args.h5_file, "r") as h5:
        times = h5["spikes"]["times"]
        units = h5["spikes"]["units"]
        labels = h5["labels"]
        n = len(labels) if args.limit == 0 else min(args.limit, len(labels))

        n_classes = int(max(labels)) + 1
        entries = []
        for idx in range(n):
            t_ms = [float(t) * 1000.0 for t in times[idx]]
            u = [int(x) for x in units[idx]]
            duration = max(t_ms) if t_ms else 0.0
            fname = f"{args.split}_{idx:05d}.snne"
            write_sample(out_dir / fname, int(labels[idx]), t_ms, u, duration)
            entries.append({"file": fname, "label": int(labels[idx])})
            if (idx + 1) % 500 == 0:
                print(f"  {idx + 1}/{n} samples", file=sys.stderr)

    manifest = {
        "name": args.name,
        "split": args.split,
        "n_classes": n_classes,
        "n_channels": args.channels,
        "samples": entries,
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
    print(f"wrote {len(entries)} samples and manifest.json under {out_dir}")


if __name__ == "__main__":
    main()
