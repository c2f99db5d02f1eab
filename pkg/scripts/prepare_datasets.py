#!/usr/bin/env python3
"""Convert the electricity and forest-covertype CSV files into ARFF streams.

Electricity: every feature is already scaled to [0, 1]; the 0/1 target
becomes the nominal class {DOWN, UP}.
Covertype: the ten quantitative columns are min-max scaled to [0, 1], the
44 wilderness/soil indicators become nominal {0, 1}, and the cover type is
the nominal class {1..7}.

    python3 scripts/prepare_datasets.py [--data /root/data]
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np


def _write(path: Path, relation: str, header: list[str], rows) -> None:
    tmp = path.with_suffix(".arff.tmp")
    with open(tmp, "w") as f:
        f.write(f"@relation {relation}\n\n")
        f.writelines(line + "\n" for line in header)
        f.write("\n@data\n")
        for row in rows:
            f.write(",".join(row) + "\n")
    tmp.replace(path)


def electricity(src: Path, dst: Path) -> int:
    with open(src) as f:
        reader = csv.reader(f)
        names = next(reader)
        data = list(reader)
    labels = {"0": "DOWN", "1": "UP"}
    header = [f"@attribute {n} numeric" for n in names[:-1]]
    header.append("@attribute class {DOWN,UP}")
    _write(dst, "elecNormNew", header, (r[:-1] + [labels[r[-1]]] for r in data))
    return len(data)


def covertype(src: Path, dst: Path) -> int:
    raw = np.loadtxt(src, delimiter=",", skiprows=1, dtype=np.int64)
    with open(src) as f:
        names = next(csv.reader(f))
    quant = raw[:, :10].astype(float)
    lo, hi = quant.min(axis=0), quant.max(axis=0)
    scaled = (quant - lo) / np.where(hi > lo, hi - lo, 1.0)
    header = [f"@attribute {n} numeric" for n in names[:10]]
    header += [f"@attribute {n} {{0,1}}" for n in names[10:-1]]
    header.append("@attribute class {1,2,3,4,5,6,7}")

    def rows():
        for q, rest in zip(scaled, raw[:, 10:]):
            yield [f"{v:.6g}" for v in q] + [str(v) for v in rest]

    _write(dst, "covtypeNorm", header, rows())
    return len(raw)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", type=Path, default=Path("/root/data"))
    args = ap.parse_args()
    jobs = (("elec.csv", "elec.arff", electricity), ("covtype.csv", "covtype.arff", covertype))
    for src, dst, fn in jobs:
        s, d = args.data / src, args.data / dst
        if not s.exists():
            print(f"skip {src}: not found in {args.data}")
            continue
        n = fn(s, d)
        print(f"{d}: {n} instances")


if __name__ == "__main__":
    main()
