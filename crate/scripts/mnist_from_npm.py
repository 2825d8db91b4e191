#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Writes MNIST IDX files from the per-digit JSON arrays shipped in the npm
`mnist` package (src/digits/0.json .. 9.json, each {"data": [...]} with
784 values in [0, 1] per image).

    python3 scripts/mnist_from_npm.py node_modules/mnist/src/digits data/mnist
"""

import json
import random
import struct
import sys
from pathlib import Path

PIXELS = 28 * 28


def main() -> int:
    if len(sys.argv) != 3:
        print(f"usage: {sys.argv[0]} <digits-dir> <out-dir>", file=sys.stderr)
        return 2
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    samples = []
    for digit in range(10):
        values = json.loads((src / f"{digit}.json").read_text())["data"]
        if len(values) % PIXELS:
            print(f"{digit}.json: {len(values)} values is not a multiple of {PIXELS}", file=sys.stderr)
            return 1
        for k in range(0, len(values), PIXELS):
            img = bytes(min(255, max(0, round(v * 255))) for v in values[k : k + PIXELS])
            samples.append((img, digit))
    # Fixed shuffle so subsets are not class blocks.
    random.Random(0).shuffle(samples)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "train-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(samples), 28, 28))
        for img, _ in samples:
            f.write(img)
    with open(out / "train-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(samples)))
        f.write(bytes(label for _, label in samples))
    print(f"wrote {len(samples)} images to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
