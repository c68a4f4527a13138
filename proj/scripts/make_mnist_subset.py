#!/usr/bin/env python3
"""Build the bundled MNIST subset (data/mnist/) from the npm `mnist` package.

The npm package (https://www.npmjs.com/package/mnist) ships ~1001 images per
digit class as flat [0,1]-scaled arrays. This script re-quantizes them to the
original byte values and writes standard IDX pairs: an interleaved-class
train split (700 per class) and test split (150 per class).

Usage: npm install mnist && python3 scripts/make_mnist_subset.py <node_modules/mnist/src/digits> <out_dir>
"""
import json
import struct
import sys
from pathlib import Path

TRAIN_PER_CLASS = 700
TEST_PER_CLASS = 150

def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">iiii", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))

def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">ii", 0x00000801, len(labels)))
        f.write(bytes(labels))

def main(digits_dir, out_dir):
    digits_dir, out_dir = Path(digits_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    per_class = []
    for c in range(10):
        flat = json.load(open(digits_dir / f"{c}.json"))["data"]
        n = len(flat) // 784
        imgs = [[round(v * 255) for v in flat[i * 784:(i + 1) * 784]] for i in range(n)]
        per_class.append(imgs)
    splits = {"train": [(c, img) for c in range(10) for img in per_class[c][:TRAIN_PER_CLASS]],
              "test": [(c, img) for c in range(10) for img in per_class[c][TRAIN_PER_CLASS:TRAIN_PER_CLASS + TEST_PER_CLASS]]}
    for name, pairs in splits.items():
        # interleave classes so file order is not class-sorted
        byclass = {c: [img for cc, img in pairs if cc == c] for c in range(10)}
        inter = []
        i = 0
        while any(byclass.values()):
            for c in range(10):
                if i < len(byclass[c]):
                    inter.append((c, byclass[c][i]))
            i += 1
            if all(i >= len(byclass[c]) for c in range(10)):
                break
        write_idx_images(out_dir / f"{name}-images.idx3-ubyte", [img for _, img in inter])
        write_idx_labels(out_dir / f"{name}-labels.idx1-ubyte", [c for c, _ in inter])
        print(name, len(inter))

if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
