#!/usr/bin/env python3
"""Build a small, class-balanced MNIST subset in IDX format.

Source: the digit JSON files shipped in the `mnist` npm package
(https://www.npmjs.com/package/mnist), which holds ~10k MNIST digits with
pixel intensities already scaled to [0,1] (3 decimals).

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist-desk

Writes train-{images-idx3,labels-idx1}-ubyte and t10k-... with
--train-per-class / --test-per-class samples of each digit, interleaved
round-robin by class.
"""
import argparse
import json
import pathlib
import struct


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(min(255, max(0, round(p * 255))) for p in img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--train-per-class", type=int, default=200)
    ap.add_argument("--test-per-class", type=int, default=100)
    args = ap.parse_args()

    per_class = []
    for d in range(10):
        flat = json.load(open(pathlib.Path(args.digits_dir) / f"{d}.json"))["data"]
        per_class.append([flat[i * 784:(i + 1) * 784] for i in range(len(flat) // 784)])

    n_tr, n_te = args.train_per_class, args.test_per_class
    splits = {
        "train": [(per_class[d][i], d) for i in range(n_tr) for d in range(10)],
        "t10k": [(per_class[d][n_tr + i], d) for i in range(n_te) for d in range(10)],
    }
    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, samples in splits.items():
        write_images(out / f"{name}-images-idx3-ubyte", [s[0] for s in samples])
        write_labels(out / f"{name}-labels-idx1-ubyte", [s[1] for s in samples])
        print(f"{name}: {len(samples)} samples")


if __name__ == "__main__":
    main()
