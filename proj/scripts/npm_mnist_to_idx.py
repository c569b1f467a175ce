#!/usr/bin/env python3
# Copyright 2026 The mosr Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Converts the digit JSON files of the `mnist` npm package to gzipped IDX.

Per digit, the last 20% of samples form the test pool. Output files use the
standard MNIST names so a full MNIST download can replace them in place.
"""

import argparse
import gzip
import json
import pathlib
import struct


def write_idx(path, magic, dims, payload):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">I", magic))
        for d in dims:
            f.write(struct.pack(">I", d))
        f.write(payload)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("digits_dir", help="package/src/digits of mnist@1.1.0")
    parser.add_argument("out_dir")
    parser.add_argument("--test-fraction", type=float, default=0.2)
    args = parser.parse_args()

    splits = {"train": ([], []), "t10k": ([], [])}
    for digit in range(10):
        flat = json.loads(pathlib.Path(args.digits_dir, f"{digit}.json").read_text())["data"]
        pixels = bytes(round(v * 255) for v in flat)
        images = [pixels[i:i + 784] for i in range(0, len(pixels), 784)]
        cut = len(images) - int(round(len(images) * args.test_fraction))
        for name, chunk in (("train", images[:cut]), ("t10k", images[cut:])):
            splits[name][0].extend(chunk)
            splits[name][1].extend([digit] * len(chunk))

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, (images, labels) in splits.items():
        write_idx(out / f"{name}-images-idx3-ubyte.gz", 0x803, (len(images), 28, 28),
                  b"".join(images))
        write_idx(out / f"{name}-labels-idx1-ubyte.gz", 0x801, (len(labels),), bytes(labels))
        print(f"{name}: {len(images)} images")


if __name__ == "__main__":
    main()
