#!/usr/bin/env python3
"""Build a small 28x28 handwritten-digit fixture in IDX format.

Uses scikit-learn's bundled 8x8 digits, upscaled to 28x28 by nearest
neighbor, so tests get real digit shapes without any network access.
Emits 100 train + 100 test images (10 per class each), disjoint.
"""

import gzip
import struct
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits

OUT = Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "fixtures"
PER_CLASS = 10
SIDE = 28


def upscale(img8: np.ndarray) -> np.ndarray:
    # 8x8 intensities are 0..16; map to 0..255 then nearest-neighbor blow-up.
    scaled = np.clip(img8 / 16.0 * 255.0, 0, 255).astype(np.uint8)
    idx = (np.arange(SIDE) * 8) // SIDE
    return scaled[np.ix_(idx, idx)]


def write_idx_images(path: Path, images: np.ndarray, compress: bool = False) -> None:
    header = struct.pack(">IIII", 0x803, len(images), SIDE, SIDE)
    payload = header + images.tobytes()
    if compress:
        path.write_bytes(gzip.compress(payload))
    else:
        path.write_bytes(payload)


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    path.write_bytes(struct.pack(">II", 0x801, len(labels)) + labels.astype(np.uint8).tobytes())


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    d = load_digits()
    rng = np.random.default_rng(20240817)

    train_ids, test_ids = [], []
    for c in range(10):
        ids = np.flatnonzero(d.target == c)
        picked = rng.choice(ids, size=2 * PER_CLASS, replace=False)
        train_ids.extend(picked[:PER_CLASS])
        test_ids.extend(picked[PER_CLASS:])

    for name, ids in [("train", np.array(train_ids)), ("test", np.array(test_ids))]:
        order = rng.permutation(len(ids))
        ids = ids[order]
        images = np.stack([upscale(d.images[i]) for i in ids])
        labels = d.target[ids]
        write_idx_images(OUT / f"digits-{name}-images.idx", images)
        write_idx_labels(OUT / f"digits-{name}-labels.idx", labels)

    # gzip variant of the train images for the compressed-input path.
    train_images = OUT / "digits-train-images.idx"
    (OUT / "digits-train-images.idx.gz").write_bytes(gzip.compress(train_images.read_bytes()))
    print("wrote fixtures to", OUT)


if __name__ == "__main__":
    main()
