"""Writer for the duch-emb/1 dataset format.

The layout contract (shared with the hashing toolkit, which consumes
these files unchanged): a JSON manifest next to headerless blobs, with
embeddings as little-endian float32 row-major, labels as little-endian
int32, and the split as one byte per row (0 train, 1 query, 2 retrieval).
"""

import json
import os

import numpy as np

FORMAT_VERSION = "duch-emb/1"


def assign_split(n: int, ratios, seed: int) -> np.ndarray:
    """floor(r0*n) train rows, floor(r1*n) query rows, rest retrieval,
    over a seeded permutation."""
    n_train = int(np.floor(ratios[0] * n))
    n_query = int(np.floor(ratios[1] * n))
    perm = np.random.default_rng(seed).permutation(n)
    split = np.full(n, 2, dtype=np.uint8)
    split[perm[:n_train]] = 0
    split[perm[n_train:n_train + n_query]] = 1
    return split


def write_dataset(out_dir: str, x, x_aug, y, y_aug, labels, split,
                  provenance: dict | None = None) -> str:
    """Write manifest plus blobs; returns the manifest path."""
    x = np.ascontiguousarray(x, dtype=np.float32)
    x_aug = np.ascontiguousarray(x_aug, dtype=np.float32)
    y = np.ascontiguousarray(y, dtype=np.float32)
    y_aug = np.ascontiguousarray(y_aug, dtype=np.float32)
    labels = np.ascontiguousarray(labels, dtype=np.int32)
    split = np.ascontiguousarray(split, dtype=np.uint8)

    n = x.shape[0]
    for name, arr in (("x_aug", x_aug), ("y", y), ("y_aug", y_aug)):
        if arr.shape[0] != n:
            raise ValueError(f"{name} has {arr.shape[0]} rows, expected {n}")
    if x_aug.shape[1] != x.shape[1] or y_aug.shape[1] != y.shape[1]:
        raise ValueError("augmented widths must match the original widths")
    if labels.shape != (n,) or split.shape != (n,):
        raise ValueError("labels and split must have one entry per row")
    for name, arr in (("x", x), ("x_aug", x_aug), ("y", y), ("y_aug", y_aug)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} contains non-finite values")

    os.makedirs(out_dir, exist_ok=True)
    files = {"x": "x.f32", "x_aug": "x_aug.f32", "y": "y.f32", "y_aug": "y_aug.f32",
             "labels": "labels.i32", "split": "split.u8"}
    x.astype("<f4").tofile(os.path.join(out_dir, files["x"]))
    x_aug.astype("<f4").tofile(os.path.join(out_dir, files["x_aug"]))
    y.astype("<f4").tofile(os.path.join(out_dir, files["y"]))
    y_aug.astype("<f4").tofile(os.path.join(out_dir, files["y_aug"]))
    labels.astype("<i4").tofile(os.path.join(out_dir, files["labels"]))
    split.tofile(os.path.join(out_dir, files["split"]))

    manifest = {
        "format": FORMAT_VERSION,
        "n": int(n),
        "d_img": int(x.shape[1]),
        "d_txt": int(y.shape[1]),
        "files": files,
        "provenance": provenance or {},
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path
