"""Embedding dataset format, splits, batching, and synthetic data.

On disk a dataset is a JSON manifest (format "duch-emb/1") next to raw
blobs: four embedding matrices as little-endian float32 row-major with no
header, labels as little-endian int32, and the split assignment as one
byte per row (0=train, 1=query, 2=retrieval). The manifest carries the
shapes; see docs/FORMATS.md for the byte-level layout.

Labels and splits exist for evaluation only. The trainer extracts bare
embedding matrices before it starts, so no label can leak into training.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import (BlobSizeError, ConfigError, FormatVersionError,
                     ManifestError, MissingBlobError, NonFiniteDataError)

FORMAT_VERSION = "duch-emb/1"

SPLIT_TRAIN, SPLIT_QUERY, SPLIT_RETRIEVAL = 0, 1, 2
SPLIT_NAMES = {"train": SPLIT_TRAIN, "query": SPLIT_QUERY, "retrieval": SPLIT_RETRIEVAL}

_BLOB_KEYS = ("x", "x_aug", "y", "y_aug")


def split_code(split) -> int:
    """Accept a split tag by name or numeric code."""
    if isinstance(split, str):
        try:
            return SPLIT_NAMES[split]
        except KeyError:
            raise ConfigError(f"unknown split {split!r}") from None
    if split in (SPLIT_TRAIN, SPLIT_QUERY, SPLIT_RETRIEVAL):
        return int(split)
    raise ConfigError(f"unknown split {split!r}")


class EmbeddingDataset:
    """Aligned embedding matrices plus labels and split assignment.

    Row m everywhere refers to one (image, caption) pair and its two
    augmented views. Matrices are float64 in memory (float32 on disk).
    """

    def __init__(self, x, x_aug, y, y_aug, labels, split):
        self.x = np.ascontiguousarray(x, dtype=np.float64)
        self.x_aug = np.ascontiguousarray(x_aug, dtype=np.float64)
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        self.y_aug = np.ascontiguousarray(y_aug, dtype=np.float64)
        self.labels = np.ascontiguousarray(labels, dtype=np.int32)
        self.split = np.ascontiguousarray(split, dtype=np.uint8)
        self._validate()

    def _validate(self):
        for name in ("x", "x_aug", "y", "y_aug"):
            if getattr(self, name).ndim != 2:
                raise ConfigError(f"{name} must be a 2-d matrix, got shape "
                                  f"{getattr(self, name).shape}")
        n = self.x.shape[0]
        if self.x_aug.shape != self.x.shape:
            raise ConfigError(f"x_aug shape {self.x_aug.shape} != x shape {self.x.shape}")
        if self.y_aug.shape != self.y.shape:
            raise ConfigError(f"y_aug shape {self.y_aug.shape} != y shape {self.y.shape}")
        if self.y.shape[0] != n or self.labels.shape != (n,) or self.split.shape != (n,):
            raise ConfigError("all arrays must agree on the number of rows")
        for name in ("x", "x_aug", "y", "y_aug"):
            arr = getattr(self, name)
            bad = np.flatnonzero(~np.isfinite(arr).all(axis=1))
            if bad.size:
                raise NonFiniteDataError(f"{name}: non-finite value in row {bad[0]}")
        if np.any(self.labels < 0):
            raise ConfigError("labels must be non-negative")
        if np.any(self.split > SPLIT_RETRIEVAL):
            raise ConfigError("split codes must be 0, 1 or 2")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d_img(self) -> int:
        return self.x.shape[1]

    @property
    def d_txt(self) -> int:
        return self.y.shape[1]

    def rows_for_split(self, split) -> np.ndarray:
        return np.flatnonzero(self.split == split_code(split))

    def train_arrays(self):
        """Embeddings of the train split only, no labels attached."""
        idx = self.rows_for_split(SPLIT_TRAIN)
        return self.x[idx], self.x_aug[idx], self.y[idx], self.y_aug[idx]


def split_dataset(n: int, ratios=(0.5, 0.1, 0.4), seed: int = 0) -> np.ndarray:
    """Random split assignment: floor(r0*n) train rows, floor(r1*n) query
    rows, remainder retrieval. Disjoint and exhaustive by construction."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {ratios}")
    n_train = int(np.floor(ratios[0] * n))
    n_query = int(np.floor(ratios[1] * n))
    perm = np.random.default_rng(seed).permutation(n)
    split = np.full(n, SPLIT_RETRIEVAL, dtype=np.uint8)
    split[perm[:n_train]] = SPLIT_TRAIN
    split[perm[n_train:n_train + n_query]] = SPLIT_QUERY
    return split


def shuffled_chunks(n: int, batch_size: int, seed) -> list:
    """Seeded permutation of range(n) cut into contiguous chunks; the last
    chunk may be short. Returns a list of index arrays."""
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    order = np.random.default_rng(seed).permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def make_batches(dataset: EmbeddingDataset, split, batch_size: int,
                 epoch_seed: int) -> list:
    """Batches of dataset row indices for one split: seeded shuffle, then
    contiguous chunks."""
    rows = dataset.rows_for_split(split)
    if rows.size == 0:
        raise ConfigError(f"split {split!r} is empty")
    return [rows[chunk] for chunk in shuffled_chunks(rows.size, batch_size, epoch_seed)]


# ---------------------------------------------------------------------------
# manifest + blob I/O


def _read_blob(path: str, dtype, expect_rows: int, expect_cols: int) -> np.ndarray:
    if not os.path.exists(path):
        raise MissingBlobError(f"missing blob file: {path}")
    itemsize = np.dtype(dtype).itemsize
    expected = expect_rows * expect_cols * itemsize
    actual = os.path.getsize(path)
    if actual != expected:
        raise BlobSizeError(
            f"{path}: expected {expected} bytes ({expect_rows}x{expect_cols} "
            f"{np.dtype(dtype).name}), found {actual}")
    return np.fromfile(path, dtype=dtype).reshape(expect_rows, expect_cols)


def load_dataset(manifest_path) -> EmbeddingDataset:
    """Load and fully validate a duch-emb/1 dataset."""
    manifest_path = os.fspath(manifest_path)
    if not os.path.exists(manifest_path):
        raise ManifestError(f"manifest not found: {manifest_path}")
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot parse manifest {manifest_path}: {exc}") from exc
    if manifest.get("format") != FORMAT_VERSION:
        raise FormatVersionError(
            f"{manifest_path}: format {manifest.get('format')!r}, "
            f"expected {FORMAT_VERSION!r}")
    try:
        n, d_img, d_txt = int(manifest["n"]), int(manifest["d_img"]), int(manifest["d_txt"])
        files = manifest["files"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"{manifest_path}: incomplete manifest ({exc})") from exc

    base = os.path.dirname(os.path.abspath(manifest_path))

    def resolve(key):
        try:
            return os.path.join(base, files[key])
        except KeyError:
            raise ManifestError(f"{manifest_path}: manifest lacks file entry {key!r}") from None

    dims = {"x": d_img, "x_aug": d_img, "y": d_txt, "y_aug": d_txt}
    blobs = {}
    for key in _BLOB_KEYS:
        raw = _read_blob(resolve(key), "<f4", n, dims[key])
        bad = np.flatnonzero(~np.isfinite(raw).all(axis=1))
        if bad.size:
            raise NonFiniteDataError(f"{resolve(key)}: non-finite value in row {bad[0]}")
        blobs[key] = raw.astype(np.float64)
    labels = _read_blob(resolve("labels"), "<i4", n, 1).reshape(-1)
    split = _read_blob(resolve("split"), np.uint8, n, 1).reshape(-1)
    return EmbeddingDataset(blobs["x"], blobs["x_aug"], blobs["y"], blobs["y_aug"],
                            labels, split)


def save_dataset(dataset: EmbeddingDataset, out_dir, provenance: dict | None = None) -> str:
    """Write manifest plus blobs into ``out_dir``; returns the manifest path."""
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    files = {"x": "x.f32", "x_aug": "x_aug.f32", "y": "y.f32", "y_aug": "y_aug.f32",
             "labels": "labels.i32", "split": "split.u8"}
    dataset.x.astype("<f4").tofile(os.path.join(out_dir, files["x"]))
    dataset.x_aug.astype("<f4").tofile(os.path.join(out_dir, files["x_aug"]))
    dataset.y.astype("<f4").tofile(os.path.join(out_dir, files["y"]))
    dataset.y_aug.astype("<f4").tofile(os.path.join(out_dir, files["y_aug"]))
    dataset.labels.astype("<i4").tofile(os.path.join(out_dir, files["labels"]))
    dataset.split.astype(np.uint8).tofile(os.path.join(out_dir, files["split"]))
    manifest = {
        "format": FORMAT_VERSION,
        "n": dataset.n,
        "d_img": dataset.d_img,
        "d_txt": dataset.d_txt,
        "files": files,
        "provenance": provenance or {},
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


# ---------------------------------------------------------------------------
# synthetic data


@dataclass
class SyntheticConfig:
    """Clustered toy data: paired image/text embeddings drawn around
    per-cluster unit anchors, augmentations as extra noise on each row."""

    n_clusters: int = 4
    n_pairs: int = 2000
    d_img: int = 64
    d_txt: int = 96
    noise_sigma: float = 0.02
    aug_sigma: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 2:
            raise ConfigError(f"need at least 2 clusters, got {self.n_clusters}")
        if self.noise_sigma < 0 or self.aug_sigma < 0:
            raise ConfigError("noise sigmas must be >= 0")
        if self.n_pairs < self.n_clusters:
            raise ConfigError("need at least one pair per cluster")


def _unit_rows(rng, rows: int, cols: int) -> np.ndarray:
    a = rng.normal(size=(rows, cols))
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def generate_synthetic(cfg: SyntheticConfig) -> EmbeddingDataset:
    """Deterministic clustered dataset for desk-scale experiments.

    Pair m belongs to cluster m mod n_clusters; its image and text rows
    are that cluster's anchors plus isotropic noise, and each augmented
    view adds further noise to the realized row. Values round-trip the
    float32 on-disk encoding exactly.
    """
    rng = np.random.default_rng(cfg.seed)
    anchors_img = _unit_rows(rng, cfg.n_clusters, cfg.d_img)
    anchors_txt = _unit_rows(rng, cfg.n_clusters, cfg.d_txt)
    labels = np.arange(cfg.n_pairs, dtype=np.int32) % cfg.n_clusters
    x = anchors_img[labels] + rng.normal(0.0, cfg.noise_sigma, (cfg.n_pairs, cfg.d_img))
    y = anchors_txt[labels] + rng.normal(0.0, cfg.noise_sigma, (cfg.n_pairs, cfg.d_txt))
    x_aug = x + rng.normal(0.0, cfg.aug_sigma, x.shape)
    y_aug = y + rng.normal(0.0, cfg.aug_sigma, y.shape)
    split = split_dataset(cfg.n_pairs, seed=cfg.seed)

    def f32(a):
        return a.astype(np.float32).astype(np.float64)

    return EmbeddingDataset(f32(x), f32(x_aug), f32(y), f32(y_aug), labels, split)
