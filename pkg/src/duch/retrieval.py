"""Sign quantization, bit packing, and exact Hamming-distance search.

Codes are packed little-end-first: bit j of a code lives in 64-bit word
j // 64 at bit position j % 64, with 1 encoding +1 and 0 encoding -1.
Unused high bits of the last word are zero. Search is an exhaustive
XOR/popcount scan; ties are broken by ascending id so rankings (and every
metric built on them) are deterministic.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import CodeFileError, ConfigError, ShapeError
from .models import HashNetwork

CODE_MAGIC = b"DUCHCODE"
CODE_VERSION = 1


@dataclass
class PackedCodes:
    """n codes of ``bits`` bits each, packed into uint64 words."""

    bits: int
    data: np.ndarray  # (n, words_per_code) uint64

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.uint64)
        if self.data.ndim != 2 or self.data.shape[1] != words_per_code(self.bits):
            raise ShapeError(
                f"packed data shape {self.data.shape} does not fit {self.bits} bits")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def words_per_code(self) -> int:
        return self.data.shape[1]


def words_per_code(bits: int) -> int:
    return (bits + 63) // 64


def binarize_and_pack(h) -> PackedCodes:
    """Sign-quantize continuous codes (>= 0 maps to bit 1) and pack them."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2:
        raise ShapeError(f"expected a matrix of codes, got shape {h.shape}")
    n, bits = h.shape
    ones = h >= 0.0
    words = words_per_code(bits)
    data = np.zeros((n, words), dtype=np.uint64)
    for w in range(words):
        chunk = ones[:, w * 64:(w + 1) * 64].astype(np.uint64)
        shifts = np.arange(chunk.shape[1], dtype=np.uint64)
        data[:, w] = np.bitwise_or.reduce(chunk << shifts, axis=1)
    return PackedCodes(bits=bits, data=data)


def unpack(codes: PackedCodes) -> np.ndarray:
    """Expand packed codes back to a {-1, +1} float matrix."""
    n, bits = codes.n, codes.bits
    out = np.empty((n, bits), dtype=np.float64)
    for j in range(bits):
        bit = (codes.data[:, j // 64] >> np.uint64(j % 64)) & np.uint64(1)
        out[:, j] = np.where(bit == 1, 1.0, -1.0)
    return out


def hamming(a: np.ndarray, b: np.ndarray) -> int:
    """Number of differing bits between two packed codes of equal width."""
    a = np.asarray(a, dtype=np.uint64).reshape(-1)
    b = np.asarray(b, dtype=np.uint64).reshape(-1)
    if a.shape != b.shape:
        raise ShapeError(f"hamming: word counts differ ({a.shape[0]} vs {b.shape[0]})")
    return int(np.bitwise_count(a ^ b).sum())


def hamming_to_all(query: np.ndarray, data: np.ndarray) -> np.ndarray:
    """Hamming distance from one packed code to every row of ``data``."""
    query = np.asarray(query, dtype=np.uint64).reshape(1, -1)
    if query.shape[1] != data.shape[1]:
        raise ShapeError(
            f"hamming: query has {query.shape[1]} words, index rows have {data.shape[1]}")
    return np.bitwise_count(data ^ query).sum(axis=1).astype(np.int64)


class RetrievalIndex:
    """Immutable archive of packed codes with unique item ids."""

    def __init__(self, codes: PackedCodes, ids):
        ids = np.ascontiguousarray(ids, dtype=np.int64)
        if ids.ndim != 1 or ids.size != codes.n:
            raise ConfigError(f"need exactly {codes.n} ids, got shape {ids.shape}")
        if np.unique(ids).size != ids.size:
            raise ConfigError("item ids must be unique")
        self.codes = codes
        self.ids = ids

    @property
    def n(self) -> int:
        return self.codes.n


def top_k(query: np.ndarray, index: RetrievalIndex, k: int) -> list:
    """The min(k, n) archive items closest to ``query`` in Hamming
    distance, ascending, ties broken by ascending id. Returns (id,
    distance) pairs; an empty index yields an empty list."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if index.n == 0:
        return []
    dists = hamming_to_all(query, index.codes.data)
    order = np.lexsort((index.ids, dists))[:min(k, index.n)]
    return [(int(index.ids[i]), int(dists[i])) for i in order]


def encode_split(net: HashNetwork, rows: np.ndarray, batch_size: int = 256) -> PackedCodes:
    """Eval-mode encoding of embedding rows into packed codes. Output is
    independent of the batching because eval-mode batch norm is a fixed
    affine map."""
    rows = np.asarray(rows, dtype=np.float64)
    chunks = [net.forward(rows[i:i + batch_size], train=False).data
              for i in range(0, rows.shape[0], batch_size)]
    continuous = np.concatenate(chunks, axis=0) if chunks else np.zeros((0, net.code_bits))
    return binarize_and_pack(continuous)


# ---------------------------------------------------------------------------
# code export format (see docs/FORMATS.md)
#
#   magic "DUCHCODE" | u32 version | u64 n | u32 bits | n*words u64 data
#
# plus a sidecar text file "<path>.ids" holding one decimal id per line.


def save_codes(codes: PackedCodes, ids, path) -> None:
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    if ids.size != codes.n:
        raise ConfigError(f"need exactly {codes.n} ids, got {ids.size}")
    with open(path, "wb") as fh:
        fh.write(CODE_MAGIC)
        fh.write(struct.pack("<IQI", CODE_VERSION, codes.n, codes.bits))
        fh.write(codes.data.astype("<u8", copy=False).tobytes())
    with open(f"{path}.ids", "w", encoding="utf-8") as fh:
        fh.writelines(f"{i}\n" for i in ids)


def load_codes(path):
    """Read a code export; returns (PackedCodes, ids)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != CODE_MAGIC:
        raise CodeFileError(f"{path}: bad magic {raw[:8]!r}")
    version, n, bits = struct.unpack_from("<IQI", raw, 8)
    if version != CODE_VERSION:
        raise CodeFileError(f"{path}: unsupported version {version}")
    words = words_per_code(bits)
    expected = 24 + n * words * 8
    if len(raw) != expected:
        raise CodeFileError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<u8", count=n * words, offset=24).reshape(n, words)
    codes = PackedCodes(bits=bits, data=data.copy())
    with open(f"{path}.ids", encoding="utf-8") as fh:
        ids = np.array([int(line) for line in fh if line.strip()], dtype=np.int64)
    if ids.size != n:
        raise CodeFileError(f"{path}.ids: expected {n} ids, found {ids.size}")
    return codes, ids
