#!/usr/bin/env python3
"""Bit packing and exact Hamming search, cross-checked against a naive
per-bit loop. Shows the packed word layout, the (distance, id) tie rule,
and a quick throughput number for the exhaustive scan."""

import time

import numpy as np

from duch.retrieval import (RetrievalIndex, binarize_and_pack, hamming,
                            hamming_to_all, top_k, unpack)

rng = np.random.default_rng(7)

# --- packing layout ----------------------------------------------------------
h = np.array([[0.3, -0.7, 0.0, 1.2]])
packed = binarize_and_pack(h)
print("continuous row:", h[0])
print("packed word (bit j at position j, 1 means >= 0):", bin(int(packed.data[0, 0])))
print("unpacked signs:", unpack(packed)[0])

# --- agreement with a naive bit loop -----------------------------------------
signs = np.where(rng.random((500, 64)) < 0.5, -1.0, 1.0)
codes = binarize_and_pack(signs)
bits = (signs > 0).astype(int)

mismatches = 0
for _ in range(2000):
    i, j = rng.integers(0, 500, size=2)
    naive = int((bits[i] != bits[j]).sum())
    if hamming(codes.data[i], codes.data[j]) != naive:
        mismatches += 1
print(f"\n2000 random pairs vs naive bit loop: {mismatches} mismatches")

# --- top-k with deterministic ties -------------------------------------------
dup = binarize_and_pack(np.ones((5, 16)))
index = RetrievalIndex(dup, np.array([50, 10, 40, 20, 30]))
print("five identical codes, ids scrambled -> top_k returns ascending ids:")
print("  ", top_k(dup.data[0], index, 5))

# --- throughput ---------------------------------------------------------------
big = binarize_and_pack(np.where(rng.random((100_000, 64)) < 0.5, -1.0, 1.0))
query = big.data[0]
start = time.perf_counter()
dists = hamming_to_all(query, big.data)
elapsed = time.perf_counter() - start
print(f"\nexhaustive scan of {big.n} 64-bit codes: {elapsed * 1e3:.1f} ms "
      f"({big.n / elapsed / 1e6:.0f}M codes/s), min distance {dists.min()}")
