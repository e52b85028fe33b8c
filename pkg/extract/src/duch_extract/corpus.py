"""Corpus reading: an annotations.json next to the image files.

Expected schema (one entry per image; every image carries one or more
captions and a single class label):

    {
      "items": [
        {"image": "imgs/harbor_001.jpg",
         "captions": ["many boats are docked at the harbor", "..."],
         "label": 12},
        ...
      ],
      "classes": ["airport", ..., "viaduct"]        # optional, informational
    }

Image paths are relative to the corpus directory. Exactly one caption per
image is used downstream; the pick is made here, seeded, so the whole
extraction is reproducible from the config seed.
"""

import json
import os
from dataclasses import dataclass

import numpy as np


@dataclass
class CorpusItem:
    image_path: str
    caption: str
    label: int


def load_corpus(corpus_dir: str, caption_seed: int) -> list:
    """Parse annotations and pick one caption per image (seeded)."""
    path = os.path.join(corpus_dir, "annotations.json")
    if not os.path.exists(path):
        raise FileNotFoundError(f"corpus annotations not found: {path}")
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    items = doc.get("items")
    if not items:
        raise ValueError(f"{path}: no items")
    rng = np.random.default_rng(caption_seed)
    out = []
    for i, entry in enumerate(items):
        captions = entry.get("captions") or []
        if not captions:
            raise ValueError(f"{path}: item {i} has no captions")
        label = int(entry["label"])
        if label < 0:
            raise ValueError(f"{path}: item {i} has negative label")
        pick = int(rng.integers(0, len(captions)))
        out.append(CorpusItem(
            image_path=os.path.join(corpus_dir, entry["image"]),
            caption=str(captions[pick]),
            label=label,
        ))
    return out
