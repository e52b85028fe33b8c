import json

import numpy as np
import pytest
from PIL import Image

CAPTIONS = [
    "many buildings and a road near the river",
    "an airplane is parked beside the runway",
    "a large lake surrounded by trees",
    "cars are on the road near green fields",
    "a playground is surrounded by many trees",
    "ships are docked in the port near the ocean",
    "a mountain stands behind the small houses",
    "the school building stands near a pond",
    "a forest is located beside the meadow",
    "several houses with red roofs near the park",
    "a river runs through the green meadow",
    "the harbor is full of ships and boats",
]


@pytest.fixture()
def tiny_corpus(tmp_path):
    """Twelve small seeded images with captions and four class labels."""
    corpus = tmp_path / "corpus"
    (corpus / "imgs").mkdir(parents=True)
    rng = np.random.default_rng(0)
    items = []
    for i, caption in enumerate(CAPTIONS):
        arr = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
        name = f"imgs/scene_{i:03d}.png"
        Image.fromarray(arr).save(corpus / name)
        items.append({"image": name,
                      "captions": [caption, caption + " from above"],
                      "label": i % 4})
    (corpus / "annotations.json").write_text(
        json.dumps({"items": items, "classes": ["a", "b", "c", "d"]}))
    return corpus
