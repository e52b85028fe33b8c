"""Paired-view augmentations.

Images: 3x3 gaussian blur with sigma drawn per image, a small random
rotation, a center crop, then a resize back to the encoder resolution.
Text: rule-based synonym replacement of content tokens (nouns/verbs)
driven by a lexicon; a seeded rng picks which tokens move and which
synonym lands. Everything derives from the rng handed in, so one config
seed reproduces every view.
"""

import json
import re

import numpy as np
from PIL import Image, ImageFilter

from .config import AugmentParams

_TOKEN_RE = re.compile(r"[a-z]+")

# compact noun/verb lexicon for aerial-scene captions; extend or replace
# via ExtractionConfig.synonyms_path
DEFAULT_SYNONYMS = {
    "airplane": ["aircraft", "plane"],
    "airplanes": ["aircraft", "planes"],
    "building": ["structure", "block"],
    "buildings": ["structures", "blocks"],
    "car": ["vehicle", "automobile"],
    "cars": ["vehicles", "automobiles"],
    "field": ["meadow", "plot"],
    "fields": ["meadows", "plots"],
    "forest": ["woodland", "woods"],
    "house": ["home", "dwelling"],
    "houses": ["homes", "dwellings"],
    "lake": ["pond", "lagoon"],
    "located": ["situated", "positioned"],
    "meadow": ["grassland", "field"],
    "mountain": ["peak", "hill"],
    "mountains": ["peaks", "hills"],
    "near": ["beside", "close to"],
    "ocean": ["sea"],
    "park": ["garden", "green"],
    "planted": ["grown", "cultivated"],
    "playground": ["schoolyard", "play area"],
    "pond": ["pool", "lake"],
    "river": ["stream", "waterway"],
    "road": ["street", "roadway"],
    "roads": ["streets", "roadways"],
    "roof": ["rooftop"],
    "roofs": ["rooftops"],
    "runs": ["passes", "stretches"],
    "school": ["campus", "academy"],
    "ship": ["vessel", "boat"],
    "ships": ["vessels", "boats"],
    "stand": ["sit", "rest"],
    "stands": ["sits", "rests"],
    "surrounded": ["encircled", "ringed"],
    "trees": ["woods", "foliage"],
    "water": ["waters"],
}


def load_synonyms(path: str | None) -> dict:
    if path is None:
        return dict(DEFAULT_SYNONYMS)
    with open(path, encoding="utf-8") as fh:
        table = json.load(fh)
    return {str(k).lower(): [str(s) for s in v] for k, v in table.items()}


def gaussian_kernel_3x3(sigma: float) -> list:
    """Explicit 3x3 gaussian weights (PIL's builtin blur does not expose a
    kernel size)."""
    ax = np.array([-1.0, 0.0, 1.0])
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma * sigma))
    return (g / g.sum()).reshape(-1).tolist()


def augment_image(img: Image.Image, params: AugmentParams, image_size: int,
                  rng) -> Image.Image:
    """blur -> rotate -> center-crop -> resize back to the encoder input."""
    sigma = float(rng.uniform(*params.blur_sigma_range))
    angle = float(rng.uniform(*params.rotation_range))
    img = img.convert("RGB")
    if img.size != (image_size, image_size):
        img = img.resize((image_size, image_size), Image.BILINEAR)
    img = img.filter(ImageFilter.Kernel((3, 3), gaussian_kernel_3x3(sigma), scale=1.0))
    img = img.rotate(angle, resample=Image.BILINEAR)
    crop = params.crop_size
    left = (image_size - crop) // 2
    img = img.crop((left, left, left + crop, left + crop))
    return img.resize((image_size, image_size), Image.BILINEAR)


def augment_caption(caption: str, synonyms: dict, params: AugmentParams,
                    rng) -> str:
    """Replace a seeded selection of lexicon tokens with synonyms; tokens
    outside the lexicon (and all punctuation/spacing) stay put."""
    tokens = caption.split()
    eligible = [i for i, tok in enumerate(tokens)
                if _TOKEN_RE.fullmatch(tok.lower()) and tok.lower() in synonyms]
    if not eligible:
        return caption
    n_replace = max(1, round(params.synonym_fraction * len(tokens)))
    n_replace = min(n_replace, len(eligible))
    picks = rng.choice(len(eligible), size=n_replace, replace=False)
    out = list(tokens)
    for p in sorted(int(i) for i in picks):
        idx = eligible[p]
        options = synonyms[out[idx].lower()]
        out[idx] = str(options[int(rng.integers(0, len(options)))])
    return " ".join(out)
