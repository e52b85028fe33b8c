"""End-to-end extraction: corpus -> embeddings -> augmented embeddings ->
duch-emb/1 dataset on disk.

Per-purpose rngs are derived from the single config seed (caption pick,
image views, text views, split), so two runs of the same config produce
byte-identical output. Undecodable images are skipped with a log line
and listed in the manifest provenance; the paired caption drops with
them so rows stay aligned.
"""

import logging

import numpy as np
from PIL import Image, UnidentifiedImageError

from .augment import augment_caption, augment_image, load_synonyms
from .config import ExtractionConfig
from .corpus import load_corpus
from .emb_format import assign_split, write_dataset
from .encoders import make_image_encoder, make_text_encoder

log = logging.getLogger(__name__)


def derive_seed(base: int, stream: int) -> int:
    return int(np.random.SeedSequence([base, stream]).generate_state(1, np.uint64)[0])


def extract_image_embeddings(images, cfg: ExtractionConfig, encoder=None) -> np.ndarray:
    """Encode PIL images into an N x d_img float32 array."""
    encoder = encoder or make_image_encoder(cfg.image_encoder, cfg.d_img)
    out = encoder.encode(images)
    if out.shape[1] != cfg.d_img:
        raise ValueError(f"image encoder produced width {out.shape[1]}, "
                         f"config says {cfg.d_img}")
    return out


def extract_text_embeddings(captions, cfg: ExtractionConfig, encoder=None) -> np.ndarray:
    """Encode captions into an N x d_txt float32 array."""
    for i, c in enumerate(captions):
        if not str(c).strip():
            raise ValueError(f"caption {i} is empty")
    encoder = encoder or make_text_encoder(cfg.text_encoder, cfg.d_txt)
    out = encoder.encode(captions)
    if out.shape[1] != cfg.d_txt:
        raise ValueError(f"text encoder produced width {out.shape[1]}, "
                         f"config says {cfg.d_txt}")
    return out


def augment_and_extract(images, captions, cfg: ExtractionConfig,
                        image_encoder=None, text_encoder=None):
    """Build one augmented view per pair and encode both modalities."""
    img_rng = np.random.default_rng(derive_seed(cfg.seed, 1))
    txt_rng = np.random.default_rng(derive_seed(cfg.seed, 2))
    synonyms = load_synonyms(cfg.synonyms_path)
    aug_images = [augment_image(img, cfg.augment, cfg.image_size, img_rng)
                  for img in images]
    aug_captions = [augment_caption(c, synonyms, cfg.augment, txt_rng)
                    for c in captions]
    x_aug = extract_image_embeddings(aug_images, cfg, encoder=image_encoder)
    y_aug = extract_text_embeddings(aug_captions, cfg, encoder=text_encoder)
    return x_aug, y_aug, aug_captions


def build_manifest(out_dir, x, x_aug, y, y_aug, labels, cfg: ExtractionConfig,
                   provenance: dict | None = None) -> str:
    """Assign the split from the config seed and write the dataset."""
    split = assign_split(x.shape[0], cfg.split_ratios, derive_seed(cfg.seed, 3))
    return write_dataset(out_dir, x, x_aug, y, y_aug, labels, split,
                         provenance=provenance)


def _load_images(items):
    """Decode corpus images; skipped (undecodable/missing) items drop their
    whole pair to keep rows aligned."""
    kept, images, skipped = [], [], []
    for item in items:
        try:
            with Image.open(item.image_path) as img:
                images.append(img.convert("RGB").copy())
            kept.append(item)
        except (OSError, UnidentifiedImageError) as exc:
            log.warning("skipping %s: %s", item.image_path, exc)
            skipped.append(item.image_path)
    return kept, images, skipped


def run_extraction(cfg: ExtractionConfig, image_encoder=None,
                   text_encoder=None) -> str:
    """Full pipeline; returns the manifest path."""
    image_encoder = image_encoder or make_image_encoder(cfg.image_encoder, cfg.d_img)
    text_encoder = text_encoder or make_text_encoder(cfg.text_encoder, cfg.d_txt)

    items = load_corpus(cfg.corpus, caption_seed=derive_seed(cfg.seed, 0))
    items, images, skipped = _load_images(items)
    if not items:
        raise ValueError(f"no decodable images in corpus {cfg.corpus}")
    captions = [it.caption for it in items]
    labels = np.array([it.label for it in items], dtype=np.int32)

    x = extract_image_embeddings(images, cfg, encoder=image_encoder)
    y = extract_text_embeddings(captions, cfg, encoder=text_encoder)
    x_aug, y_aug, _ = augment_and_extract(images, captions, cfg,
                                          image_encoder=image_encoder,
                                          text_encoder=text_encoder)

    provenance = {
        "image_encoder": cfg.image_encoder,
        "text_encoder": cfg.text_encoder,
        "image_size": cfg.image_size,
        "blur_sigma_range": list(cfg.augment.blur_sigma_range),
        "rotation_range": list(cfg.augment.rotation_range),
        "crop_size": cfg.augment.crop_size,
        "synonym_fraction": cfg.augment.synonym_fraction,
        "seed": cfg.seed,
        "skipped_images": skipped,
    }
    return build_manifest(cfg.out_dir, x, x_aug, y, y_aug, labels, cfg,
                          provenance=provenance)
