"""Embedding extraction companion: image+caption corpus in, duch-emb/1
dataset out, using frozen pretrained encoders and paired augmentations."""

from .augment import (DEFAULT_SYNONYMS, augment_caption, augment_image,
                      gaussian_kernel_3x3, load_synonyms)
from .config import AugmentParams, ExtractionConfig
from .corpus import CorpusItem, load_corpus
from .emb_format import assign_split, write_dataset
from .encoders import (BertTextEncoder, ResNetImageEncoder, StubImageEncoder,
                       StubTextEncoder, make_image_encoder, make_text_encoder)
from .pipeline import (augment_and_extract, build_manifest,
                       extract_image_embeddings, extract_text_embeddings,
                       run_extraction)

__version__ = "0.1.0"

__all__ = [
    "AugmentParams", "BertTextEncoder", "CorpusItem", "DEFAULT_SYNONYMS",
    "ExtractionConfig", "ResNetImageEncoder", "StubImageEncoder",
    "StubTextEncoder", "assign_split", "augment_and_extract",
    "augment_caption", "augment_image", "build_manifest",
    "extract_image_embeddings", "extract_text_embeddings",
    "gaussian_kernel_3x3", "load_corpus", "load_synonyms",
    "make_image_encoder", "make_text_encoder", "run_extraction",
    "write_dataset",
]
