"""Extraction configuration: one seed drives every random choice."""

from dataclasses import dataclass, field


@dataclass
class AugmentParams:
    """Image and text augmentation knobs (defaults follow the protocol the
    hashing networks were tuned on)."""

    blur_sigma_range: tuple = (1.1, 1.3)   # 3x3 gaussian kernel, sigma ~ U[range]
    rotation_range: tuple = (-10.0, -5.0)  # degrees, ~ U[range]
    crop_size: int = 200                   # center crop, then resize back
    synonym_fraction: float = 0.1          # fraction of tokens to try to replace


@dataclass
class ExtractionConfig:
    corpus: str = ""                       # directory holding annotations.json
    out_dir: str = ""
    image_encoder: str = "resnet18"        # 512-d, classification head removed
    text_encoder: str = "bert-base-uncased"  # 768-d, last four hidden states summed
    image_size: int = 224                  # encoder input resolution
    d_img: int = 512
    d_txt: int = 768
    augment: AugmentParams = field(default_factory=AugmentParams)
    synonyms_path: str | None = None       # JSON {token: [synonyms]}; None = built-in
    split_ratios: tuple = (0.5, 0.1, 0.4)
    seed: int = 0

    def __post_init__(self):
        if self.d_img <= 0 or self.d_txt <= 0:
            raise ValueError("embedding widths must be positive")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must sum to 1, got {self.split_ratios}")
        if self.augment.crop_size >= self.image_size:
            raise ValueError("crop_size must be smaller than image_size")
