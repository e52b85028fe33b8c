"""Training objectives: contrastive, adversarial, and binarization terms.

The contrastive terms all share one temperature-scaled template. For an
anchor row a_j with positive partner p_j inside a batch of M pairs:

    loss_j = -log  S(a_j, p_j) / ( sum_{k!=j} S(a_j, a_k) + sum_k S(a_j, p_k) )

with S(u, v) = exp(cos(u, v) / tau). The cross-modal term anchors on the
image codes with the text codes as positives; the within-modality terms
anchor each code on its augmented view. Note the second denominator sum
runs over all k including j, so at M=1 the ratio is exactly 1 and the
loss is exactly 0.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ShapeError
from .models import DiscriminatorNet

PROB_EPS = 1e-7  # probabilities are clamped to [eps, 1-eps] before any log


@dataclass
class LossWeights:
    """Temperature and the weights of every objective in the total loss."""

    tau: float = 0.5
    lambda1: float = 1.0   # image intra-modal contrastive
    lambda2: float = 1.0   # text intra-modal contrastive
    alpha: float = 0.01    # adversarial
    beta: float = 0.001    # quantization
    gamma: float = 0.01    # bit balance

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        for name in ("lambda1", "lambda2", "alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass
class BatchCodes:
    """Continuous codes of one batch: originals plus augmented views for
    both modalities, and the shared binary target once computed."""

    hi: Tensor        # image codes
    hi_aug: Tensor    # augmented-image codes
    ht: Tensor        # text codes
    ht_aug: Tensor    # augmented-text codes
    b_target: np.ndarray | None = field(default=None)

    def __post_init__(self):
        shape = self.hi.shape
        for name in ("hi_aug", "ht", "ht_aug"):
            if getattr(self, name).shape != shape:
                raise ShapeError(
                    f"code streams must share one shape; {name} is "
                    f"{getattr(self, name).shape}, expected {shape}")
        if self.b_target is not None:
            _check_binary_target(self.b_target, shape)

    @property
    def batch_size(self) -> int:
        return self.hi.shape[0]

    @property
    def code_bits(self) -> int:
        return self.hi.shape[1]

    def streams(self):
        return (self.hi, self.hi_aug, self.ht, self.ht_aug)


def _check_binary_target(b: np.ndarray, shape) -> None:
    if b.shape != shape:
        raise ShapeError(f"b_target shape {b.shape} != code shape {shape}")
    if not np.all(np.abs(b) == 1.0):
        raise ConfigError("b_target entries must be exactly -1 or +1")


def cosine_similarity_matrix(a: Tensor, c: Tensor) -> Tensor:
    """All pairwise cosines: entry (j, k) is cos(a_j, c_k)."""
    if a.shape[1] != c.shape[1]:
        raise ShapeError(f"cosine: widths differ ({a.shape} vs {c.shape})")
    return ad.matmul(ad.row_l2_normalize(a), ad.transpose(ad.row_l2_normalize(c)))


def _nt_xent(anchor: Tensor, positive: Tensor, tau: float) -> Tensor:
    """Shared template behind the inter- and intra-modal losses."""
    if anchor.shape != positive.shape:
        raise ShapeError(f"contrastive: shapes differ ({anchor.shape} vs {positive.shape})")
    m = anchor.shape[0]
    s_anchor = ad.exp(cosine_similarity_matrix(anchor, anchor) * (1.0 / tau))
    s_cross = ad.exp(cosine_similarity_matrix(anchor, positive) * (1.0 / tau))
    numerator = ad.diag_part(s_cross)
    off_diagonal = 1.0 - np.eye(m)
    denominator = ad.sum_rows(ad.mul(s_anchor, off_diagonal)) + ad.sum_rows(s_cross)
    return ad.mean_all(ad.log(denominator) - ad.log(numerator))


def inter_modal_contrastive(hi: Tensor, ht: Tensor, tau: float,
                            symmetric: bool = False) -> Tensor:
    """Cross-modal term, anchored on the image codes. ``symmetric=True``
    averages in the text-anchored mirror (off by default)."""
    loss = _nt_xent(hi, ht, tau)
    if symmetric:
        loss = (loss + _nt_xent(ht, hi, tau)) * 0.5
    return loss


def intra_modal_contrastive(h: Tensor, h_aug: Tensor, tau: float) -> Tensor:
    """Within-modality term anchoring each code on its augmented view."""
    return _nt_xent(h, h_aug, tau)


def contrastive_total(codes: BatchCodes, w: LossWeights,
                      symmetric: bool = False) -> Tensor:
    """Inter-modal term plus the weighted intra-modal terms."""
    total = inter_modal_contrastive(codes.hi, codes.ht, w.tau, symmetric=symmetric)
    if w.lambda1 != 0.0:
        total = total + w.lambda1 * intra_modal_contrastive(codes.hi, codes.hi_aug, w.tau)
    if w.lambda2 != 0.0:
        total = total + w.lambda2 * intra_modal_contrastive(codes.ht, codes.ht_aug, w.tau)
    return total


def _log_prob(p: Tensor) -> Tensor:
    return ad.log(ad.clamp(p, PROB_EPS, 1.0 - PROB_EPS))


def adversarial_discriminator_loss(d: DiscriminatorNet, codes: BatchCodes) -> Tensor:
    """Discriminator objective: text codes are "real", image codes "fake",
    averaged over both the original and the augmented streams. The code
    inputs are detached so only the discriminator receives gradient."""
    text_rows = ad.vstack([codes.ht.detach(), codes.ht_aug.detach()])
    image_rows = ad.vstack([codes.hi.detach(), codes.hi_aug.detach()])
    p_text = d.forward(text_rows)
    p_image = d.forward(image_rows)
    return -(ad.mean_all(_log_prob(p_text)) + ad.mean_all(_log_prob(1.0 - p_image)))


def adversarial_generator_loss(d: DiscriminatorNet, hi_streams: Tensor) -> Tensor:
    """Non-saturating generator objective pushing image codes to read as
    text to the discriminator. ``hi_streams`` stacks the image code rows
    (originals and augmented); gradient flows through D into them."""
    return -ad.mean_all(_log_prob(d.forward(hi_streams)))


def quantization_loss(codes: BatchCodes) -> Tensor:
    """Squared distance of every stream from the shared binary target,
    averaged per code entry (divided by M*B)."""
    if codes.b_target is None:
        raise ConfigError("quantization loss needs codes.b_target (run the code update first)")
    _check_binary_target(codes.b_target, codes.hi.shape)
    scale = 1.0 / (codes.batch_size * codes.code_bits)
    total = None
    for h in codes.streams():
        diff = codes.b_target - h
        term = ad.sum_all(ad.mul(diff, diff))
        total = term if total is None else total + term
    return total * scale


def bit_balance_loss(codes: BatchCodes) -> Tensor:
    """Squared per-bit batch sums, averaged per code entry. Zero exactly
    when every bit fires +1 and -1 equally often across the batch."""
    scale = 1.0 / (codes.batch_size * codes.code_bits)
    total = None
    for h in codes.streams():
        col = ad.sum_cols(h)
        term = ad.sum_all(ad.mul(col, col))
        total = term if total is None else total + term
    return total * scale


def total_loss(codes: BatchCodes, d: DiscriminatorNet, w: LossWeights,
               phase: str, symmetric: bool = False) -> Tensor:
    """The full training objective for one alternation phase.

    ``generator`` returns the weighted sum steered at the hash networks;
    ``discriminator`` returns the adversarial term steered at D.
    """
    if phase == "discriminator":
        return adversarial_discriminator_loss(d, codes)
    if phase != "generator":
        raise ConfigError(f"unknown phase {phase!r}")
    total = contrastive_total(codes, w, symmetric=symmetric)
    if w.alpha != 0.0:
        streams = ad.vstack([codes.hi, codes.hi_aug])
        total = total + w.alpha * adversarial_generator_loss(d, streams)
    if w.beta != 0.0:
        total = total + w.beta * quantization_loss(codes)
    if w.gamma != 0.0:
        total = total + w.gamma * bit_balance_loss(codes)
    return total
