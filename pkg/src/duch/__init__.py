"""Unsupervised cross-modal contrastive hashing over pre-extracted
embeddings, with Hamming-space retrieval and mAP/P@K evaluation."""

from .autodiff import BatchNorm, Param, Tensor, finite_difference_check
from .dataset import (EmbeddingDataset, SyntheticConfig, generate_synthetic,
                      load_dataset, make_batches, save_dataset, split_dataset)
from .evaluation import (EvalConfig, EvalReport, average_precision_at_k, evaluate,
                         is_relevant, map_at_k, per_query_ap, precision_curve,
                         read_report, write_report)
from .losses import (BatchCodes, LossWeights, adversarial_discriminator_loss,
                     adversarial_generator_loss, bit_balance_loss,
                     contrastive_total, cosine_similarity_matrix,
                     inter_modal_contrastive, intra_modal_contrastive,
                     quantization_loss, total_loss)
from .models import (DiscriminatorNet, HashNetwork, ModelBundle, disc_forward,
                     hash_forward, init_bundle, load_checkpoint, save_checkpoint)
from .retrieval import (PackedCodes, RetrievalIndex, binarize_and_pack,
                        encode_split, hamming, hamming_to_all, load_codes,
                        save_codes, top_k, unpack)
from .trainer import (Adam, AdamConfig, TrainConfig, TrainReport, adam_step,
                      lr_at, train, train_epoch, update_binary_codes)

__version__ = "0.1.0"

__all__ = [
    "Adam", "AdamConfig", "BatchCodes", "BatchNorm", "DiscriminatorNet",
    "EmbeddingDataset", "EvalConfig", "EvalReport", "HashNetwork",
    "LossWeights", "ModelBundle", "PackedCodes", "Param", "RetrievalIndex",
    "SyntheticConfig", "Tensor", "TrainConfig", "TrainReport", "adam_step",
    "adversarial_discriminator_loss", "adversarial_generator_loss",
    "average_precision_at_k", "binarize_and_pack", "bit_balance_loss",
    "contrastive_total", "cosine_similarity_matrix", "disc_forward",
    "encode_split", "evaluate", "finite_difference_check", "generate_synthetic",
    "hamming", "hamming_to_all", "hash_forward", "init_bundle",
    "inter_modal_contrastive", "intra_modal_contrastive", "is_relevant",
    "load_checkpoint", "load_codes", "load_dataset", "lr_at", "make_batches",
    "map_at_k", "per_query_ap", "precision_curve", "quantization_loss", "read_report",
    "save_checkpoint", "save_codes", "save_dataset", "split_dataset", "top_k",
    "total_loss", "train", "train_epoch", "unpack", "update_binary_codes",
    "write_report",
]
