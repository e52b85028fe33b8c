"""Training loop: alternating discriminator/generator steps with Adam,
the per-batch binary code update, and a stepped learning-rate schedule.

Each batch runs four train-mode forward passes (both modalities, original
and augmented), refreshes the shared binary target from their average
sign, takes one discriminator step on detached codes, then one generator
step on the weighted sum of the remaining objectives. Ablation switches
zero the matching weight, skip the component entirely, and report it as 0.
"""

import json
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import losses as L
from .autodiff import Param, vstack
from .dataset import EmbeddingDataset, shuffled_chunks
from .errors import ConfigError, TrainingDivergedError
from .losses import BatchCodes, LossWeights
from .models import ModelBundle, init_bundle, save_checkpoint

ABLATIONS = ("no_adv", "no_quant", "no_bb", "no_intra_img", "no_intra_txt")

REPORT_FIELDS = ("epoch", "lr", "L_C_inter", "L_C_img", "L_C_txt",
                 "L_adv_disc", "L_adv_gen", "L_Q", "L_BB", "total")


@dataclass
class AdamConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass
class TrainConfig:
    """Every knob of the optimization; defaults follow the reference setup
    (batch 256, 100 epochs, lr 1e-4 stepped to a fifth every 50)."""

    code_bits: int = 64
    batch_size: int = 256
    epochs: int = 100
    lr0: float = 1e-4
    lr_decay_every: int = 50
    lr_decay_factor: float = 0.2
    weights: LossWeights = field(default_factory=LossWeights)
    adam: AdamConfig = field(default_factory=AdamConfig)
    seed: int = 0
    ablation: frozenset = frozenset()
    hidden_dim: int = 1024
    disc_hidden_dim: int = 512
    symmetric_inter: bool = False

    def __post_init__(self):
        self.ablation = frozenset(self.ablation)
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 < self.lr_decay_factor < 1.0:
            raise ConfigError(
                f"lr_decay_factor must be in (0, 1), got {self.lr_decay_factor}")
        if self.lr_decay_every < 1:
            raise ConfigError(f"lr_decay_every must be >= 1, got {self.lr_decay_every}")
        unknown = self.ablation - set(ABLATIONS)
        if unknown:
            raise ConfigError(f"unknown ablation switches: {sorted(unknown)}")

    def effective_weights(self) -> LossWeights:
        """Loss weights with the ablation switches applied."""
        w = replace(self.weights)
        if "no_adv" in self.ablation:
            w = replace(w, alpha=0.0)
        if "no_quant" in self.ablation:
            w = replace(w, beta=0.0)
        if "no_bb" in self.ablation:
            w = replace(w, gamma=0.0)
        if "no_intra_img" in self.ablation:
            w = replace(w, lambda1=0.0)
        if "no_intra_txt" in self.ablation:
            w = replace(w, lambda2=0.0)
        return w

    def to_dict(self) -> dict:
        return {
            "code_bits": self.code_bits,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "lr0": self.lr0,
            "lr_decay_every": self.lr_decay_every,
            "lr_decay_factor": self.lr_decay_factor,
            "weights": {"tau": self.weights.tau, "lambda1": self.weights.lambda1,
                        "lambda2": self.weights.lambda2, "alpha": self.weights.alpha,
                        "beta": self.weights.beta, "gamma": self.weights.gamma},
            "adam": {"beta1": self.adam.beta1, "beta2": self.adam.beta2,
                     "epsilon": self.adam.epsilon},
            "seed": self.seed,
            "ablation": sorted(self.ablation),
            "hidden_dim": self.hidden_dim,
            "disc_hidden_dim": self.disc_hidden_dim,
            "symmetric_inter": self.symmetric_inter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "weights" in d:
            d["weights"] = LossWeights(**d["weights"])
        if "adam" in d:
            d["adam"] = AdamConfig(**d["adam"])
        if "ablation" in d:
            d["ablation"] = frozenset(d["ablation"])
        return cls(**d)


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Stepped schedule: lr0 scaled by decay_factor every decay_every epochs."""
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    return cfg.lr0 * cfg.lr_decay_factor ** (epoch // cfg.lr_decay_every)


def adam_step(param: Param, lr: float, t: int, adam: AdamConfig) -> None:
    """Bias-corrected Adam update in place; zeroes the gradient after."""
    g = param.grad
    param.adam_m[...] = adam.beta1 * param.adam_m + (1 - adam.beta1) * g
    param.adam_v[...] = adam.beta2 * param.adam_v + (1 - adam.beta2) * g * g
    m_hat = param.adam_m / (1 - adam.beta1 ** t)
    v_hat = param.adam_v / (1 - adam.beta2 ** t)
    param.data[...] -= lr * m_hat / (np.sqrt(v_hat) + adam.epsilon)
    param.zero_grad()


class Adam:
    """One optimizer per parameter group, tracking its own step count."""

    def __init__(self, params, adam: AdamConfig):
        self.params = list(params)
        self.adam = adam
        self.t = 0

    def step(self, lr: float) -> None:
        self.t += 1
        for p in self.params:
            adam_step(p, lr, self.t, self.adam)


def update_binary_codes(codes: BatchCodes) -> np.ndarray:
    """Refresh the shared binary target as the sign of the per-modality
    stream means (sign(0) = +1). Detached: never receives gradient."""
    avg = 0.5 * ((codes.hi.data + codes.hi_aug.data) / 2.0
                 + (codes.ht.data + codes.ht_aug.data) / 2.0)
    codes.b_target = np.where(avg >= 0.0, 1.0, -1.0)
    return codes.b_target


def derive_seed(base: int, *stream: int) -> int:
    """Stable per-purpose seed derivation from one base seed."""
    return int(np.random.SeedSequence([base, *stream]).generate_state(1, np.uint64)[0])


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    L_C_inter: float
    L_C_img: float
    L_C_txt: float
    L_adv_disc: float
    L_adv_gen: float
    L_Q: float
    L_BB: float
    total: float
    wall_time: float  # in-memory only, never serialized

    def to_json_line(self) -> str:
        payload = {k: getattr(self, k) for k in REPORT_FIELDS}
        return json.dumps(payload)


@dataclass
class TrainReport:
    records: list
    config: TrainConfig
    checkpoint_path: str | None = None

    def to_jsonl(self) -> str:
        return "".join(r.to_json_line() + "\n" for r in self.records)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())


def _component(value, name: str, epoch: int) -> float:
    v = value.item()
    if not np.isfinite(v):
        raise TrainingDivergedError(f"{name} became non-finite at epoch {epoch}")
    return v


def train_epoch(bundle: ModelBundle, batches, cfg: TrainConfig, epoch: int,
                opt_gen: Adam, opt_disc: Adam) -> dict:
    """One pass over the batches; returns row-weighted mean loss components."""
    w = cfg.effective_weights()
    lr = lr_at(epoch, cfg)
    sums = {k: 0.0 for k in REPORT_FIELDS[2:]}
    n_rows = 0

    for x, x_aug, y, y_aug in batches:
        m = x.shape[0]
        for p in bundle.all_params():
            p.zero_grad()

        hi = bundle.f.forward(x, train=True)
        hi_aug = bundle.f.forward(x_aug, train=True)
        ht = bundle.g.forward(y, train=True)
        ht_aug = bundle.g.forward(y_aug, train=True)
        codes = BatchCodes(hi=hi, hi_aug=hi_aug, ht=ht, ht_aug=ht_aug)
        update_binary_codes(codes)

        batch = {k: 0.0 for k in sums}
        if w.alpha != 0.0:
            disc_loss = L.adversarial_discriminator_loss(bundle.d, codes)
            batch["L_adv_disc"] = _component(disc_loss, "L_adv_disc", epoch)
            disc_loss.backward()
            opt_disc.step(lr)

        total = L.inter_modal_contrastive(codes.hi, codes.ht, w.tau,
                                          symmetric=cfg.symmetric_inter)
        batch["L_C_inter"] = _component(total, "L_C_inter", epoch)
        if w.lambda1 != 0.0:
            term = L.intra_modal_contrastive(codes.hi, codes.hi_aug, w.tau)
            batch["L_C_img"] = _component(term, "L_C_img", epoch)
            total = total + w.lambda1 * term
        if w.lambda2 != 0.0:
            term = L.intra_modal_contrastive(codes.ht, codes.ht_aug, w.tau)
            batch["L_C_txt"] = _component(term, "L_C_txt", epoch)
            total = total + w.lambda2 * term
        if w.alpha != 0.0:
            term = L.adversarial_generator_loss(bundle.d, vstack([codes.hi, codes.hi_aug]))
            batch["L_adv_gen"] = _component(term, "L_adv_gen", epoch)
            total = total + w.alpha * term
        if w.beta != 0.0:
            term = L.quantization_loss(codes)
            batch["L_Q"] = _component(term, "L_Q", epoch)
            total = total + w.beta * term
        if w.gamma != 0.0:
            term = L.bit_balance_loss(codes)
            batch["L_BB"] = _component(term, "L_BB", epoch)
            total = total + w.gamma * term
        batch["total"] = _component(total, "total", epoch)

        total.backward()
        opt_gen.step(lr)

        for k, v in batch.items():
            sums[k] += v * m
        n_rows += m

    return {k: v / n_rows for k, v in sums.items()}


def train(dataset: EmbeddingDataset, cfg: TrainConfig, out_dir=None):
    """Train a fresh bundle on the dataset's train split.

    Batches are reshuffled every epoch from the config seed, so a given
    (dataset, config) pair always yields bit-identical parameters and
    reports. When ``out_dir`` is given, writes ``model.ckpt`` and
    ``report.jsonl`` there. Returns (bundle, report).
    """
    x, x_aug, y, y_aug = dataset.train_arrays()
    if x.shape[0] == 0:
        raise ConfigError("dataset has an empty train split")

    bundle = init_bundle(dataset.d_img, dataset.d_txt, cfg.code_bits,
                         hidden=cfg.hidden_dim, seed=cfg.seed,
                         disc_hidden=cfg.disc_hidden_dim)
    opt_gen = Adam(bundle.hash_params(), cfg.adam)
    opt_disc = Adam(bundle.d.params(), cfg.adam)

    n_train = x.shape[0]
    records = []
    for epoch in range(cfg.epochs):
        started = time.perf_counter()
        chunks = shuffled_chunks(n_train, cfg.batch_size, derive_seed(cfg.seed, epoch))
        batches = ((x[idx], x_aug[idx], y[idx], y_aug[idx]) for idx in chunks)
        means = train_epoch(bundle, batches, cfg, epoch, opt_gen, opt_disc)
        records.append(EpochRecord(epoch=epoch, lr=lr_at(epoch, cfg),
                                   wall_time=time.perf_counter() - started, **means))

    report = TrainReport(records=records, config=cfg)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        ckpt = os.path.join(out_dir, "model.ckpt")
        save_checkpoint(bundle, ckpt, train_config=cfg.to_dict())
        report.checkpoint_path = ckpt
        report.write(os.path.join(out_dir, "report.jsonl"))
    return bundle, report
