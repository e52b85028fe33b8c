"""Hash networks, the adversarial discriminator, and checkpoint I/O.

Both hash networks share one architecture: linear -> relu -> linear ->
batchnorm -> relu -> linear -> tanh, so continuous codes live strictly
inside (-1, 1). The discriminator is linear -> relu -> linear -> sigmoid
and maps a code to the probability that it came from the text network.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import BatchNorm, Param, Tensor
from .errors import CheckpointError, ConfigError, ShapeError

CHECKPOINT_MAGIC = b"DUCHCKPT"
CHECKPOINT_VERSION = 1


def kaiming_uniform(rng, fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform init scaled for relu-fed layers."""
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def xavier_uniform(rng, fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform init scaled for saturating output layers."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _row_stable_matmul(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Matrix product computed one row at a time, so a row's result never
    depends on how many other rows share the batch (batched BLAS kernels
    round differently for different shapes)."""
    if a.shape[0] == 0:
        return np.zeros((0, w.shape[1]))
    return np.stack([row @ w for row in a])


class HashNetwork:
    """Three fully connected layers mapping an embedding to a code in (-1,1)^B."""

    def __init__(self, in_dim: int, hidden_dim: int, code_bits: int, rng,
                 bn_momentum: float = 0.1, bn_epsilon: float = 1e-5):
        self.in_dim = in_dim
        self.hidden_dim = hidden_dim
        self.code_bits = code_bits
        self.w1 = Param(kaiming_uniform(rng, in_dim, hidden_dim))
        self.b1 = Param(np.zeros((1, hidden_dim)))
        self.w2 = Param(kaiming_uniform(rng, hidden_dim, hidden_dim))
        self.b2 = Param(np.zeros((1, hidden_dim)))
        self.bn = BatchNorm(hidden_dim, momentum=bn_momentum, epsilon=bn_epsilon)
        self.w3 = Param(xavier_uniform(rng, hidden_dim, code_bits))
        self.b3 = Param(np.zeros((1, code_bits)))

    def forward(self, batch, train: bool = False) -> Tensor:
        """Continuous codes for a batch of embeddings (rows).

        Train mode participates in the backward graph and uses batch
        statistics; eval mode is graph-free and bit-identical per row no
        matter how the rows are batched.
        """
        if train:
            x = batch if isinstance(batch, Tensor) else Tensor(batch)
            h = ad.relu(ad.linear_forward(x, self.w1, self.b1))
            h = ad.linear_forward(h, self.w2, self.b2)
            h = ad.relu(self.bn.forward(h, train=True))
            return ad.tanh(ad.linear_forward(h, self.w3, self.b3))

        x = ad.as_matrix(batch.data if isinstance(batch, Tensor) else batch)
        if x.shape[1] != self.in_dim:
            raise ShapeError(f"hash network expects width {self.in_dim}, "
                             f"got batch of shape {x.shape}")
        h = np.maximum(_row_stable_matmul(x, self.w1.data) + self.b1.data, 0.0)
        h = _row_stable_matmul(h, self.w2.data) + self.b2.data
        bn = self.bn
        h = bn.gamma.data * (h - bn.running_mean) / np.sqrt(bn.running_var + bn.epsilon) \
            + bn.beta.data
        h = np.maximum(h, 0.0)
        return Tensor(np.tanh(_row_stable_matmul(h, self.w3.data) + self.b3.data))

    def params(self) -> list:
        return [self.w1, self.b1, self.w2, self.b2,
                self.bn.gamma, self.bn.beta, self.w3, self.b3]

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.params())


class DiscriminatorNet:
    """Two fully connected layers mapping a code to P(code is text-derived)."""

    def __init__(self, in_dim: int, hidden_dim: int, rng):
        self.in_dim = in_dim
        self.hidden_dim = hidden_dim
        self.w1 = Param(kaiming_uniform(rng, in_dim, hidden_dim))
        self.b1 = Param(np.zeros((1, hidden_dim)))
        self.w2 = Param(xavier_uniform(rng, hidden_dim, 1))
        self.b2 = Param(np.zeros((1, 1)))

    def forward(self, codes) -> Tensor:
        x = codes if isinstance(codes, Tensor) else Tensor(codes)
        h = ad.relu(ad.linear_forward(x, self.w1, self.b1))
        return ad.sigmoid(ad.linear_forward(h, self.w2, self.b2))

    def params(self) -> list:
        return [self.w1, self.b1, self.w2, self.b2]

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.params())


@dataclass
class ModelBundle:
    """The two hash networks plus the discriminator they train against."""

    f: HashNetwork          # image side
    g: HashNetwork          # text side
    d: DiscriminatorNet
    init_seed: int

    def __post_init__(self):
        if not (self.f.code_bits == self.g.code_bits == self.d.in_dim):
            raise ConfigError(
                f"code width mismatch: f={self.f.code_bits} g={self.g.code_bits} "
                f"d={self.d.in_dim}")

    @property
    def code_bits(self) -> int:
        return self.f.code_bits

    def hash_params(self) -> list:
        return self.f.params() + self.g.params()

    def all_params(self) -> list:
        return self.hash_params() + self.d.params()


def init_bundle(d_img: int, d_txt: int, code_bits: int, hidden: int = 1024,
                seed: int = 0, disc_hidden: int = 512) -> ModelBundle:
    """Seeded construction of f, g and D. Weight layers that feed a relu use
    Kaiming-uniform, output layers Xavier-uniform, biases start at zero."""
    if min(d_img, d_txt, code_bits, hidden, disc_hidden) <= 0:
        raise ConfigError("all dimensions must be positive")
    if code_bits < 8:
        raise ConfigError(f"code_bits must be >= 8, got {code_bits}")
    rng = np.random.default_rng(seed)
    f = HashNetwork(d_img, hidden, code_bits, rng)
    g = HashNetwork(d_txt, hidden, code_bits, rng)
    d = DiscriminatorNet(code_bits, disc_hidden, rng)
    return ModelBundle(f=f, g=g, d=d, init_seed=seed)


def hash_forward(net: HashNetwork, batch, train: bool = False) -> Tensor:
    return net.forward(batch, train=train)


def disc_forward(net: DiscriminatorNet, codes) -> Tensor:
    return net.forward(codes)


# ---------------------------------------------------------------------------
# checkpoint format (see docs/FORMATS.md)
#
#   magic "DUCHCKPT" | u32 version | u32 json_len | config JSON |
#   u32 n_arrays | repeat{ u16 name_len | name | u32 rows | u32 cols | f64 data }
#
# Everything little-endian; array data is row-major float64.


def _named_arrays(bundle: ModelBundle):
    out = []
    for prefix, net in (("f", bundle.f), ("g", bundle.g)):
        out += [(f"{prefix}.w1", net.w1.data), (f"{prefix}.b1", net.b1.data),
                (f"{prefix}.w2", net.w2.data), (f"{prefix}.b2", net.b2.data)]
        for k, v in net.bn.state_arrays().items():
            out.append((f"{prefix}.bn.{k}", v))
        out += [(f"{prefix}.w3", net.w3.data), (f"{prefix}.b3", net.b3.data)]
    out += [("d.w1", bundle.d.w1.data), ("d.b1", bundle.d.b1.data),
            ("d.w2", bundle.d.w2.data), ("d.b2", bundle.d.b2.data)]
    return out


def save_checkpoint(bundle: ModelBundle, path, train_config: dict | None = None):
    """Write all parameters, batch-norm running stats and the building
    config into a versioned binary container. Byte-stable for equal state."""
    meta = {
        "d_img": bundle.f.in_dim,
        "d_txt": bundle.g.in_dim,
        "hidden": bundle.f.hidden_dim,
        "disc_hidden": bundle.d.hidden_dim,
        "code_bits": bundle.code_bits,
        "init_seed": bundle.init_seed,
        "bn_momentum": bundle.f.bn.momentum,
        "bn_epsilon": bundle.f.bn.epsilon,
        "train_config": train_config,
    }
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    arrays = _named_arrays(bundle)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays:
            nb = name.encode()
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
            fh.write(arr.astype("<f8", copy=False).tobytes())


def load_checkpoint(path):
    """Rebuild a ModelBundle (plus the stored train config, if any)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {raw[:8]!r}")
    version, json_len = struct.unpack_from("<II", raw, 8)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    off = 16
    meta = json.loads(raw[off:off + json_len].decode())
    off += json_len
    (n_arrays,) = struct.unpack_from("<I", raw, off)
    off += 4
    arrays = {}
    for _ in range(n_arrays):
        (name_len,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off:off + name_len].decode()
        off += name_len
        rows, cols = struct.unpack_from("<II", raw, off)
        off += 8
        count = rows * cols
        arrays[name] = np.frombuffer(raw, dtype="<f8", count=count,
                                     offset=off).reshape(rows, cols).copy()
        off += count * 8
    if off != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - off} trailing bytes")

    bundle = init_bundle(meta["d_img"], meta["d_txt"], meta["code_bits"],
                         hidden=meta["hidden"], seed=meta["init_seed"],
                         disc_hidden=meta["disc_hidden"])
    for prefix, net in (("f", bundle.f), ("g", bundle.g)):
        net.w1.data[...] = arrays[f"{prefix}.w1"]
        net.b1.data[...] = arrays[f"{prefix}.b1"]
        net.w2.data[...] = arrays[f"{prefix}.w2"]
        net.b2.data[...] = arrays[f"{prefix}.b2"]
        net.bn.gamma.data[...] = arrays[f"{prefix}.bn.gamma"]
        net.bn.beta.data[...] = arrays[f"{prefix}.bn.beta"]
        net.bn.running_mean[...] = arrays[f"{prefix}.bn.running_mean"]
        net.bn.running_var[...] = arrays[f"{prefix}.bn.running_var"]
        net.bn.momentum = meta["bn_momentum"]
        net.bn.epsilon = meta["bn_epsilon"]
        net.w3.data[...] = arrays[f"{prefix}.w3"]
        net.b3.data[...] = arrays[f"{prefix}.b3"]
    bundle.d.w1.data[...] = arrays["d.w1"]
    bundle.d.b1.data[...] = arrays["d.b1"]
    bundle.d.w2.data[...] = arrays["d.w2"]
    bundle.d.b2.data[...] = arrays["d.b2"]
    return bundle, meta.get("train_config")
