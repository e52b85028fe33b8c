"""Frozen encoders producing fixed-width embeddings.

Two real encoders (ResNet image features with the classification head
removed; BERT text features built by summing the last four hidden states
of each token, then mean-pooling over tokens) and two deterministic
offline stubs used for tests and for exercising the pipeline without
pretrained weights. Stubs are stable across processes: no salted hashes,
fixed projection seeds.
"""

import zlib

import numpy as np
from PIL import Image

_PROJECTION_SEED = 0x0DCE


def _projection(rows: int, cols: int, tag: int) -> np.ndarray:
    return np.random.default_rng([_PROJECTION_SEED, tag, rows, cols]).normal(
        scale=1.0 / np.sqrt(rows), size=(rows, cols))


class StubImageEncoder:
    """Deterministic pixel-statistics encoder: grayscale thumbnail flattened
    through a fixed random projection. Sensitive to blur/rotation/crops,
    identical for identical images."""

    def __init__(self, out_dim: int = 512, thumb: int = 16):
        self.out_dim = out_dim
        self.thumb = thumb
        self._w = _projection(thumb * thumb, out_dim, tag=1)

    def encode(self, images) -> np.ndarray:
        rows = []
        for img in images:
            g = img.convert("L").resize((self.thumb, self.thumb), Image.BILINEAR)
            v = np.asarray(g, dtype=np.float64).reshape(-1) / 255.0
            rows.append((v - v.mean()) @ self._w)
        return np.asarray(rows, dtype=np.float32)


class StubTextEncoder:
    """Deterministic character-trigram hashing encoder (crc32 buckets, so
    stable across interpreter runs) through a fixed random projection."""

    def __init__(self, out_dim: int = 768, buckets: int = 1024):
        self.out_dim = out_dim
        self.buckets = buckets
        self._w = _projection(buckets, out_dim, tag=2)

    def encode(self, captions) -> np.ndarray:
        rows = []
        for text in captions:
            text = f"  {text.lower().strip()}  "
            counts = np.zeros(self.buckets)
            for i in range(len(text) - 2):
                bucket = zlib.crc32(text[i:i + 3].encode()) % self.buckets
                counts[bucket] += 1.0
            norm = np.linalg.norm(counts)
            if norm > 0:
                counts /= norm
            rows.append(counts @ self._w)
        return np.asarray(rows, dtype=np.float32)


class ResNetImageEncoder:
    """Pretrained ResNet with the classification head removed; 512-d
    penultimate features for resnet18/34. Weights stay frozen."""

    def __init__(self, name: str = "resnet18", batch_size: int = 32):
        import torch
        import torchvision.models as models
        from torchvision import transforms

        self._torch = torch
        weights = {"resnet18": models.ResNet18_Weights.DEFAULT,
                   "resnet34": models.ResNet34_Weights.DEFAULT}[name]
        net = getattr(models, name)(weights=weights)
        net.fc = torch.nn.Identity()
        net.eval()
        self.net = net
        self.out_dim = 512
        self.batch_size = batch_size
        self._prep = transforms.Compose([
            transforms.Resize((224, 224)),
            transforms.ToTensor(),
            transforms.Normalize(mean=[0.485, 0.456, 0.406],
                                 std=[0.229, 0.224, 0.225]),
        ])

    def encode(self, images) -> np.ndarray:
        torch = self._torch
        rows = []
        with torch.no_grad():
            batch = [self._prep(img.convert("RGB")) for img in images]
            for i in range(0, len(batch), self.batch_size):
                chunk = torch.stack(batch[i:i + self.batch_size])
                rows.append(self.net(chunk).cpu().numpy())
        return np.concatenate(rows).astype(np.float32)


class BertTextEncoder:
    """Pretrained BERT sentence features: sum the last four hidden states
    of every token, then mean-pool over non-padding tokens (768-d)."""

    def __init__(self, name: str = "bert-base-uncased", batch_size: int = 32):
        import torch
        from transformers import AutoModel, AutoTokenizer

        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(name)
        self.model = AutoModel.from_pretrained(name, output_hidden_states=True)
        self.model.eval()
        self.out_dim = self.model.config.hidden_size
        self.batch_size = batch_size

    def encode(self, captions) -> np.ndarray:
        torch = self._torch
        rows = []
        with torch.no_grad():
            for i in range(0, len(captions), self.batch_size):
                chunk = list(captions[i:i + self.batch_size])
                toks = self.tokenizer(chunk, padding=True, truncation=True,
                                      return_tensors="pt")
                out = self.model(**toks)
                summed = sum(out.hidden_states[-4:])          # (B, T, 768)
                mask = toks["attention_mask"].unsqueeze(-1)   # (B, T, 1)
                pooled = (summed * mask).sum(1) / mask.sum(1)
                rows.append(pooled.cpu().numpy())
        return np.concatenate(rows).astype(np.float32)


def make_image_encoder(name: str, out_dim: int):
    if name == "stub":
        return StubImageEncoder(out_dim=out_dim)
    return ResNetImageEncoder(name=name)


def make_text_encoder(name: str, out_dim: int):
    if name == "stub":
        return StubTextEncoder(out_dim=out_dim)
    return BertTextEncoder(name=name)
