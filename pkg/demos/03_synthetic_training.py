#!/usr/bin/env python3
"""End-to-end walkthrough at desk scale: generate clustered paired
embeddings, train the two hash networks with the full multi-objective
loss, encode the query and retrieval splits, and evaluate both retrieval
directions. Runs in well under a minute; scale the knobs up to taste."""

from duch.dataset import SyntheticConfig, generate_synthetic
from duch.evaluation import EvalConfig, map_at_k, precision_curve
from duch.retrieval import RetrievalIndex, encode_split
from duch.trainer import TrainConfig, train

# --- data: 4 clusters of paired image/text embeddings ------------------------
data_cfg = SyntheticConfig(n_clusters=4, n_pairs=600, d_img=64, d_txt=96, seed=0)
ds = generate_synthetic(data_cfg)
print(f"dataset: {ds.n} pairs, d_img={ds.d_img}, d_txt={ds.d_txt}, "
      f"{len(ds.rows_for_split('train'))}/{len(ds.rows_for_split('query'))}/"
      f"{len(ds.rows_for_split('retrieval'))} train/query/retrieval")

# --- train (small hidden layer keeps the demo quick) -------------------------
cfg = TrainConfig(code_bits=16, epochs=15, batch_size=64, hidden_dim=128,
                  disc_hidden_dim=64, seed=0)
bundle, record = train(ds, cfg)
first, last = record.records[0], record.records[-1]
print(f"\ntrained {cfg.epochs} epochs "
      f"(total loss {first.total:.3f} -> {last.total:.3f})")
print(f"components at the last epoch: inter={last.L_C_inter:.3f} "
      f"img={last.L_C_img:.3f} txt={last.L_C_txt:.3f} "
      f"quant={last.L_Q:.4f} bb={last.L_BB:.4f}")

# --- encode splits and evaluate both directions -------------------------------
q, r = ds.rows_for_split("query"), ds.rows_for_split("retrieval")
img_q = RetrievalIndex(encode_split(bundle.f, ds.x[q]), q)
txt_q = RetrievalIndex(encode_split(bundle.g, ds.y[q]), q)
img_r = RetrievalIndex(encode_split(bundle.f, ds.x[r]), r)
txt_r = RetrievalIndex(encode_split(bundle.g, ds.y[r]), r)

i2t = map_at_k(img_q, txt_r, ds.labels, EvalConfig(map_k=20))
t2i = map_at_k(txt_q, img_r, ds.labels, EvalConfig(map_k=20, direction="txt_to_img"))
print(f"\nmAP@20  image->text: {i2t:.4f}   text->image: {t2i:.4f}")

curve = precision_curve(img_q, txt_r, ds.labels, EvalConfig())
shown = {k: p for k, p in curve if k in (1, 5, 10, 20, 50, 100)}
print("P@K (image->text):", "  ".join(f"P@{k}={p:.3f}" for k, p in shown.items()))

# untrained baseline for contrast
from duch.models import init_bundle

fresh = init_bundle(ds.d_img, ds.d_txt, 16, hidden=128, seed=99, disc_hidden=64)
base_q = RetrievalIndex(encode_split(fresh.f, ds.x[q]), q)
base_r = RetrievalIndex(encode_split(fresh.g, ds.y[r]), r)
base = map_at_k(base_q, base_r, ds.labels, EvalConfig(map_k=20))
print(f"\nuntrained-network baseline mAP@20 (image->text): {base:.4f}")
