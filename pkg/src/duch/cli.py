"""Command-line entry point: dataset generation, training, encoding,
evaluation, and the ablation matrix.

Every command echoes its effective configuration into the output
directory, so a run directory plus the dataset it names is enough to
reproduce the run. Exit codes: 0 success, 1 runtime or data error,
2 usage error.

Config files are JSON objects whose keys mirror the long flag names
(e.g. {"bits": 64, "epochs": 100, "ablation": ["no_adv"]}); explicit
command-line flags take precedence over file values. If the environment
variable DUCH_OUT_ROOT is set, relative --out paths are resolved under it.
"""

import argparse
import json
import os
import statistics
import sys

import numpy as np

from . import dataset as ds
from . import evaluation as ev
from . import retrieval as rt
from .errors import DuchError
from .losses import LossWeights
from .models import load_checkpoint
from .trainer import ABLATIONS, TrainConfig, train

VALID_BITS = (16, 32, 64, 128)

ABLATION_TABLE_ROWS = (
    ("DUCH", frozenset()),
    ("NA", frozenset({"no_adv"})),
    ("NQ", frozenset({"no_quant"})),
    ("NB", frozenset({"no_bb"})),
    ("CL", frozenset({"no_intra_img", "no_intra_txt"})),
    ("CL-I", frozenset({"no_intra_txt"})),
    ("CL-T", frozenset({"no_intra_img"})),
)


def _ablation_list(text: str):
    names = [t.strip() for t in text.split(",") if t.strip()]
    for name in names:
        if name not in ABLATIONS:
            raise argparse.ArgumentTypeError(
                f"unknown ablation {name!r} (choose from {', '.join(ABLATIONS)})")
    return names


def _clusters(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError(f"need at least 2 clusters, got {value}")
    return value


def _bits(text: str) -> int:
    value = int(text)
    if value not in VALID_BITS:
        raise argparse.ArgumentTypeError(
            f"code length must be one of {VALID_BITS}, got {value}")
    return value


def _int_list(text: str):
    return [int(t) for t in text.split(",") if t.strip()]


def _config_rows(text: str):
    known = {name for name, _ in ABLATION_TABLE_ROWS}
    rows = [t.strip() for t in text.split(",") if t.strip()]
    for r in rows:
        if r not in known:
            raise argparse.ArgumentTypeError(
                f"unknown configuration {r!r} (choose from {', '.join(sorted(known))})")
    return rows


def resolve_out(path: str) -> str:
    root = os.environ.get("DUCH_OUT_ROOT")
    if root and not os.path.isabs(path):
        return os.path.join(root, path)
    return path


def _echo_config(out_dir: str, payload: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# train config assembly: defaults < config file < explicit flags

_TRAIN_KEYS = ("seed", "bits", "epochs", "batch", "tau", "alpha", "beta", "gamma",
               "lambda1", "lambda2", "ablation", "lr0", "lr_decay_every",
               "lr_decay_factor", "hidden", "disc_hidden", "symmetric_inter")

_TRAIN_DEFAULTS = {
    "seed": 0, "bits": 64, "epochs": 100, "batch": 256, "tau": 0.5,
    "alpha": 0.01, "beta": 0.001, "gamma": 0.01, "lambda1": 1.0, "lambda2": 1.0,
    "ablation": [], "lr0": 1e-4, "lr_decay_every": 50, "lr_decay_factor": 0.2,
    "hidden": 1024, "disc_hidden": 512, "symmetric_inter": False,
}


def add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int)
    p.add_argument("--bits", type=_bits, help=f"code length, one of {VALID_BITS}")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--ablation", type=_ablation_list,
                   help=f"comma list from: {', '.join(ABLATIONS)}")
    p.add_argument("--lr0", type=float)
    p.add_argument("--lr-decay-every", dest="lr_decay_every", type=int)
    p.add_argument("--lr-decay-factor", dest="lr_decay_factor", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--disc-hidden", dest="disc_hidden", type=int)
    p.add_argument("--symmetric-inter", dest="symmetric_inter", action="store_const",
                   const=True, help="average in the text-anchored cross-modal term")


def effective_train_settings(args) -> dict:
    settings = dict(_TRAIN_DEFAULTS)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            file_values = json.load(fh)
        unknown = set(file_values) - set(_TRAIN_KEYS)
        if unknown:
            raise DuchError(f"{args.config}: unknown config keys {sorted(unknown)}")
        settings.update(file_values)
    for key in _TRAIN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if settings["bits"] not in VALID_BITS:
        raise DuchError(f"code length must be one of {VALID_BITS}, got {settings['bits']}")
    return settings


def train_config_from_settings(s: dict) -> TrainConfig:
    weights = LossWeights(tau=s["tau"], lambda1=s["lambda1"], lambda2=s["lambda2"],
                          alpha=s["alpha"], beta=s["beta"], gamma=s["gamma"])
    return TrainConfig(code_bits=s["bits"], batch_size=s["batch"], epochs=s["epochs"],
                       lr0=s["lr0"], lr_decay_every=s["lr_decay_every"],
                       lr_decay_factor=s["lr_decay_factor"], weights=weights,
                       seed=s["seed"], ablation=frozenset(s["ablation"]),
                       hidden_dim=s["hidden"], disc_hidden_dim=s["disc_hidden"],
                       symmetric_inter=s["symmetric_inter"])


# ---------------------------------------------------------------------------
# commands


def cmd_gen_synth(args) -> int:
    cfg = ds.SyntheticConfig(n_clusters=args.clusters, n_pairs=args.pairs,
                             d_img=args.d_img, d_txt=args.d_txt,
                             noise_sigma=args.noise_sigma, aug_sigma=args.aug_sigma,
                             seed=args.seed)
    out = resolve_out(args.out)
    dataset = ds.generate_synthetic(cfg)
    manifest = ds.save_dataset(dataset, out, provenance={
        "generator": "synthetic-clusters",
        "n_clusters": cfg.n_clusters, "noise_sigma": cfg.noise_sigma,
        "aug_sigma": cfg.aug_sigma, "seed": cfg.seed,
    })
    print(f"wrote {dataset.n} pairs to {manifest}")
    return 0


def cmd_train(args) -> int:
    settings = effective_train_settings(args)
    cfg = train_config_from_settings(settings)
    out = resolve_out(args.out)
    dataset = ds.load_dataset(args.data)
    _echo_config(out, {"command": "train", "data": args.data,
                       "train": cfg.to_dict()})
    bundle, report = train(dataset, cfg, out_dir=out)
    last = report.records[-1]
    print(f"trained {cfg.epochs} epochs; final total loss {last.total:.6f}")
    print(f"checkpoint: {report.checkpoint_path}")
    return 0


def cmd_encode(args) -> int:
    bundle, _ = load_checkpoint(args.checkpoint)
    dataset = ds.load_dataset(args.data)
    rows = dataset.rows_for_split(args.split)
    if args.modality == "img":
        net, mat = bundle.f, dataset.x
    else:
        net, mat = bundle.g, dataset.y
    codes = rt.encode_split(net, mat[rows], batch_size=args.batch)
    out = resolve_out(args.out)
    parent = os.path.dirname(out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    rt.save_codes(codes, rows, out)
    print(f"encoded {codes.n} rows ({args.modality}, {args.split}) -> {out}")
    return 0


def cmd_eval(args) -> int:
    q_codes, q_ids = rt.load_codes(args.query_codes)
    a_codes, a_ids = rt.load_codes(args.archive_codes)
    if not os.path.exists(args.labels):
        raise DuchError(f"labels file not found: {args.labels}")
    labels = np.fromfile(args.labels, dtype="<i4")
    cfg = ev.EvalConfig(map_k=args.map_k, precision_k_max=args.precision_k_max,
                        direction=args.direction)
    report = ev.evaluate(rt.RetrievalIndex(q_codes, q_ids),
                         rt.RetrievalIndex(a_codes, a_ids), labels, cfg,
                         config_echo={"query_codes": os.path.basename(args.query_codes),
                                      "archive_codes": os.path.basename(args.archive_codes),
                                      "map_k": args.map_k})
    out = resolve_out(args.out)
    os.makedirs(out, exist_ok=True)
    json_path = os.path.join(out, f"eval_{args.direction}.json")
    csv_path = os.path.join(out, f"precision_{args.direction}.csv")
    ev.write_report(report, json_path, csv_path)
    print(f"mAP@{args.map_k} ({args.direction}): {report.map_at_k:.6g}")
    if report.has_nan():
        print("error: NaN metric in report", file=sys.stderr)
        return 1
    return 0


def _ablation_run(dataset, cfg: TrainConfig, map_k: int):
    """Train once and return (i2t, t2i) mAP on the query/retrieval splits."""
    bundle, _ = train(dataset, cfg)
    q = dataset.rows_for_split("query")
    r = dataset.rows_for_split("retrieval")
    img_q = rt.RetrievalIndex(rt.encode_split(bundle.f, dataset.x[q]), q)
    txt_q = rt.RetrievalIndex(rt.encode_split(bundle.g, dataset.y[q]), q)
    img_r = rt.RetrievalIndex(rt.encode_split(bundle.f, dataset.x[r]), r)
    txt_r = rt.RetrievalIndex(rt.encode_split(bundle.g, dataset.y[r]), r)
    i2t = ev.map_at_k(img_q, txt_r, dataset.labels,
                      ev.EvalConfig(map_k=map_k, direction="img_to_txt"))
    t2i = ev.map_at_k(txt_q, img_r, dataset.labels,
                      ev.EvalConfig(map_k=map_k, direction="txt_to_img"))
    return i2t, t2i


def cmd_ablate(args) -> int:
    from dataclasses import replace

    settings = effective_train_settings(args)
    base_cfg = train_config_from_settings(settings)
    out = resolve_out(args.out)
    _echo_config(out, {"command": "ablate", "data": args.data,
                       "seeds": args.seeds, "configs": args.configs,
                       "map_k": args.map_k, "train": base_cfg.to_dict()})
    dataset = ds.load_dataset(args.data)

    rows = [r for r in ABLATION_TABLE_ROWS if r[0] in args.configs]
    summary, failed = {}, []
    for name, ablation in rows:
        per_seed = {"img_to_txt": [], "txt_to_img": []}
        for seed in args.seeds:
            cfg = replace(base_cfg, ablation=ablation, seed=seed)
            try:
                i2t, t2i = _ablation_run(dataset, cfg, args.map_k)
            except DuchError as exc:
                print(f"error: {name} seed {seed}: {exc}", file=sys.stderr)
                failed.append(name)
                break
            per_seed["img_to_txt"].append(i2t)
            per_seed["txt_to_img"].append(t2i)
        if name in failed:
            summary[name] = {"failed": True}
            continue
        summary[name] = {
            "ablation": sorted(ablation),
            "per_seed": per_seed,
            "median_img_to_txt": statistics.median(per_seed["img_to_txt"]),
            "median_txt_to_img": statistics.median(per_seed["txt_to_img"]),
        }

    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump({"map_k": args.map_k, "seeds": args.seeds, "rows": summary},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")

    lines = [f"{'config':<8} {'I->T':>10} {'T->I':>10}"]
    for name, _ in rows:
        entry = summary[name]
        if entry.get("failed"):
            lines.append(f"{name:<8} {'failed':>10} {'failed':>10}")
        else:
            lines.append(f"{name:<8} {entry['median_img_to_txt']:>10.4f} "
                         f"{entry['median_txt_to_img']:>10.4f}")
    table = "\n".join(lines) + "\n"
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(table)
    print(table, end="")
    return 1 if failed else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="duch",
        description="cross-modal hashing: train, encode, search, evaluate")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="write a synthetic clustered dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--pairs", type=int, default=2000)
    p.add_argument("--clusters", type=_clusters, default=4)
    p.add_argument("--d-img", dest="d_img", type=int, default=64)
    p.add_argument("--d-txt", dest="d_txt", type=int, default=96)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float, default=0.02)
    p.add_argument("--aug-sigma", dest="aug_sigma", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="train hash networks on a dataset")
    p.add_argument("--data", required=True, help="dataset manifest path")
    p.add_argument("--out", required=True, help="run output directory")
    add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="encode one split/modality to packed codes")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "query", "retrieval"), required=True)
    p.add_argument("--modality", choices=("img", "txt"), required=True)
    p.add_argument("--out", required=True, help="output code file")
    p.add_argument("--batch", type=int, default=256)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("eval", help="mAP@K and P@K from code files")
    p.add_argument("--query-codes", dest="query_codes", required=True)
    p.add_argument("--archive-codes", dest="archive_codes", required=True)
    p.add_argument("--labels", required=True, help="little-endian int32 label blob")
    p.add_argument("--direction", choices=ev.DIRECTIONS, required=True)
    p.add_argument("--map-k", dest="map_k", type=int, default=20)
    p.add_argument("--precision-kmax", dest="precision_k_max", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the objective-ablation matrix")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", type=_int_list, default=[0])
    p.add_argument("--configs", type=_config_rows,
                   default=[name for name, _ in ABLATION_TABLE_ROWS])
    p.add_argument("--map-k", dest="map_k", type=int, default=20)
    add_train_flags(p)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DuchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
