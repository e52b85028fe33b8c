"""Command line for the extraction pipeline.

    duch-extract --corpus PATH --out DIR [--seed N] [--stub]

`--stub` swaps both pretrained encoders for the deterministic offline
stubs (useful for plumbing tests and environments without weights).
"""

import argparse
import sys

from .config import AugmentParams, ExtractionConfig
from .pipeline import run_extraction


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="duch-extract",
        description="extract a duch-emb/1 dataset from an image+caption corpus")
    p.add_argument("--corpus", required=True, help="directory with annotations.json")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--image-encoder", default="resnet18",
                   choices=("resnet18", "resnet34", "stub"))
    p.add_argument("--text-encoder", default="bert-base-uncased")
    p.add_argument("--stub", action="store_true",
                   help="use the offline stub encoders for both modalities")
    p.add_argument("--image-size", type=int, default=224)
    p.add_argument("--crop-size", type=int, default=200)
    p.add_argument("--d-img", type=int, default=512)
    p.add_argument("--d-txt", type=int, default=768)
    p.add_argument("--synonyms", help="JSON synonym table for text augmentation")
    p.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = ExtractionConfig(
        corpus=args.corpus,
        out_dir=args.out,
        image_encoder="stub" if args.stub else args.image_encoder,
        text_encoder="stub" if args.stub else args.text_encoder,
        image_size=args.image_size,
        d_img=args.d_img,
        d_txt=args.d_txt,
        augment=AugmentParams(crop_size=args.crop_size),
        synonyms_path=args.synonyms,
        seed=args.seed,
    )
    try:
        manifest = run_extraction(cfg)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
