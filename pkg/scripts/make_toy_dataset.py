"""Write a small PPM corpus (train + held-out split) for the desk-scale presets.

    python scripts/make_toy_dataset.py data/toy --train 20 --val 5 --size 64
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from src.utils.toy_images import write_toy_corpus  # noqa: E402


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--train", type=int, default=20)
    parser.add_argument("--val", type=int, default=5)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--gray", action="store_true")
    return parser.parse_args(argv)


if __name__ == '__main__':
    args = parse_args()
    channels = 1 if args.gray else 3
    train, _ = write_toy_corpus(args.out_dir, args.train, args.size, args.seed, channels, prefix="train")
    print(f"Wrote {len(train)} training images to {args.out_dir / 'train.tsv'}")
    if args.val:
        val, _ = write_toy_corpus(args.out_dir, args.val, args.size, args.seed + 1, channels, prefix="val")
        print(f"Wrote {len(val)} held-out images to {args.out_dir / 'val.tsv'}")
