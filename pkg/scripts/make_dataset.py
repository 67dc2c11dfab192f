#!/usr/bin/env python3
"""Write the built-in synthetic labelled dataset (240 class-0 and 460
class-1 items, nine attributes each) to a CSV file, or convert a raw
UCI-format file into the same CSV layout."""

import argparse

from dca import load_uci, synthetic_items
from dca.datasets import write_items


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", help="destination CSV path")
    parser.add_argument("--uci", metavar="PATH", default=None,
                        help="convert this raw UCI file instead of "
                             "generating synthetic items")
    parser.add_argument("--seed", type=int, default=97)
    args = parser.parse_args()

    if args.uci:
        with open(args.uci) as fh:
            items = load_uci(fh)
    else:
        items = synthetic_items(seed=args.seed)
    with open(args.out, "w") as fh:
        write_items(items, fh)
    print(f"wrote {len(items)} items to {args.out}")


if __name__ == "__main__":
    main()
