#!/usr/bin/env python3
"""Regenerate the bundled smoke-test fixture under data/fixture/.

The fixture is a 500-document, 8-theme corpus in the flavor of newsgroup
posts, with a precomputed embedding store covering every sentence and
vocabulary word. Generation is fully seeded, so the committed files are
reproducible byte-for-byte.
"""

import argparse
from pathlib import Path

from semtopic.synth import SynthSpec, write_fixture


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        default=str(Path(__file__).resolve().parent.parent / "data" / "fixture"),
    )
    parser.add_argument("--n-docs", type=int, default=500)
    parser.add_argument("--seed", type=int, default=20)
    args = parser.parse_args()

    spec = SynthSpec(n_docs=args.n_docs, seed=args.seed)
    paths = write_fixture(args.out, spec)
    for name, path in paths.items():
        print(f"{name}: {path}")


if __name__ == "__main__":
    main()
