#!/usr/bin/env python3
"""Generate a small self-contained demo suite: corpus tree, parses,
metaphor annotations, lexicons, and a ready-to-run pipeline.toml.

Usage:
    python scripts/make_demo_corpus.py --out demo [--seed N] [--languages EN,FR]
    genreforge run --config demo/pipeline.toml
"""

import argparse
from pathlib import Path

from genreforge.ingest import Language
from genreforge.synthetic import build_demo_suite


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="target directory for the suite")
    parser.add_argument("--seed", type=int, default=20240601)
    parser.add_argument("--languages", default="EN,FR", help="comma-joined language codes")
    parser.add_argument("--tasks", default="P:N,N:D", help="comma-joined genre pairs")
    parser.add_argument("--target-per-genre", type=int, default=40)
    parser.add_argument("--sentences-per-cell", type=int, default=60)
    args = parser.parse_args()

    languages = [Language(code.strip().upper()) for code in args.languages.split(",")]
    tasks = [t.strip() for t in args.tasks.split(",")]
    config_path = build_demo_suite(
        Path(args.out),
        languages=languages,
        tasks=tasks,
        seed=args.seed,
        target_per_genre=args.target_per_genre,
        sentences_per_cell=args.sentences_per_cell,
    )
    print(f"demo suite ready under {Path(args.out).resolve()}")
    print(f"next: genreforge run --config {config_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
