#!/usr/bin/env python3
"""Recompute the reference report tables from the bundled transformer F1 scores.

Feeds the per-language baseline F1 pairs through macro_average to rebuild the
cross-language Average rows, then builds the baseline-vs-feature delta table
(whole-point deltas with improve/decline flags) from the Average rows of the
baseline and of each feature-augmented run.

Usage:
    python scripts/reproduce_reference_tables.py [--out table.md]
"""

import argparse
import json
from importlib import resources
from pathlib import Path

from genreforge.evaluation import (
    MacroSummary,
    delta_table,
    macro_average,
    render_delta_markdown,
)


def load_reference() -> dict:
    path = resources.files("genreforge.data.reference") / "transformer_f1.json"
    return json.loads(path.read_text(encoding="utf-8"))


def summaries_from_table(table: dict) -> list[MacroSummary]:
    return [
        MacroSummary(task=task, model=model, macro=(x + y) / 2, genre_means=(x, y))
        for model, tasks in table.items()
        for task, (x, y) in tasks.items()
    ]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=None, help="optional markdown output path")
    args = parser.parse_args()

    ref = load_reference()
    print("Average rows recomputed from per-language F1 pairs (reported in parens):")
    for model in ref["models"]:
        cells = []
        for task in ref["tasks"]:
            pairs = {
                lang: tuple(ref["per_language_baseline"][lang][model][task])
                for lang in ref["languages"]
            }
            mx, my = macro_average(pairs, task, model).genre_means
            rx, ry = ref["baseline_average"][model][task]
            cells.append(f"{task}: {mx:.2f}/{my:.2f} ({rx:.2f}/{ry:.2f})")
        print(f"  {model:18s} " + " | ".join(cells))

    baseline = summaries_from_table(ref["baseline_average"])
    sections = []
    for feature, table in ref["feature_average"].items():
        sections.append((feature, delta_table(baseline, summaries_from_table(table))))
    markdown = render_delta_markdown(sections)
    print("\nDelta table (baseline Average rows vs feature-run Average rows):\n")
    print(markdown)
    if args.out:
        Path(args.out).write_text(markdown, encoding="utf-8")
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
