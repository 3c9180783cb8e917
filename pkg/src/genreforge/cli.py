"""Command-line interface for the genre toolchain.

Subcommands mirror the pipeline stages: ingest, extract (syntax | metre |
metaphor), train, eval, report, plot, plus run/validate for the declarative
grid config.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import classifier as clf
from . import evaluation as ev
from . import ingest as ing
from . import metaphor as met
from . import metre as met_re
from . import pipeline as pl
from . import syntax as syn
from .encoding import EncoderConfig

log = logging.getLogger(__name__)


def _encoder_train_from_config(path: Path | None) -> tuple[EncoderConfig, clf.TrainConfig]:
    raw = {}
    if path is not None:
        raw = pl._read_toml(Path(path)) if str(path).endswith(".toml") else json.loads(
            Path(path).read_text(encoding="utf-8")
        )
    return (
        EncoderConfig.from_dict(raw.get("encoder", {})),
        clf.TrainConfig.from_dict(raw.get("train", {})),
    )


def cmd_ingest(args) -> int:
    manifest = ing.ingest_corpus(Path(args.corpus), args.seed, args.target_per_genre)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ing.write_manifest(manifest, out)
    stats_path = Path(args.stats) if args.stats else out.parent / "stats.tsv"
    stats_path.write_text(ing.format_stats_tsv(ing.dataset_stats(manifest)), encoding="utf-8")
    print(f"wrote {len(manifest.records)} records to {out}")
    print(f"wrote stats to {stats_path}")
    return 0


def cmd_extract(args) -> int:
    manifest = ing.read_manifest(Path(args.manifest))
    ordered_ids = [r.sentence_id for r in manifest.records]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    if args.what == "syntax":
        features = syn.read_parse_dir(Path(args.parses))
        written = syn.write_syntax_sidecar(features, ordered_ids, out)
        missing = len(ordered_ids) - written
        print(f"wrote {written} syntax rows to {out}" + (f" ({missing} without parses)" if missing else ""))
        return 0

    if args.what == "metre":
        lexicons = {}
        patterns = []
        for rec in manifest.records:
            lang = rec.language
            if lang not in lexicons:
                if args.lexicon:
                    lexicons[lang] = met_re.load_stress_lexicon(
                        Path(args.lexicon) / f"{lang.value.lower()}.tsv", lang
                    )
                else:
                    lexicons[lang] = met_re.load_bundled_lexicon(lang)
            pat = met_re.metre_pattern(rec.text, lexicons[lang], lang)
            patterns.append(
                met_re.MetrePattern(bits=pat.bits, sentence_id=rec.sentence_id, oov_flags=pat.oov_flags)
            )
        pad_len = args.pad_len if args.pad_len else met_re.default_pad_len(patterns)
        met_re.write_metre_sidecar(
            patterns, out, pad_len, languages=sorted({r.language.value for r in manifest.records})
        )
        print(f"wrote {len(patterns)} metre rows to {out} (pad_len={pad_len})")
        return 0

    if args.what == "metaphor":
        annotations = met.load_token_annotations(Path(args.annotations)) if args.annotations else None
        lexicon = met.load_metaphor_lexicon(Path(args.lexicon)) if args.lexicon else None
        feats = met.extract_metaphor_features(manifest.records, annotations, lexicon)
        met.write_metaphor_sidecar(feats, out)
        print(f"wrote {len(feats)} metaphor rows to {out}")
        return 0
    raise AssertionError(args.what)


def _load_features(features_dir: Path, manifest: ing.DatasetManifest):
    syntax_features = {}
    metaphor_features = {}
    metre_patterns = {}
    syn_path = features_dir / "syntax.jsonl"
    if syn_path.exists():
        syntax_features = syn.read_syntax_sidecar(syn_path)
    met_path = features_dir / "metaphor.jsonl"
    if met_path.exists():
        metaphor_features = met.read_metaphor_sidecar(met_path)
    metre_path = features_dir / "metre.jsonl"
    pad_len = None
    if metre_path.exists():
        metre_patterns, pad_len = met_re.read_metre_sidecar(metre_path)
    bundle = pl.build_feature_bundle(manifest, syntax_features, metaphor_features, metre_patterns)
    return bundle, pad_len


def cmd_train(args) -> int:
    manifest = ing.read_manifest(Path(args.manifest))
    genre_a, genre_b = pl.parse_task(args.task)
    language = ing.Language(args.lang.upper())
    kinds = pl.parse_feature_set(args.features)
    encoder, train_cfg = _encoder_train_from_config(Path(args.config) if args.config else None)
    features_dir = Path(args.features_dir) if args.features_dir else Path(args.manifest).parent
    bundle, pad_len = _load_features(features_dir, manifest)

    pair = ing.build_pair_task(manifest, genre_a, genre_b, language)
    model, losses = clf.train_task(pair, bundle, encoder, kinds, train_cfg, pad_len=pad_len)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    clf.save_model(model, out)
    print(f"trained on {len(pair.train)} records; final epoch loss {losses[-1]:.4f}")
    print(f"wrote model to {out}")
    return 0


def cmd_eval(args) -> int:
    model = clf.load_model(Path(args.model))
    manifest = ing.read_manifest(Path(args.dataset))
    features_dir = Path(args.features_dir) if args.features_dir else Path(args.dataset).parent
    bundle, _ = _load_features(features_dir, manifest)
    genre_a, genre_b = (ing.parse_genre(g) for g in model.meta["genres"])
    language = ing.Language(model.meta["language"])
    pair = ing.build_pair_task(manifest, genre_a, genre_b, language)
    report = pl.evaluate_task(model, pair, bundle)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(f"f1 pair: {report['f1'][0]:.4f} / {report['f1'][1]:.4f}")
    print(f"wrote report to {out}")
    return 0


def _macro_summaries_from_dir(report_dir: Path) -> list[ev.MacroSummary]:
    grouped: dict[tuple[str, str], dict[str, tuple[float, float]]] = {}
    for path in sorted(Path(report_dir).glob("*.json")):
        report = json.loads(path.read_text(encoding="utf-8"))
        key = (report["task"], report["model_id"])
        grouped.setdefault(key, {})[report["language"]] = tuple(report["f1"])
    return [ev.macro_average(pairs, task, model) for (task, model), pairs in sorted(grouped.items())]


def cmd_report(args) -> int:
    baseline = _macro_summaries_from_dir(Path(args.baseline))
    augmented = _macro_summaries_from_dir(Path(args.augmented))
    rows = ev.delta_table(baseline, augmented)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(ev.render_delta_markdown([(args.label, rows)]), encoding="utf-8")
    print(f"wrote delta table ({len(rows)} rows) to {out}")
    return 0


def cmd_plot(args) -> int:
    manifest = ing.read_manifest(Path(args.manifest))
    genre_of = {r.sentence_id: r.genre for r in manifest.records}
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)

    if args.what == "syntax":
        features = syn.read_syntax_sidecar(Path(args.syntax))
        rows = ev.scatter_data(
            (sid, feat, genre_of[sid]) for sid, feat in features.items() if sid in genre_of
        )
        csv_path, svg_path = ev.emit_plot(
            rows, prefix, x_label="log(depth_ratio)", y_label="log(tree_depth + 1)"
        )
    else:
        patterns, pad_len = met_re.read_metre_sidecar(Path(args.metre))
        if args.pad_len:
            pad_len = args.pad_len
        ids = sorted(sid for sid in patterns if sid in genre_of)
        if pad_len is None:
            pad_len = met_re.default_pad_len([patterns[sid] for sid in ids])
        matrix = met_re.pad_patterns([patterns[sid] for sid in ids], pad_len)
        coords, _ = ev.pca_project(matrix, k=2)
        rows = [
            (float(coords[i, 0]), float(coords[i, 1]), genre_of[sid].value)
            for i, sid in enumerate(ids)
        ]
        csv_path, svg_path = ev.emit_plot(rows, prefix, x_label="PC1", y_label="PC2")
    print(f"wrote {csv_path} and {svg_path} ({len(rows)} points)")
    return 0


def cmd_run(args) -> int:
    config_path = Path(args.config)
    diagnostics = pl.validate_config(config_path)
    if diagnostics:
        for d in diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return 2
    config = pl.load_pipeline_config(config_path)
    summary = pl.run_pipeline(config)
    state = "reused cached artifacts" if summary.cached else "completed"
    print(f"{state}: {len(summary.artifacts)} artifacts under {summary.output_dir}")
    return 0


def cmd_validate(args) -> int:
    diagnostics = pl.validate_config(Path(args.config))
    if diagnostics:
        for d in diagnostics:
            print(d)
        return 2
    print("config is valid")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genreforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a sentence manifest from a corpus tree")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--target-per-genre", type=int, required=True)
    p.add_argument("--stats", default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="extract a feature sidecar from a manifest")
    what = p.add_subparsers(dest="what", required=True)
    ps = what.add_parser("syntax")
    ps.add_argument("--parses", required=True)
    ps.add_argument("--manifest", required=True)
    ps.add_argument("--out", required=True)
    pm = what.add_parser("metre")
    pm.add_argument("--lexicon", default=None, help="directory of <lang>.tsv files (bundled if omitted)")
    pm.add_argument("--manifest", required=True)
    pm.add_argument("--out", required=True)
    pm.add_argument("--pad-len", type=int, default=0)
    pp = what.add_parser("metaphor")
    group = pp.add_mutually_exclusive_group(required=True)
    group.add_argument("--annotations", default=None)
    group.add_argument("--lexicon", default=None)
    pp.add_argument("--manifest", required=True)
    pp.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a binary genre classifier")
    p.add_argument("--task", required=True, help="genre pair, e.g. P:N or Poetry:Novel")
    p.add_argument("--lang", required=True)
    p.add_argument("--features", default="none", help="comma-joined kinds or 'none'")
    p.add_argument("--config", default=None, help="TOML/JSON with [encoder] and [train] sections")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features-dir", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a manifest's Test split")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True, help="manifest JSONL")
    p.add_argument("--features-dir", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="baseline-vs-augmented delta table")
    p.add_argument("--baseline", required=True, help="directory of baseline report.json files")
    p.add_argument("--augmented", required=True)
    p.add_argument("--label", default="feature")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("plot", help="scatter plot data (CSV + SVG)")
    what = p.add_subparsers(dest="what", required=True)
    ps = what.add_parser("syntax")
    ps.add_argument("--syntax", required=True, help="syntax.jsonl sidecar")
    ps.add_argument("--manifest", required=True)
    ps.add_argument("--out", required=True, help="output path prefix")
    pm = what.add_parser("metre")
    pm.add_argument("--metre", required=True, help="metre.jsonl sidecar")
    pm.add_argument("--manifest", required=True)
    pm.add_argument("--out", required=True, help="output path prefix")
    pm.add_argument("--pad-len", type=int, default=0)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("run", help="run the full grid from a pipeline config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="validate a pipeline config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
