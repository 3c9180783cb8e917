"""End-to-end orchestration: ingest -> extract -> train -> eval -> report -> plot.

A single TOML config drives the full grid {tasks x languages x feature-kind
sets}.  Every artifact is checksummed into run_summary.json; reruns with an
identical config reuse the completed grid instead of retraining.  All
randomness derives from config seeds, so artifacts are byte-identical across
reruns.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import classifier as clf
from . import evaluation as ev
from . import ingest as ing
from . import metaphor as met
from . import metre as met_re
from . import syntax as syn
from .encoding import EncoderConfig, FeatureStats, LinguisticFeatures, encode_records
from .ingest import Genre, Language

WORKERS_ENV = "GENREFORGE_WORKERS"

VALID_FEATURE_NAMES = {"none", "syntax", "metaphor", "metre"}


class ParseError(ValueError):
    """Config file could not be parsed (message carries line/column)."""


class PipelineError(RuntimeError):
    """A pipeline stage failed; the message is prefixed with the stage name."""


@dataclass
class PipelineConfig:
    corpus_dir: Path
    output_dir: Path
    lexicon_dir: Path | None
    parse_dir: Path | None
    metaphor_annotations: Path | None
    metaphor_lexicon: Path | None
    ingest_seed: int
    target_per_genre: int
    tasks: list[tuple[Genre, Genre]]
    languages: list[Language]
    feature_sets: list[frozenset[str]]
    encoder: EncoderConfig
    train: clf.TrainConfig
    pad_len: int | None = None
    raw: dict = field(default_factory=dict)


def kinds_slug(kinds: frozenset[str]) -> str:
    return "none" if not kinds else "-".join(sorted(kinds))


def parse_task(text: str) -> tuple[Genre, Genre]:
    parts = [p for p in text.replace("+", ":").split(":") if p.strip()]
    if len(parts) != 2:
        raise ValueError(f"task {text!r} is not a genre pair like 'P:N'")
    a, b = (ing.parse_genre(p) for p in parts)
    if a == b:
        raise ValueError(f"task {text!r} pairs a genre with itself")
    return a, b


def parse_feature_set(text: str) -> frozenset[str]:
    names = {p.strip().lower() for p in text.split(",") if p.strip()}
    if names in ({"none"}, set()):
        return frozenset()
    unknown = names - (VALID_FEATURE_NAMES - {"none"})
    if unknown:
        raise ValueError(f"unknown feature kinds: {sorted(unknown)}")
    return frozenset(names)


def _read_toml(path: Path) -> dict:
    try:
        with Path(path).open("rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def load_pipeline_config(path: Path) -> PipelineConfig:
    path = Path(path)
    raw = _read_toml(path)
    base = path.parent

    def resolve(section: str, key: str, required: bool = False) -> Path | None:
        value = raw.get(section, {}).get(key)
        if value is None:
            if required:
                raise ValueError(f"[{section}].{key} is required")
            return None
        return (base / value).resolve()

    paths = raw.get("paths", {})
    if "corpus" not in paths or "output" not in paths:
        raise ValueError("[paths].corpus and [paths].output are required")
    grid = raw.get("grid", {})
    tasks = [parse_task(t) for t in grid.get("tasks", [])]
    languages = [Language(l.upper()) for l in grid.get("languages", [])]
    feature_sets = [parse_feature_set(f) for f in grid.get("feature_sets", ["none"])]
    if not tasks or not languages:
        raise ValueError("[grid].tasks and [grid].languages must be non-empty")

    metre_cfg = raw.get("metre", {})
    pad_len = metre_cfg.get("pad_len")
    if pad_len in (0, None):
        pad_len = None
    return PipelineConfig(
        corpus_dir=resolve("paths", "corpus", required=True),
        output_dir=resolve("paths", "output", required=True),
        lexicon_dir=resolve("paths", "lexicons"),
        parse_dir=resolve("paths", "parses"),
        metaphor_annotations=resolve("paths", "metaphor_annotations"),
        metaphor_lexicon=resolve("paths", "metaphor_lexicon"),
        ingest_seed=int(raw.get("ingest", {}).get("seed", 0)),
        target_per_genre=int(raw.get("ingest", {}).get("target_per_genre", 1500)),
        tasks=tasks,
        languages=languages,
        feature_sets=feature_sets,
        encoder=EncoderConfig.from_dict(raw.get("encoder", {})),
        train=clf.TrainConfig.from_dict(raw.get("train", {})),
        pad_len=int(pad_len) if pad_len is not None else None,
        raw=raw,
    )


def validate_config(path: Path) -> list[str]:
    """Every missing path, bad enum, and out-of-range value; empty when clean."""
    path = Path(path)
    diagnostics: list[str] = []
    if not path.exists():
        return [f"config file not found: {path.resolve()}"]
    try:
        raw = _read_toml(path)
    except ParseError as exc:
        return [str(exc)]
    base = path.parent

    paths = raw.get("paths", {})
    for key in ("corpus", "output"):
        if key not in paths:
            diagnostics.append(f"[paths].{key} is missing")
    for key in ("corpus", "lexicons", "parses", "metaphor_annotations", "metaphor_lexicon"):
        value = paths.get(key)
        if value is not None:
            resolved = (base / value).resolve()
            if not resolved.exists():
                diagnostics.append(f"[paths].{key}: path does not exist: {resolved}")

    grid = raw.get("grid", {})
    for t in grid.get("tasks", []):
        try:
            parse_task(t)
        except ValueError as exc:
            diagnostics.append(f"[grid].tasks: {exc}")
    if not grid.get("tasks"):
        diagnostics.append("[grid].tasks must be non-empty")
    for lang in grid.get("languages", []):
        try:
            Language(str(lang).upper())
        except ValueError:
            diagnostics.append(f"[grid].languages: unknown language {lang!r}")
    if not grid.get("languages"):
        diagnostics.append("[grid].languages must be non-empty")
    feature_sets = grid.get("feature_sets", ["none"])
    uses: set[str] = set()
    for f in feature_sets:
        try:
            uses |= parse_feature_set(f)
        except ValueError as exc:
            diagnostics.append(f"[grid].feature_sets: {exc}")
    if "syntax" in uses and paths.get("parses") is None:
        diagnostics.append("[paths].parses is required when a feature set uses 'syntax'")
    if "metaphor" in uses and not (paths.get("metaphor_annotations") or paths.get("metaphor_lexicon")):
        diagnostics.append(
            "[paths].metaphor_annotations or [paths].metaphor_lexicon is required "
            "when a feature set uses 'metaphor'"
        )

    try:
        EncoderConfig.from_dict(raw.get("encoder", {}))
    except (ValueError, TypeError) as exc:
        diagnostics.append(f"[encoder]: {exc}")
    try:
        clf.TrainConfig.from_dict(raw.get("train", {}))
    except (ValueError, TypeError) as exc:
        diagnostics.append(f"[train]: {exc}")

    ingest_cfg = raw.get("ingest", {})
    if int(ingest_cfg.get("target_per_genre", 1500)) < 1:
        diagnostics.append("[ingest].target_per_genre must be >= 1")
    return diagnostics


def config_hash(raw: Mapping) -> str:
    canonical = json.dumps(raw, sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Feature assembly

def build_feature_bundle(
    manifest: ing.DatasetManifest,
    syntax_features: Mapping[str, syn.SyntaxFeature] | None = None,
    metaphor_features: Mapping[str, met.MetaphorFeature] | None = None,
    metre_patterns: Mapping[str, met_re.MetrePattern] | None = None,
) -> dict[str, LinguisticFeatures]:
    bundle = {}
    for rec in manifest.records:
        sid = rec.sentence_id
        bundle[sid] = LinguisticFeatures(
            syntax=(syntax_features or {}).get(sid),
            metaphor=(metaphor_features or {}).get(sid),
            metre=(metre_patterns or {}).get(sid),
        )
    return bundle


def evaluate_task(
    model: clf.ClassifierModel,
    task: ing.PairTask,
    features: Mapping[str, LinguisticFeatures],
) -> dict:
    """Test-split report: {task, language, model_id, f1: [x, y], support: [n_x, n_y]}."""
    kinds = frozenset(model.meta["kinds"])
    stats = FeatureStats.from_dict(model.meta["feature_stats"])
    encoder = EncoderConfig.from_dict(model.meta["encoder"])
    X = encode_records(task.test, features, kinds, encoder, stats)
    preds = clf.predict(model, X)
    labels = [task.label_of(rec) for rec in task.test]
    pair = ev.f1_pair(list(preds), labels)
    support = ev.support_pair(labels)
    cls_x = task.labels[task.genres[0]]
    cls_y = task.labels[task.genres[1]]
    return {
        "task": task.display,
        "language": task.language.value,
        "model_id": model.meta["model_id"],
        "kinds": sorted(kinds),
        "genres": [g.value for g in task.genres],
        "f1": [pair[cls_x], pair[cls_y]],
        "support": [support[cls_x], support[cls_y]],
    }


# ---------------------------------------------------------------------------
# Run driver

@dataclass
class RunSummary:
    output_dir: Path
    config_hash: str
    artifacts: dict[str, str]
    cached: bool

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "artifacts": self.artifacts,
            "cached": self.cached,
        }


def _summary_path(out: Path) -> Path:
    return out / "run_summary.json"


def _try_cached(out: Path, digest: str) -> RunSummary | None:
    summary_path = _summary_path(out)
    if not summary_path.exists():
        return None
    try:
        data = json.loads(summary_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return None
    if data.get("config_hash") != digest:
        return None
    artifacts = data.get("artifacts", {})
    for rel, checksum in artifacts.items():
        target = out / rel
        if not target.exists() or sha256_file(target) != checksum:
            return None
    return RunSummary(output_dir=out, config_hash=digest, artifacts=artifacts, cached=True)


class _Run:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self.out = Path(config.output_dir)
        self.written: list[Path] = []
        self.stage = "setup"

    def path(self, *parts: str) -> Path:
        p = self.out.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        self.written.append(p)
        return p

    def preserve_failures(self) -> None:
        failed = self.out / "failed"
        for p in self.written:
            if not p.exists():
                continue
            rel = p.relative_to(self.out)
            target = failed / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            shutil.move(str(p), str(target))


def run_pipeline(config: PipelineConfig) -> RunSummary:
    """Execute the full grid; returns the artifact summary with checksums."""
    digest = config_hash(config.raw)
    out = Path(config.output_dir)
    cached = _try_cached(out, digest)
    if cached is not None:
        return cached
    out.mkdir(parents=True, exist_ok=True)

    run = _Run(config)
    try:
        return _run_stages(run, digest)
    except Exception as exc:
        run.preserve_failures()
        raise PipelineError(f"stage {run.stage}: {exc}") from exc


def _run_stages(run: _Run, digest: str) -> RunSummary:
    config = run.config
    out = run.out

    run.stage = "ingest"
    manifest = ing.ingest_corpus(config.corpus_dir, config.ingest_seed, config.target_per_genre)
    ing.write_manifest(manifest, run.path("manifest.jsonl"))
    run.written.append(ing.manifest_meta_path(out / "manifest.jsonl"))
    run.path("stats.tsv").write_text(
        ing.format_stats_tsv(ing.dataset_stats(manifest)), encoding="utf-8"
    )

    run.stage = "extract"
    used_kinds: set[str] = set().union(*config.feature_sets) if config.feature_sets else set()
    ordered_ids = [rec.sentence_id for rec in manifest.records]

    syntax_features: dict[str, syn.SyntaxFeature] = {}
    if "syntax" in used_kinds:
        if config.parse_dir is None:
            raise ValueError("feature set 'syntax' requires [paths].parses")
        syntax_features = syn.read_parse_dir(config.parse_dir)
        syn.write_syntax_sidecar(syntax_features, ordered_ids, run.path("features", "syntax.jsonl"))

    metre_patterns: dict[str, met_re.MetrePattern] = {}
    pad_len = config.pad_len
    if "metre" in used_kinds:
        lexicons = {}
        for lang in config.languages:
            if config.lexicon_dir is not None:
                lexicons[lang] = met_re.load_stress_lexicon(
                    Path(config.lexicon_dir) / f"{lang.value.lower()}.tsv", lang
                )
            else:
                lexicons[lang] = met_re.load_bundled_lexicon(lang)
        ordered_patterns = []
        for rec in manifest.records:
            pat = met_re.metre_pattern(rec.text, lexicons[rec.language], rec.language)
            pat = met_re.MetrePattern(
                bits=pat.bits, sentence_id=rec.sentence_id, oov_flags=pat.oov_flags
            )
            metre_patterns[rec.sentence_id] = pat
            ordered_patterns.append(pat)
        if pad_len is None:
            pad_len = met_re.default_pad_len(ordered_patterns)
        met_re.write_metre_sidecar(
            ordered_patterns,
            run.path("features", "metre.jsonl"),
            pad_len,
            languages=[l.value for l in config.languages],
        )
        run.written.append(met_re.metre_meta_path(out / "features" / "metre.jsonl"))

    metaphor_features: dict[str, met.MetaphorFeature] = {}
    if "metaphor" in used_kinds:
        annotations = None
        lexicon = None
        if config.metaphor_annotations is not None:
            annotations = met.load_token_annotations(config.metaphor_annotations)
        elif config.metaphor_lexicon is not None:
            lexicon = met.load_metaphor_lexicon(config.metaphor_lexicon)
        else:
            raise ValueError("feature set 'metaphor' requires annotations or a lexicon")
        feats = met.extract_metaphor_features(manifest.records, annotations, lexicon)
        metaphor_features = {f.sentence_id: f for f in feats}
        met.write_metaphor_sidecar(feats, run.path("features", "metaphor.jsonl"))
        _write_metaphor_averages(run, manifest, metaphor_features)

    bundle = build_feature_bundle(manifest, syntax_features, metaphor_features, metre_patterns)

    run.stage = "train-eval"
    cells = [
        (task, lang, kinds)
        for task in config.tasks
        for lang in config.languages
        for kinds in config.feature_sets
    ]
    # Pre-create artifact paths so parallel workers never race on mkdir.
    cell_paths = {}
    for task, lang, kinds in cells:
        slug = _cell_slug(task, lang, kinds)
        cell_paths[slug] = (
            run.path("models", f"{slug}.json"),
            run.path("reports", f"{slug}.json"),
        )

    def run_cell(cell):
        task_pair, lang, kinds = cell
        slug = _cell_slug(task_pair, lang, kinds)
        pair = ing.build_pair_task(manifest, task_pair[0], task_pair[1], lang)
        cell_train = clf.TrainConfig.from_dict(
            {**config.train.to_dict(), "seed": clf.derive_cell_seed(config.train.seed, slug)}
        )
        model, _ = clf.train_task(
            pair,
            bundle,
            config.encoder,
            kinds,
            cell_train,
            pad_len=pad_len if "metre" in kinds else None,
        )
        report = evaluate_task(model, pair, bundle)
        model_path, report_path = cell_paths[slug]
        clf.save_model(model, model_path)
        report_path.write_text(
            json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        return kinds, report

    workers = int(os.environ.get(WORKERS_ENV, "1") or "1")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(cell) for cell in cells]

    run.stage = "report"
    summaries: dict[frozenset[str], list[ev.MacroSummary]] = {}
    by_set_task: dict[tuple[frozenset[str], str, str], dict[str, tuple[float, float]]] = {}
    for kinds, report in results:
        key = (kinds, report["task"], report["model_id"])
        by_set_task.setdefault(key, {})[report["language"]] = tuple(report["f1"])
    for (kinds, task, model_id), pairs in sorted(
        by_set_task.items(), key=lambda kv: (kinds_slug(kv[0][0]), kv[0][1], kv[0][2])
    ):
        summaries.setdefault(kinds, []).append(ev.macro_average(pairs, task, model_id))

    macro_doc = {
        kinds_slug(kinds): [
            {
                "task": s.task,
                "model": s.model,
                "macro": s.macro,
                "genre_means": list(s.genre_means),
            }
            for s in rows
        ]
        for kinds, rows in summaries.items()
    }
    run.path("tables", "macro_summaries.json").write_text(
        json.dumps(macro_doc, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )

    baseline = summaries.get(frozenset())
    sections = []
    if baseline is not None:
        for kinds in config.feature_sets:
            if not kinds:
                continue
            rows = ev.delta_table(baseline, summaries[kinds])
            sections.append((kinds_slug(kinds), rows))
    if sections:
        run.path("tables", "delta_table.md").write_text(
            ev.render_delta_markdown(sections), encoding="utf-8"
        )

    run.stage = "plot"
    for task_pair in config.tasks:
        for lang in config.languages:
            pair = ing.build_pair_task(manifest, task_pair[0], task_pair[1], lang)
            records = list(pair.train) + list(pair.test)
            if syntax_features:
                rows = ev.scatter_data(
                    (rec.sentence_id, syntax_features[rec.sentence_id], rec.genre)
                    for rec in records
                    if rec.sentence_id in syntax_features
                )
                prefix = run.path("plots", f"syntax_{pair.slug}.csv").with_suffix("")
                run.written.append(prefix.with_suffix(".svg"))
                ev.emit_plot(rows, prefix, x_label="log(depth_ratio)", y_label="log(tree_depth + 1)")
            if metre_patterns:
                recs = [rec for rec in records if rec.sentence_id in metre_patterns]
                recs.sort(key=lambda r: r.sentence_id)
                matrix = met_re.pad_patterns([metre_patterns[r.sentence_id] for r in recs], pad_len)
                coords, _ = ev.pca_project(matrix, k=2)
                if coords.shape[1] < 2:
                    coords = np.pad(coords, ((0, 0), (0, 2 - coords.shape[1])))
                rows = [
                    (float(coords[i, 0]), float(coords[i, 1]), rec.genre.value)
                    for i, rec in enumerate(recs)
                ]
                prefix = run.path("plots", f"metre_{pair.slug}.csv").with_suffix("")
                run.written.append(prefix.with_suffix(".svg"))
                ev.emit_plot(rows, prefix, x_label="PC1", y_label="PC2")

    run.stage = "summary"
    artifacts = {}
    for p in sorted(set(run.written)):
        if p.exists():
            artifacts[str(p.relative_to(out))] = sha256_file(p)
    summary = RunSummary(output_dir=out, config_hash=digest, artifacts=artifacts, cached=False)
    _summary_path(out).write_text(
        json.dumps(summary.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return summary


def _cell_slug(task_pair: tuple[Genre, Genre], lang: Language, kinds: frozenset[str]) -> str:
    return (
        f"{task_pair[0].value.lower()}_{task_pair[1].value.lower()}"
        f"_{lang.value.lower()}__{kinds_slug(kinds)}"
    )


def _write_metaphor_averages(
    run: _Run, manifest: ing.DatasetManifest, features: Mapping[str, met.MetaphorFeature]
) -> None:
    lines = ["language\tgenre\tmean_count\tsource\tn"]
    sources = {f.source.value for f in features.values()}
    source_label = "+".join(sorted(sources)) if sources else "none"
    for lang in ing.LANGUAGES:
        recs = [r for r in manifest.records if r.language is lang]
        if not recs:
            continue
        means = met.genre_average_metaphors(
            (features[r.sentence_id], r.genre) for r in recs if r.sentence_id in features
        )
        counts: dict[Genre, int] = {}
        for r in recs:
            counts[r.genre] = counts.get(r.genre, 0) + 1
        for genre in ing.GENRES:
            if genre in means:
                lines.append(
                    f"{lang.value}\t{genre.value}\t{means[genre]:.2f}\t{source_label}\t{counts[genre]}"
                )
    run.path("tables", "metaphor_genre_averages.tsv").write_text(
        "\n".join(lines) + "\n", encoding="utf-8"
    )
