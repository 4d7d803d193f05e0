"""Command-line pipeline orchestration and model persistence.

Subcommands: fit, topics, evaluate, merge, export-plot. A fitted model is
a plain directory of tab-separated tables plus two binary vector stores,
versioned and byte-stable: rerunning fit with the same config and seed
reproduces identical files.

Exit codes: 0 success, 1 usage error, 2 stage failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import coherence as coherence_mod
from .cluster import ClusterAssignment, ClusterConfig, ClusterError, cluster_points
from .coherence import CoherenceConfig, CoherenceError, CoherenceReport, evaluate_topics
from .corpus import (
    Corpus,
    CorpusError,
    DEFAULT_STOPWORDS,
    load_corpus,
    load_stopwords,
    tokenize,
)
from .embed import (
    EmbeddingError,
    EmbeddingMatrix,
    EmbeddingProvider,
    embed_texts,
    read_embedding_file,
    write_embedding_file,
)
from .reduce import Layout, LayoutError, ReduceConfig, ReduceError, reduce_embeddings
from .topic import (
    ScoredWord,
    Topic,
    TopicConfig,
    TopicError,
    TopicSet,
    build_vocabulary,
    extract_topic,
    merge_topics,
)

logger = logging.getLogger("semtopic")

ARTIFACT_VERSION = "semtopic-artifact 1"
PROVIDER_URL_ENV = "SEMTOPIC_PROVIDER_URL"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_STAGE = 2


class UsageError(ValueError):
    """Bad flags, config keys, or argument values."""


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class ArtifactError(ValueError):
    """Missing, corrupt, or version-mismatched model directory."""


@dataclass
class PipelineConfig:
    corpus_path: str = ""
    corpus_format: str = "lines"
    stopwords_path: str = ""
    provider_kind: str = "file"
    provider_location: str = ""
    model_name: str = ""
    batch_size: int = 64
    retries: int = 3
    max_in_flight: int = 4
    reduce: ReduceConfig = field(default_factory=ReduceConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    topic: TopicConfig = field(default_factory=TopicConfig)
    coherence: CoherenceConfig = field(default_factory=CoherenceConfig)
    seed: int = 0
    output_dir: str = ""
    threads: int = 1


# config-file key -> (attribute path, parser). Every CLI flag writes
# through exactly one of these entries.
def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_opt_int(raw: str):
    lowered = raw.strip().lower()
    if lowered in ("", "none"):
        return None
    return int(raw)


CONFIG_KEYS: dict[str, tuple[str, object]] = {
    "corpus.path": ("corpus_path", str),
    "corpus.format": ("corpus_format", str),
    "corpus.stopwords": ("stopwords_path", str),
    "provider.kind": ("provider_kind", str),
    "provider.location": ("provider_location", str),
    "provider.model_name": ("model_name", str),
    "provider.batch_size": ("batch_size", int),
    "provider.retries": ("retries", int),
    "provider.max_in_flight": ("max_in_flight", int),
    "reduce.n_neighbors": ("reduce.n_neighbors", int),
    "reduce.min_dist": ("reduce.min_dist", float),
    "reduce.n_components": ("reduce.n_components", int),
    "reduce.n_epochs": ("reduce.n_epochs", _parse_opt_int),
    "reduce.negative_sample_rate": ("reduce.negative_sample_rate", int),
    "reduce.spread": ("reduce.spread", float),
    "cluster.min_cluster_size": ("cluster.min_cluster_size", int),
    "cluster.min_samples": ("cluster.min_samples", _parse_opt_int),
    "topic.top_k": ("topic.top_k", int),
    "topic.relevance_percentile": ("topic.relevance_percentile", float),
    "topic.relevance_floor": ("topic.relevance_floor", float),
    "topic.merge_threshold": ("topic.merge_threshold", float),
    "topic.target_topic_count": ("topic.target_topic_count", _parse_opt_int),
    "topic.similarity": ("topic.similarity", str),
    "topic.single_pass": ("topic.single_pass", _parse_bool),
    "topic.exact_rescore": ("topic.exact_rescore", _parse_bool),
    "coherence.cv_window": ("coherence.cv_window", int),
    "coherence.pmi_window": ("coherence.pmi_window", int),
    "coherence.eps": ("coherence.eps", float),
    "run.seed": ("seed", int),
    "run.output_dir": ("output_dir", str),
    "run.threads": ("threads", int),
}


def set_config_value(config: PipelineConfig, key: str, raw: str) -> None:
    try:
        attr_path, parser = CONFIG_KEYS[key]
    except KeyError:
        raise UsageError(f"unknown config key: {key!r}") from None
    try:
        value = raw if parser is str else parser(raw)
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {exc}") from exc
    target = config
    *sections, attr = attr_path.split(".")
    for section in sections:
        target = getattr(target, section)
    setattr(target, attr, value)


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat ``section.key = value`` lines; ``#`` comments and blanks skipped."""
    entries: dict[str, str] = {}
    try:
        content = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"unreadable config file {path}: {exc}") from exc
    for lineno, line in enumerate(content.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        entries[key.strip()] = raw.strip()
    return entries


def config_snapshot(config: PipelineConfig) -> str:
    """Serialize the resolved config as sorted key = value lines."""
    lines = []
    for key in sorted(CONFIG_KEYS):
        attr_path, _ = CONFIG_KEYS[key]
        target = config
        *sections, attr = attr_path.split(".")
        for section in sections:
            target = getattr(target, section)
        value = getattr(target, attr)
        rendered = "" if value is None else (str(value).lower() if isinstance(value, bool) else str(value))
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


def load_config(config_path: str | None, overrides: dict[str, str]) -> PipelineConfig:
    config = PipelineConfig()
    if config_path:
        for key, raw in parse_config_file(config_path).items():
            set_config_value(config, key, raw)
    for key, raw in overrides.items():
        set_config_value(config, key, raw)
    return config


def resolve_provider(config: PipelineConfig) -> EmbeddingProvider:
    location = config.provider_location
    if config.provider_kind == "http":
        location = os.environ.get(PROVIDER_URL_ENV, location)
    if not location:
        raise EmbeddingError("no provider location configured")
    return EmbeddingProvider(
        kind=config.provider_kind, location=location, model_name=config.model_name
    )


# ---------------------------------------------------------------------------
# artifact persistence

def _fmt(value: float) -> str:
    return repr(float(value))


def _canon_text(text: str) -> str:
    # Stored tables are TSV; collapse internal whitespace so text stays
    # single-field (texts are compared modulo whitespace anyway).
    return " ".join(text.split())


def _write_sentences(path: Path, corpus: Corpus) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write("index\tdoc_id\tsent_index\ttext\ttokens\n")
        for i, s in enumerate(corpus.sentences):
            fh.write(f"{i}\t{s.doc_id}\t{s.index}\t{_canon_text(s.text)}\t{' '.join(s.tokens)}\n")


def _write_clusters(path: Path, assignment: ClusterAssignment) -> None:
    stab = assignment.stabilities
    with path.open("w", encoding="utf-8") as fh:
        fh.write("index\tlabel\tprobability\tcluster_stability\n")
        for i, label in enumerate(assignment.labels):
            label = int(label)
            stability = stab[label] if label >= 0 else 0.0
            fh.write(f"{i}\t{label}\t{_fmt(assignment.probabilities[i])}\t{_fmt(stability)}\n")


def _write_topics(path: Path, topic_set: TopicSet) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write("topic_id\tsize\tcluster_ids\tlineage\twords\n")
        for topic in topic_set.topics:
            words = " ".join(f"{sw.word}:{_fmt(sw.score)}" for sw in topic.top_words)
            lineage = ",".join(str(i) for i in sorted(topic_set.lineage[topic.id]))
            cluster_ids = ",".join(str(c) for c in topic.cluster_ids)
            fh.write(f"{topic.id}\t{topic.size}\t{cluster_ids}\t{lineage}\t{words}\n")


def _write_word_store(base: Path, topic_set: TopicSet) -> None:
    vectors: dict[str, np.ndarray] = {}
    for topic in topic_set.topics:
        for i, sw in enumerate(topic.top_words):
            vectors.setdefault(sw.word, topic.word_vectors[i])
    keys = tuple(sorted(vectors))
    values = np.stack([vectors[k] for k in keys]).astype(np.float32)
    write_embedding_file(EmbeddingMatrix(values=values, keys=keys, normalized=False), base)


def _write_report(path: Path, report: CoherenceReport | None) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write("metric\ttopic\tscore\n")
        if report is None:
            return
        for metric, rows in report.per_topic.items():
            for label, score in rows:
                fh.write(f"{metric}\t{label}\t{_fmt(score)}\n")
        for metric, value in report.averages.items():
            fh.write(f"{metric}\taverage\t{_fmt(value)}\n")


def _layout_matrix(layout: Layout) -> EmbeddingMatrix:
    keys = tuple(str(i) for i in range(layout.n))
    return EmbeddingMatrix(values=layout.points, keys=keys, normalized=False)


def write_artifact(
    out_dir: str | Path,
    config: PipelineConfig,
    corpus: Corpus,
    layout_nd: Layout,
    layout_2d: Layout,
    assignment: ClusterAssignment,
    topic_set: TopicSet,
    report: CoherenceReport | None = None,
    force: bool = False,
) -> Path:
    """Persist the fitted model atomically (build aside, then rename)."""
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not force:
        raise ArtifactError(f"output directory {out} exists and is not empty (use --force)")
    staging = out.parent / (out.name + ".partial")
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)
    try:
        (staging / "VERSION").write_text(ARTIFACT_VERSION + "\n", encoding="utf-8")
        (staging / "config.snapshot").write_text(config_snapshot(config), encoding="utf-8")
        _write_sentences(staging / "sentences.tsv", corpus)
        write_embedding_file(_layout_matrix(layout_2d), staging / "layout2d")
        write_embedding_file(_layout_matrix(layout_nd), staging / "layoutNd")
        _write_clusters(staging / "clusters.tsv", assignment)
        _write_topics(staging / "topics.tsv", topic_set)
        _write_word_store(staging / "words", topic_set)
        _write_report(staging / "report.tsv", report)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    if out.exists():
        shutil.rmtree(out)
    os.replace(staging, out)
    return out


@dataclass
class ModelArtifact:
    directory: Path
    config: PipelineConfig
    sentences: list[dict]
    layout_nd: EmbeddingMatrix
    layout_2d: EmbeddingMatrix
    labels: np.ndarray
    probabilities: np.ndarray
    stabilities: dict[int, float]
    topic_set: TopicSet
    report_rows: list[tuple[str, str, float]]


def _read_tsv(path: Path) -> list[dict]:
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ArtifactError(f"empty table: {path}")
    header = lines[0].split("\t")
    rows = []
    for line in lines[1:]:
        parts = line.split("\t")
        if len(parts) != len(header):
            raise ArtifactError(f"malformed row in {path}: {line!r}")
        rows.append(dict(zip(header, parts)))
    return rows


def _centroid_from_rows(vectors: np.ndarray) -> np.ndarray:
    mean = np.asarray(vectors, dtype=np.float64).mean(axis=0)
    norm = float(np.sqrt(mean @ mean))
    return (mean / norm).astype(np.float32)


def load_artifact(model_dir: str | Path) -> ModelArtifact:
    directory = Path(model_dir)
    version_file = directory / "VERSION"
    if not version_file.exists():
        raise ArtifactError(f"{directory} is not a model directory (no VERSION)")
    version = version_file.read_text(encoding="utf-8").strip()
    if version != ARTIFACT_VERSION:
        raise ArtifactError(f"unsupported artifact version {version!r}, expected {ARTIFACT_VERSION!r}")

    config = PipelineConfig()
    for key, raw in parse_config_file(directory / "config.snapshot").items():
        set_config_value(config, key, raw)

    sentences = _read_tsv(directory / "sentences.tsv")
    layout_2d = read_embedding_file(directory / "layout2d")
    layout_nd = read_embedding_file(directory / "layoutNd")

    cluster_rows = _read_tsv(directory / "clusters.tsv")
    labels = np.array([int(r["label"]) for r in cluster_rows], dtype=np.int64)
    probabilities = np.array([float(r["probability"]) for r in cluster_rows], dtype=np.float64)
    stabilities = {
        int(r["label"]): float(r["cluster_stability"]) for r in cluster_rows if int(r["label"]) >= 0
    }

    words_store = read_embedding_file(directory / "words")
    word_row = {key: i for i, key in enumerate(words_store.keys)}
    topics = []
    lineage: dict[int, frozenset[int]] = {}
    for row in _read_tsv(directory / "topics.tsv"):
        topic_id = int(row["topic_id"])
        scored = []
        for entry in row["words"].split(" "):
            word, _, score = entry.rpartition(":")
            scored.append(ScoredWord(word=word, score=float(score)))
        vectors = np.stack([words_store.values[word_row[sw.word]] for sw in scored])
        topics.append(
            Topic(
                id=topic_id,
                cluster_ids=tuple(int(c) for c in row["cluster_ids"].split(",")),
                top_words=tuple(scored),
                centroid=_centroid_from_rows(vectors),
                word_vectors=vectors.astype(np.float32),
                size=int(row["size"]),
            )
        )
        lineage[topic_id] = frozenset(int(i) for i in row["lineage"].split(","))

    report_rows = []
    report_path = directory / "report.tsv"
    if report_path.exists():
        for row in _read_tsv(report_path):
            report_rows.append((row["metric"], row["topic"], float(row["score"])))

    return ModelArtifact(
        directory=directory,
        config=config,
        sentences=sentences,
        layout_nd=layout_nd,
        layout_2d=layout_2d,
        labels=labels,
        probabilities=probabilities,
        stabilities=stabilities,
        topic_set=TopicSet(topics=tuple(topics), lineage=lineage),
        report_rows=report_rows,
    )


# ---------------------------------------------------------------------------
# commands

def _stage(name: str):
    class _StageContext:
        def __enter__(self):
            self.start = time.monotonic()
            return self

        def __exit__(self, exc_type, exc, tb):
            elapsed = time.monotonic() - self.start
            if exc is None:
                logger.info("stage %s finished in %.2fs", name, elapsed)
                return False
            raise StageError(name, exc) from exc

    return _StageContext()


def _load_stopword_set(config: PipelineConfig):
    if config.stopwords_path:
        return load_stopwords(config.stopwords_path)
    return DEFAULT_STOPWORDS


def cmd_fit(config: PipelineConfig, force: bool = False) -> Path:
    """Run the whole pipeline and persist the model."""
    if not config.corpus_path:
        raise UsageError("fit requires a corpus path (corpus.path / --corpus)")
    if not config.output_dir:
        raise UsageError("fit requires an output directory (run.output_dir / --out)")

    with _stage("corpus"):
        stopwords = _load_stopword_set(config)
        corpus = load_corpus(config.corpus_path, config.corpus_format, stopwords=stopwords)
        logger.info(
            "corpus: %d documents, %d sentences", len(corpus.documents), len(corpus.sentences)
        )

    with _stage("embed"):
        provider = resolve_provider(config)
        texts = [s.text for s in corpus.sentences]
        in_flight = max(1, min(config.max_in_flight, config.threads))
        sentence_matrix = embed_texts(
            provider,
            texts,
            kind="sentence",
            batch_size=config.batch_size,
            retries=config.retries,
            max_in_flight=in_flight,
        )
        logger.info("embedded %d sentences (dim %d)", sentence_matrix.n, sentence_matrix.d)

    with _stage("reduce"):
        nd_cfg = replace(config.reduce, seed=config.seed)
        layout_nd = reduce_embeddings(sentence_matrix, nd_cfg)
        plot_cfg = replace(config.reduce, n_components=2, seed=config.seed + 1)
        layout_2d = reduce_embeddings(sentence_matrix, plot_cfg)

    with _stage("cluster"):
        assignment = cluster_points(layout_nd, config.cluster)
        n_noise = int((assignment.labels == -1).sum())
        logger.info(
            "clusters: %d, noise sentences: %d of %d",
            assignment.n_clusters, n_noise, len(corpus.sentences),
        )
        if assignment.n_clusters == 0:
            raise ClusterError("no clusters found; all sentences labeled noise")

    with _stage("topics"):
        topics = []
        vocabularies = {}
        for label in range(assignment.n_clusters):
            ids = [int(i) for i in np.flatnonzero(assignment.labels == label)]
            vocab = build_vocabulary(
                cluster_id=label,
                sentences=[corpus.sentences[i] for i in ids],
                sentence_ids=ids,
                sentence_vectors=sentence_matrix.subset(ids),
                provider=provider,
                batch_size=config.batch_size,
                retries=config.retries,
            )
            vocabularies[label] = vocab
            topics.append(extract_topic(vocab, config.topic))

    with _stage("merge"):
        topic_set = merge_topics(
            topics,
            config.topic,
            vocabularies if config.topic.exact_rescore else None,
        )
        logger.info("topics after merge: %d", len(topic_set.topics))

    with _stage("persist"):
        out = write_artifact(
            config.output_dir,
            config,
            corpus,
            layout_nd,
            layout_2d,
            assignment,
            topic_set,
            report=None,
            force=force,
        )
    return out


def cmd_topics(model_dir: str, top_k: int | None = None, abs_umass: bool = False, out=None) -> None:
    """Print the topic table, with per-topic scores when evaluated."""
    out = out or sys.stdout
    artifact = load_artifact(model_dir)
    cv_scores = {
        label: score for metric, label, score in artifact.report_rows if metric == "c_v"
    }
    out.write("topic_id\tsize\tc_v\twords\n")
    shown = []
    for topic in artifact.topic_set.topics:
        words = topic.top_words if top_k is None else topic.top_words[:top_k]
        rendered = " ".join(f"{sw.word}:{sw.score:.4f}" for sw in words)
        cv = cv_scores.get(str(topic.id))
        shown.append(cv)
        out.write(f"{topic.id}\t{topic.size}\t{'' if cv is None else f'{cv:.4f}'}\t{rendered}\n")
    evaluated = [v for v in shown if v is not None]
    average = f"{sum(evaluated) / len(evaluated):.4f}" if evaluated else ""
    out.write(f"average\t\t{average}\t\n")


def _artifact_doc_tokens(artifact: ModelArtifact) -> list[list[str]]:
    tokens_by_doc: dict[str, list[str]] = {}
    for row in artifact.sentences:
        tokens_by_doc.setdefault(row["doc_id"], []).extend(
            row["tokens"].split(" ") if row["tokens"] else []
        )
    return list(tokens_by_doc.values())


def cmd_evaluate(
    model_dir: str,
    metrics: list[str] | None = None,
    reference_path: str | None = None,
    reference_format: str = "lines",
    abs_umass: bool = False,
    out=None,
) -> CoherenceReport:
    """Score the model's topics and persist report.tsv."""
    out = out or sys.stdout
    artifact = load_artifact(model_dir)
    metrics = metrics or list(coherence_mod.METRICS)
    if reference_path:
        stopwords = (
            load_stopwords(artifact.config.stopwords_path)
            if artifact.config.stopwords_path
            else DEFAULT_STOPWORDS
        )
        reference = load_corpus(reference_path, reference_format, stopwords=stopwords)
        doc_tokens = reference.doc_tokens()
    else:
        doc_tokens = _artifact_doc_tokens(artifact)
    report = evaluate_topics(
        artifact.topic_set.topics, doc_tokens, metrics=metrics, cfg=artifact.config.coherence
    )
    _write_report(artifact.directory / "report.tsv", report)
    out.write("metric\ttopic\tscore\n")
    for metric, rows in report.per_topic.items():
        for label, score in rows:
            display = abs(score) if (abs_umass and metric == "u_mass") else score
            out.write(f"{metric}\t{label}\t{display:.4f}\n")
    for metric, value in report.averages.items():
        display = abs(value) if (abs_umass and metric == "u_mass") else value
        out.write(f"{metric}\taverage\t{display:.4f}\n")
    return report


def cmd_merge(
    model_dir: str,
    threshold: float | None = None,
    target_count: int | None = None,
    similarity: str | None = None,
    single_pass: bool = False,
) -> TopicSet:
    """Re-merge the persisted topics and rewrite the model tables."""
    artifact = load_artifact(model_dir)
    cfg = artifact.config.topic
    if threshold is not None:
        cfg.merge_threshold = threshold
    if target_count is not None:
        cfg.target_topic_count = target_count
    if similarity is not None:
        cfg.similarity = similarity
    cfg.single_pass = single_pass
    cfg.exact_rescore = False  # sentence vectors are not part of the artifact
    topic_set = merge_topics(artifact.topic_set.topics, cfg)
    _write_topics(artifact.directory / "topics.tsv", topic_set)
    _write_word_store(artifact.directory / "words", topic_set)
    # Old per-topic scores no longer line up with the merged topics.
    _write_report(artifact.directory / "report.tsv", None)
    logger.info("merged %d topics into %d", len(artifact.topic_set.topics), len(topic_set.topics))
    return topic_set


def cmd_export_plot(model_dir: str, space: str = "2d", out_path: str | None = None, out=None) -> int:
    """Write one row per sentence: position, cluster label, probability."""
    artifact = load_artifact(model_dir)
    layout = artifact.layout_2d if space == "2d" else artifact.layout_nd
    dim = layout.d
    columns = ["x", "y"] if dim == 2 else [f"x{d}" for d in range(dim)]
    header = "sentence_index\tdoc_id\t" + "\t".join(columns) + "\tlabel\tprobability\n"
    lines = [header]
    for i, row in enumerate(artifact.sentences):
        coords = "\t".join(_fmt(v) for v in layout.values[i])
        lines.append(
            f"{i}\t{row['doc_id']}\t{coords}\t{int(artifact.labels[i])}\t{_fmt(artifact.probabilities[i])}\n"
        )
    text = "".join(lines)
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        (out or sys.stdout).write(text)
    return len(artifact.sentences)


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_FIT_FLAGS = {
    "--corpus": "corpus.path",
    "--format": "corpus.format",
    "--stopwords": "corpus.stopwords",
    "--provider-kind": "provider.kind",
    "--provider": "provider.location",
    "--model-name": "provider.model_name",
    "--batch-size": "provider.batch_size",
    "--retries": "provider.retries",
    "--max-in-flight": "provider.max_in_flight",
    "--n-neighbors": "reduce.n_neighbors",
    "--min-dist": "reduce.min_dist",
    "--n-components": "reduce.n_components",
    "--n-epochs": "reduce.n_epochs",
    "--negative-sample-rate": "reduce.negative_sample_rate",
    "--spread": "reduce.spread",
    "--min-cluster-size": "cluster.min_cluster_size",
    "--min-samples": "cluster.min_samples",
    "--top-k": "topic.top_k",
    "--relevance-percentile": "topic.relevance_percentile",
    "--relevance-floor": "topic.relevance_floor",
    "--merge-threshold": "topic.merge_threshold",
    "--target-topic-count": "topic.target_topic_count",
    "--similarity": "topic.similarity",
    "--single-pass": "topic.single_pass",
    "--exact-rescore": "topic.exact_rescore",
    "--cv-window": "coherence.cv_window",
    "--pmi-window": "coherence.pmi_window",
    "--eps": "coherence.eps",
    "--seed": "run.seed",
    "--out": "run.output_dir",
    "--threads": "run.threads",
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="semtopic", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    fit = sub.add_parser("fit", help="run the pipeline and persist a model")
    fit.add_argument("--config", help="config file of section.key = value lines")
    fit.add_argument("--force", action="store_true", help="overwrite the output directory")
    for flag, key in _FIT_FLAGS.items():
        if key in ("topic.single_pass", "topic.exact_rescore"):
            fit.add_argument(flag, dest=key, action="store_const", const="true", default=None)
        else:
            fit.add_argument(flag, dest=key, default=None)

    topics = sub.add_parser("topics", help="print the topic table")
    topics.add_argument("model_dir")
    topics.add_argument("--top-k", type=int, default=None)
    topics.add_argument("--abs", action="store_true", dest="abs_umass")

    evaluate = sub.add_parser("evaluate", help="score topics and persist report.tsv")
    evaluate.add_argument("model_dir")
    evaluate.add_argument("--metrics", default=None, help="comma-separated subset of c_v,c_npmi,c_uci,u_mass")
    evaluate.add_argument("--reference", default=None, help="external reference corpus path")
    evaluate.add_argument("--reference-format", default="lines", choices=("lines", "jsonl"))
    evaluate.add_argument("--abs", action="store_true", dest="abs_umass",
                          help="display u_mass magnitudes (the stored report keeps the sign)")

    merge = sub.add_parser("merge", help="re-merge topics in a fitted model")
    merge.add_argument("model_dir")
    merge.add_argument("--threshold", type=float, default=None)
    merge.add_argument("--target-count", type=int, default=None)
    merge.add_argument("--similarity", default=None, choices=("cosine", "jaccard", "euclidean"))
    merge.add_argument("--single-pass", action="store_true")

    export = sub.add_parser("export-plot", help="dump per-sentence layout, label, probability")
    export.add_argument("model_dir")
    export.add_argument("--space", default="2d", choices=("2d", "cluster"))
    export.add_argument("--out", default=None)
    return parser


_STAGE_ERRORS = (
    CorpusError, EmbeddingError, ReduceError, LayoutError, ClusterError,
    TopicError, CoherenceError, ArtifactError, StageError, OSError,
)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand (fit, topics, evaluate, merge, export-plot)")
        if args.command == "fit":
            overrides = {
                key: getattr(args, key)
                for key in _FIT_FLAGS.values()
                if getattr(args, key) is not None
            }
            config = load_config(args.config, overrides)
            out = cmd_fit(config, force=args.force)
            print(out)
        elif args.command == "topics":
            cmd_topics(args.model_dir, top_k=args.top_k, abs_umass=args.abs_umass)
        elif args.command == "evaluate":
            metrics = args.metrics.split(",") if args.metrics else None
            cmd_evaluate(
                args.model_dir,
                metrics=metrics,
                reference_path=args.reference,
                reference_format=args.reference_format,
                abs_umass=args.abs_umass,
            )
        elif args.command == "merge":
            cmd_merge(
                args.model_dir,
                threshold=args.threshold,
                target_count=args.target_count,
                similarity=args.similarity,
                single_pass=args.single_pass,
            )
        elif args.command == "export-plot":
            cmd_export_plot(args.model_dir, space=args.space, out_path=args.out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _STAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
