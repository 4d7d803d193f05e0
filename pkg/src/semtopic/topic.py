"""Per-cluster topic extraction and topic merging.

Every candidate word in a cluster's vocabulary is scored by its mean
cosine similarity to all of the cluster's sentence vectors:

    score(w) = (1/N) * sum_j cos(w, s_j)

Low-relevance words are filtered, the best ``top_k`` become the topic, and
topics whose similarity exceeds a threshold merge iteratively, least-ranked
topic first, optionally down to a requested topic count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import Sentence
from .embed import EmbeddingMatrix, EmbeddingProvider, cosine, embed_texts


class TopicError(ValueError):
    """Degenerate vocabulary or invalid topic configuration."""


@dataclass
class TopicConfig:
    top_k: int = 10
    relevance_percentile: float = 25.0
    relevance_floor: float = 0.05
    merge_threshold: float = 0.7
    target_topic_count: int | None = None
    similarity: str = "cosine"  # cosine | jaccard | euclidean
    single_pass: bool = False
    exact_rescore: bool = False

    def validate(self) -> None:
        if self.top_k < 1:
            raise TopicError("top_k must be >= 1")
        if not (0 <= self.relevance_percentile < 100):
            raise TopicError("relevance_percentile must be in [0, 100)")
        if not (0 < self.merge_threshold <= 1):
            raise TopicError("merge_threshold must be in (0, 1]")
        if self.target_topic_count is not None and self.target_topic_count < 1:
            raise TopicError("target_topic_count must be >= 1")
        if self.similarity not in ("cosine", "jaccard", "euclidean"):
            raise TopicError(f"unknown similarity measure: {self.similarity!r}")


@dataclass(frozen=True)
class ScoredWord:
    word: str
    score: float


@dataclass(frozen=True)
class ClusterVocabulary:
    """One cluster's unique words and the aligned vector blocks."""

    cluster_id: int
    words: tuple[str, ...]
    word_vectors: EmbeddingMatrix
    sentence_ids: tuple[int, ...]
    sentence_vectors: EmbeddingMatrix

    def __post_init__(self):
        if len(set(self.words)) != len(self.words):
            raise TopicError("vocabulary words must be unique")
        if self.word_vectors.n != len(self.words):
            raise TopicError("word vector rows must align with words")
        if self.sentence_vectors.n != len(self.sentence_ids):
            raise TopicError("sentence vector rows must align with sentence ids")


@dataclass(frozen=True)
class Topic:
    """Ranked top words for one cluster (or a merged lineage of clusters)."""

    id: int
    cluster_ids: tuple[int, ...]
    top_words: tuple[ScoredWord, ...]
    centroid: np.ndarray
    word_vectors: np.ndarray  # rows aligned with top_words
    size: int  # sentences represented

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(sw.word for sw in self.top_words)

    @property
    def mean_score(self) -> float:
        return float(sum(sw.score for sw in self.top_words) / len(self.top_words))


@dataclass(frozen=True)
class TopicSet:
    topics: tuple[Topic, ...]
    lineage: dict[int, frozenset[int]]  # output topic id -> absorbed input ids


def build_vocabulary(
    cluster_id: int,
    sentences: Sequence[Sentence],
    sentence_ids: Sequence[int],
    sentence_vectors: EmbeddingMatrix,
    provider: EmbeddingProvider,
    **embed_kwargs,
) -> ClusterVocabulary:
    """Unique words over the cluster's sentences, in first-occurrence
    order, with vectors fetched from the word provider."""
    if not sentences:
        raise TopicError(f"cluster {cluster_id} has no sentences")
    words: list[str] = []
    seen: set[str] = set()
    for sentence in sentences:
        for token in sentence.tokens:
            if token not in seen:
                seen.add(token)
                words.append(token)
    if not words:
        raise TopicError(f"empty vocabulary for cluster {cluster_id}")
    word_vectors = embed_texts(provider, words, kind="word", **embed_kwargs)
    return ClusterVocabulary(
        cluster_id=cluster_id,
        words=tuple(words),
        word_vectors=word_vectors,
        sentence_ids=tuple(sentence_ids),
        sentence_vectors=sentence_vectors,
    )


def _unit_rows(matrix: EmbeddingMatrix) -> tuple[np.ndarray, np.ndarray]:
    block = np.asarray(matrix.values, dtype=np.float64)
    norms = np.sqrt((block * block).sum(axis=1))
    good = norms > 0.0
    safe = np.where(good, norms, 1.0)
    return block / safe[:, None], good


def score_words(vocab: ClusterVocabulary) -> list[ScoredWord]:
    """Mean cosine similarity of each word to every cluster sentence,
    accumulated in float64; sorted by (score desc, word asc)."""
    word_unit, word_ok = _unit_rows(vocab.word_vectors)
    sent_unit, sent_ok = _unit_rows(vocab.sentence_vectors)
    if not sent_ok.all():
        raise TopicError(f"cluster {vocab.cluster_id} has a zero-norm sentence vector")
    sims = word_unit @ sent_unit.T
    scores = sims.mean(axis=1)
    scored = []
    for i, word in enumerate(vocab.words):
        if not word_ok[i]:
            warnings.warn(f"dropping zero-norm word vector: {word!r}")
            continue
        scored.append(ScoredWord(word=word, score=float(scores[i])))
    scored.sort(key=lambda sw: (-sw.score, sw.word))
    return scored


def filter_relevant(scored: Sequence[ScoredWord], cfg: TopicConfig) -> list[ScoredWord]:
    """Drop words scoring below the cluster's relevance percentile and
    below the absolute floor, but never below ``top_k`` survivors."""
    if not scored:
        return []
    values = [sw.score for sw in scored]
    pct = float(np.percentile(values, cfg.relevance_percentile))
    survivors = [
        sw for sw in scored if not (sw.score < pct and sw.score < cfg.relevance_floor)
    ]
    if len(survivors) < cfg.top_k:
        survivors = list(scored[: cfg.top_k])
    return survivors


def _centroid_of(vectors: np.ndarray) -> np.ndarray:
    mean = np.asarray(vectors, dtype=np.float64).mean(axis=0)
    norm = float(np.sqrt(mean @ mean))
    if norm == 0.0:
        raise TopicError("degenerate topic centroid: top-word vectors cancel out")
    return (mean / norm).astype(np.float32)


def extract_topic(vocab: ClusterVocabulary, cfg: TopicConfig) -> Topic:
    """Score, filter, and keep the best ``top_k`` words as the topic."""
    cfg.validate()
    scored = score_words(vocab)
    if not scored:
        raise TopicError(f"empty vocabulary for cluster {vocab.cluster_id}")
    kept = filter_relevant(scored, cfg)[: cfg.top_k]
    row_of = {word: i for i, word in enumerate(vocab.words)}
    vectors = np.stack([vocab.word_vectors.values[row_of[sw.word]] for sw in kept])
    return Topic(
        id=vocab.cluster_id,
        cluster_ids=(vocab.cluster_id,),
        top_words=tuple(kept),
        centroid=_centroid_of(vectors),
        word_vectors=vectors.astype(np.float32),
        size=len(vocab.sentence_ids),
    )


def topic_similarity(t_i: Topic, t_j: Topic, similarity: str = "cosine") -> float:
    if similarity == "cosine":
        return cosine(t_i.centroid, t_j.centroid)
    if similarity == "jaccard":
        a, b = set(t_i.words), set(t_j.words)
        union = a | b
        return len(a & b) / len(union) if union else 0.0
    if similarity == "euclidean":
        diff = np.asarray(t_i.centroid, dtype=np.float64) - np.asarray(t_j.centroid, dtype=np.float64)
        return 1.0 / (1.0 + float(np.sqrt(diff @ diff)))
    raise TopicError(f"unknown similarity measure: {similarity!r}")


class _WorkTopic:
    """Mutable merge-time view of a topic."""

    __slots__ = ("scores", "vectors", "size", "input_ids", "cluster_ids", "order", "centroid")

    def __init__(self, topic: Topic):
        self.scores = {sw.word: sw.score for sw in topic.top_words}
        self.vectors = {sw.word: topic.word_vectors[i] for i, sw in enumerate(topic.top_words)}
        self.size = topic.size
        self.input_ids = {topic.id}
        self.cluster_ids = set(topic.cluster_ids)
        self.order = [sw.word for sw in topic.top_words]
        self.centroid = topic.centroid

    def mean_score(self) -> float:
        return sum(self.scores[w] for w in self.order) / len(self.order)

    def refresh(self, top_k: int) -> None:
        ranked = sorted(self.scores.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
        self.order = [w for w, _ in ranked]
        self.scores = {w: s for w, s in ranked}
        self.vectors = {w: self.vectors[w] for w in self.order}
        self.centroid = _centroid_of(np.stack([self.vectors[w] for w in self.order]))


def _work_similarity(a: _WorkTopic, b: _WorkTopic, similarity: str) -> float:
    if similarity == "cosine":
        return cosine(a.centroid, b.centroid)
    if similarity == "jaccard":
        union = set(a.order) | set(b.order)
        return len(set(a.order) & set(b.order)) / len(union) if union else 0.0
    diff = np.asarray(a.centroid, dtype=np.float64) - np.asarray(b.centroid, dtype=np.float64)
    return 1.0 / (1.0 + float(np.sqrt(diff @ diff)))


def _merge_pair(
    a: _WorkTopic,
    b: _WorkTopic,
    cfg: TopicConfig,
    vocabularies: Mapping[int, ClusterVocabulary] | None,
) -> _WorkTopic:
    merged = _WorkTopic.__new__(_WorkTopic)
    merged.size = a.size + b.size
    merged.input_ids = a.input_ids | b.input_ids
    merged.cluster_ids = a.cluster_ids | b.cluster_ids
    merged.vectors = {**b.vectors, **a.vectors}

    words = sorted(set(a.scores) | set(b.scores))
    if cfg.exact_rescore and vocabularies is not None:
        # Recompute the mean-similarity score over the merged sentence set.
        blocks = [
            np.asarray(vocabularies[c].sentence_vectors.values, dtype=np.float64)
            for c in sorted(merged.cluster_ids)
        ]
        sentences = np.vstack(blocks)
        sentences = sentences / np.sqrt((sentences * sentences).sum(axis=1))[:, None]
        merged.scores = {}
        for w in words:
            vec = np.asarray(merged.vectors[w], dtype=np.float64)
            vec = vec / np.sqrt(vec @ vec)
            merged.scores[w] = float((sentences @ vec).mean())
    else:
        # Size-weighted mean of the word's scores in the topics holding it.
        merged.scores = {}
        for w in words:
            weight = 0.0
            total = 0.0
            if w in a.scores:
                weight += a.size
                total += a.scores[w] * a.size
            if w in b.scores:
                weight += b.size
                total += b.scores[w] * b.size
            merged.scores[w] = total / weight
    merged.order = words
    merged.refresh(cfg.top_k)
    return merged


def _iterative_merge(
    work: list[_WorkTopic],
    cfg: TopicConfig,
    vocabularies: Mapping[int, ClusterVocabulary] | None,
) -> list[_WorkTopic]:
    target = cfg.target_topic_count
    while len(work) > 1:
        if target is not None and len(work) <= target:
            break
        # Least-ranked topics get first chance to be absorbed.
        by_rank = sorted(range(len(work)), key=lambda i: (work[i].mean_score(), min(work[i].input_ids)))
        found = None
        for i in by_rank:
            best_j, best_sim = -1, -np.inf
            for j in range(len(work)):
                if j == i:
                    continue
                sim = _work_similarity(work[i], work[j], cfg.similarity)
                if sim > best_sim:
                    best_j, best_sim = j, sim
            if best_sim > cfg.merge_threshold:
                found = (i, best_j)
                break
        if found is None:
            if target is None or len(work) <= target:
                break
            # Forced reduction: merge the globally most similar pair.
            best = (-np.inf, -1, -1)
            for i in range(len(work)):
                for j in range(i + 1, len(work)):
                    sim = _work_similarity(work[i], work[j], cfg.similarity)
                    if sim > best[0]:
                        best = (sim, i, j)
            found = (best[1], best[2])
        i, j = found
        merged = _merge_pair(work[i], work[j], cfg, vocabularies)
        work = [w for idx, w in enumerate(work) if idx not in (i, j)]
        work.append(merged)
    return work


def _single_pass_merge(
    work: list[_WorkTopic],
    cfg: TopicConfig,
    vocabularies: Mapping[int, ClusterVocabulary] | None,
) -> list[_WorkTopic]:
    merged_flag = [False] * len(work)
    out: list[_WorkTopic] = []
    for i in range(len(work)):
        for j in range(len(work)):
            if i == j or merged_flag[i] or merged_flag[j]:
                continue
            if _work_similarity(work[i], work[j], cfg.similarity) > cfg.merge_threshold:
                out.append(_merge_pair(work[i], work[j], cfg, vocabularies))
                merged_flag[i] = True
                merged_flag[j] = True
    for i, flag in enumerate(merged_flag):
        if not flag:
            out.append(work[i])
    return out


def merge_topics(
    topics: Sequence[Topic],
    cfg: TopicConfig,
    vocabularies: Mapping[int, ClusterVocabulary] | None = None,
) -> TopicSet:
    """Merge similar topics.

    Iterative mode (default): repeatedly merge the least-ranked topic into
    its most similar counterpart while some pair exceeds the threshold;
    when ``target_topic_count`` is set, keep merging the globally closest
    pair until the target is reached. Single-pass mode does one sweep over
    all pairs instead. Output topics are renumbered by decreasing mean
    top-word score; ``lineage`` partitions the input topic ids.
    """
    cfg.validate()
    if not topics:
        raise TopicError("no topics to merge")
    if len({t.id for t in topics}) != len(topics):
        raise TopicError("input topic ids must be unique")
    if cfg.exact_rescore and vocabularies is None:
        raise TopicError("exact_rescore requires cluster vocabularies")

    work = [_WorkTopic(t) for t in topics]
    if cfg.single_pass:
        work = _single_pass_merge(work, cfg, vocabularies)
    else:
        work = _iterative_merge(work, cfg, vocabularies)

    work.sort(key=lambda w: (-w.mean_score(), min(w.input_ids)))
    out_topics: list[Topic] = []
    lineage: dict[int, frozenset[int]] = {}
    for new_id, w in enumerate(work):
        top_words = tuple(ScoredWord(word=word, score=w.scores[word]) for word in w.order)
        vectors = np.stack([w.vectors[word] for word in w.order]).astype(np.float32)
        out_topics.append(
            Topic(
                id=new_id,
                cluster_ids=tuple(sorted(w.cluster_ids)),
                top_words=top_words,
                centroid=w.centroid,
                word_vectors=vectors,
                size=w.size,
            )
        )
        lineage[new_id] = frozenset(w.input_ids)
    return TopicSet(topics=tuple(out_topics), lineage=lineage)
