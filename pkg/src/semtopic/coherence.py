"""Topic coherence metrics computed against a reference corpus.

Four measures over a topic's top words:

* c_uci / c_npmi: mean (normalized) pointwise mutual information over all
  unordered word pairs, estimated from 10-token sliding windows.
* u_mass: ordered log conditional document co-occurrence,
  log((D(w_i, w_j) + 1) / D(w_j)), averaged over pairs.
* c_v: for every top word, an NPMI context vector against all top words
  (110-token windows); the score is the mean cosine between each word's
  vector and the summed vector of the whole set.

A window of size s starts at every token position of a document and is
truncated at the document tail, so a document with L tokens contributes L
windows. Each window counts every distinct word and unordered pair once.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Mapping, Sequence

from .corpus import Corpus

logger = logging.getLogger(__name__)

METRICS = ("c_v", "c_npmi", "c_uci", "u_mass")


class CoherenceError(ValueError):
    """Invalid metric input (empty corpus, single-word topic, ...)."""


@dataclass
class CoherenceConfig:
    cv_window: int = 110
    pmi_window: int = 10  # shared by c_uci and c_npmi
    eps: float = 1e-12

    def validate(self) -> None:
        if self.cv_window < 1 or self.pmi_window < 1:
            raise CoherenceError("window sizes must be >= 1")
        if self.eps <= 0:
            raise CoherenceError("eps must be > 0")


@dataclass(frozen=True)
class WindowCounts:
    """Sliding-window occurrence counts.

    When ``vocabulary`` is set, only those words were counted (the window
    total still covers the whole corpus).
    """

    window: int
    total_windows: int
    unigrams: Mapping[str, int]
    pairs: Mapping[tuple[str, str], int]
    vocabulary: frozenset[str] | None = None

    def unigram(self, w: str) -> int:
        return self.unigrams.get(w, 0)

    def pair(self, w1: str, w2: str) -> int:
        if w1 == w2:
            # A word trivially co-occurs with itself wherever it appears.
            return self.unigrams.get(w1, 0)
        key = (w1, w2) if w1 < w2 else (w2, w1)
        return self.pairs.get(key, 0)


@dataclass(frozen=True)
class DocCounts:
    """Document-level frequencies and co-frequencies."""

    total_docs: int
    doc_freq: Mapping[str, int]
    pair_freq: Mapping[tuple[str, str], int]
    vocabulary: frozenset[str] | None = None

    def freq(self, w: str) -> int:
        return self.doc_freq.get(w, 0)

    def pair(self, w1: str, w2: str) -> int:
        if w1 == w2:
            return self.doc_freq.get(w1, 0)
        key = (w1, w2) if w1 < w2 else (w2, w1)
        return self.pair_freq.get(key, 0)


def _doc_token_lists(corpus) -> list[list[str]]:
    if isinstance(corpus, Corpus):
        return corpus.doc_tokens()
    return [list(doc) for doc in corpus]


def build_window_counts(corpus, window: int, vocabulary: Iterable[str] | None = None) -> WindowCounts:
    """Count word and unordered-pair occurrences per sliding window.

    The window advances one token at a time within each document; shorter
    tail windows still count. Restricting to a vocabulary keeps counting
    cheap when only topic words matter.
    """
    if window < 1:
        raise CoherenceError("window must be >= 1")
    docs = _doc_token_lists(corpus)
    if not docs:
        raise CoherenceError("empty corpus")
    vocab = frozenset(vocabulary) if vocabulary is not None else None

    unigrams: dict[str, int] = {}
    pairs: dict[tuple[str, str], int] = {}
    total = 0
    for tokens in docs:
        length = len(tokens)
        total += length
        if length == 0:
            continue
        kept = [t if (vocab is None or t in vocab) else None for t in tokens]
        # Multiset of counted words in the current window [p, p+window).
        in_window: dict[str, int] = {}
        for t in kept[: window]:
            if t is not None:
                in_window[t] = in_window.get(t, 0) + 1
        for p in range(length):
            present = sorted(in_window)
            for w in present:
                unigrams[w] = unigrams.get(w, 0) + 1
            for w1, w2 in combinations(present, 2):
                pairs[(w1, w2)] = pairs.get((w1, w2), 0) + 1
            leaving = kept[p]
            if leaving is not None:
                if in_window[leaving] == 1:
                    del in_window[leaving]
                else:
                    in_window[leaving] -= 1
            entering_at = p + window
            if entering_at < length and kept[entering_at] is not None:
                w = kept[entering_at]
                in_window[w] = in_window.get(w, 0) + 1
    return WindowCounts(
        window=window, total_windows=total, unigrams=unigrams, pairs=pairs, vocabulary=vocab
    )


def build_doc_counts(corpus, vocabulary: Iterable[str] | None = None) -> DocCounts:
    """Per-document word frequencies and unordered co-frequencies."""
    docs = _doc_token_lists(corpus)
    if not docs:
        raise CoherenceError("empty corpus")
    vocab = frozenset(vocabulary) if vocabulary is not None else None
    doc_freq: dict[str, int] = {}
    pair_freq: dict[tuple[str, str], int] = {}
    for tokens in docs:
        present = sorted({t for t in tokens if vocab is None or t in vocab})
        for w in present:
            doc_freq[w] = doc_freq.get(w, 0) + 1
        for w1, w2 in combinations(present, 2):
            pair_freq[(w1, w2)] = pair_freq.get((w1, w2), 0) + 1
    return DocCounts(
        total_docs=len(docs), doc_freq=doc_freq, pair_freq=pair_freq, vocabulary=vocab
    )


def pmi(w1: str, w2: str, counts: WindowCounts, eps: float = 1e-12) -> float:
    """log((P(w1,w2) + eps) / (P(w1) * P(w2))); 0 for absent words."""
    c1, c2 = counts.unigram(w1), counts.unigram(w2)
    if c1 == 0 or c2 == 0:
        warnings.warn(f"word pair ({w1!r}, {w2!r}) has a zero marginal; scoring 0")
        return 0.0
    t = counts.total_windows
    p1, p2 = c1 / t, c2 / t
    p12 = counts.pair(w1, w2) / t
    return math.log((p12 + eps) / (p1 * p2))


def npmi(w1: str, w2: str, counts: WindowCounts, eps: float = 1e-12) -> float:
    """PMI normalized by -log(P(w1,w2) + eps); clamped to [-1, 1]."""
    c1, c2 = counts.unigram(w1), counts.unigram(w2)
    if c1 == 0 or c2 == 0:
        warnings.warn(f"word pair ({w1!r}, {w2!r}) has a zero marginal; scoring 0")
        return 0.0
    t = counts.total_windows
    p12 = counts.pair(w1, w2) / t
    value = pmi(w1, w2, counts, eps) / (-math.log(p12 + eps))
    return min(1.0, max(-1.0, value))


def _topic_words(topic) -> list[str]:
    words = list(topic.words) if hasattr(topic, "words") else list(topic)
    if len(words) < 2:
        raise CoherenceError("need >= 2 topic words to score coherence")
    if len(set(words)) != len(words):
        raise CoherenceError("topic words must be unique")
    return words


def c_uci(topic, counts: WindowCounts, eps: float = 1e-12) -> float:
    """Mean PMI over all unordered pairs of the topic's top words."""
    words = _topic_words(topic)
    values = [pmi(w1, w2, counts, eps) for w1, w2 in combinations(words, 2)]
    return sum(values) / len(values)


def c_npmi(topic, counts: WindowCounts, eps: float = 1e-12) -> float:
    """Mean NPMI over all unordered pairs of the topic's top words."""
    words = _topic_words(topic)
    values = [npmi(w1, w2, counts, eps) for w1, w2 in combinations(words, 2)]
    return sum(values) / len(values)


def u_mass(topic, doc_counts: DocCounts) -> float:
    """Ordered document co-occurrence coherence.

    sum over i>j of log((D(w_i, w_j) + 1) / D(w_j)) with words in topic
    rank order, normalized by the pair count. Typically <= 0.
    """
    words = _topic_words(topic)
    total = 0.0
    pairs = 0
    for i in range(1, len(words)):
        for j in range(i):
            pairs += 1
            dj = doc_counts.freq(words[j])
            if dj == 0:
                warnings.warn(f"word {words[j]!r} absent from reference documents; scoring 0")
                continue
            dij = doc_counts.pair(words[i], words[j])
            total += math.log((dij + 1) / dj)
    return total / pairs


def c_v(topic, counts: WindowCounts, eps: float = 1e-12) -> float:
    """Indirect context-vector coherence.

    Each top word gets the vector of its NPMI against every top word; the
    score is the mean cosine between each vector and the set's sum vector.
    """
    words = _topic_words(topic)
    vectors = [[npmi(w, other, counts, eps) for other in words] for w in words]
    sum_vec = [sum(col) for col in zip(*vectors)]
    sum_norm = math.sqrt(sum(v * v for v in sum_vec))
    if sum_norm == 0.0:
        warnings.warn("all context vectors are zero; topic scored 0")
        return 0.0
    total = 0.0
    for vec in vectors:
        norm = math.sqrt(sum(v * v for v in vec))
        if norm == 0.0:
            continue
        dot = sum(a * b for a, b in zip(vec, sum_vec))
        total += dot / (norm * sum_norm)
    return total / len(words)


@dataclass(frozen=True)
class CoherenceReport:
    """Per-topic scores per metric plus the per-metric arithmetic mean."""

    per_topic: dict[str, tuple[tuple[str, float], ...]]
    averages: dict[str, float]
    metadata: dict[str, object] = field(default_factory=dict)


def _average(scores: Sequence[float]) -> float:
    return sum(scores) / len(scores)


def evaluate_topics(
    topics: Sequence,
    reference,
    metrics: Sequence[str] = METRICS,
    cfg: CoherenceConfig | None = None,
) -> CoherenceReport:
    """Score every topic with the requested metrics against a reference
    corpus (a Corpus or per-document token lists)."""
    cfg = cfg or CoherenceConfig()
    cfg.validate()
    for m in metrics:
        if m not in METRICS:
            raise CoherenceError(f"unknown metric: {m!r}")
    if not topics:
        raise CoherenceError("no topics to evaluate")

    word_lists = [_topic_words(t) for t in topics]
    labels = [str(getattr(t, "id", i)) for i, t in enumerate(topics)]
    vocabulary = sorted({w for words in word_lists for w in words})

    needed_windows = set()
    if "c_v" in metrics:
        needed_windows.add(cfg.cv_window)
    if "c_uci" in metrics or "c_npmi" in metrics:
        needed_windows.add(cfg.pmi_window)
    window_counts = {
        w: build_window_counts(reference, w, vocabulary) for w in sorted(needed_windows)
    }
    doc_counts = build_doc_counts(reference, vocabulary) if "u_mass" in metrics else None

    scorers: dict[str, Callable[[list[str]], float]] = {
        "c_v": lambda ws: c_v(ws, window_counts[cfg.cv_window], cfg.eps),
        "c_npmi": lambda ws: c_npmi(ws, window_counts[cfg.pmi_window], cfg.eps),
        "c_uci": lambda ws: c_uci(ws, window_counts[cfg.pmi_window], cfg.eps),
        "u_mass": lambda ws: u_mass(ws, doc_counts),
    }
    per_topic: dict[str, tuple[tuple[str, float], ...]] = {}
    averages: dict[str, float] = {}
    for metric in metrics:
        rows = tuple((labels[i], scorers[metric](ws)) for i, ws in enumerate(word_lists))
        per_topic[metric] = rows
        averages[metric] = _average([score for _, score in rows])
    return CoherenceReport(
        per_topic=per_topic,
        averages=averages,
        metadata={
            "topics": len(topics),
            "metrics": tuple(metrics),
            "cv_window": cfg.cv_window,
            "pmi_window": cfg.pmi_window,
            "eps": cfg.eps,
        },
    )


def run_protocol(
    runner: Callable[[int, int], Mapping[str, Sequence[float]]],
    topic_counts: Sequence[int] = (10, 20, 30, 40, 50),
    runs: int = 3,
    base_seed: int = 0,
) -> CoherenceReport:
    """Repeated-run evaluation protocol.

    ``runner(topic_count, seed)`` executes the full pipeline at the given
    topic count and returns per-topic scores per metric. Every combination
    of topic count and run seed (seeds are base_seed + run index) executes
    once; the report averages all collected per-topic scores per metric.
    """
    if not topic_counts or runs < 1:
        raise CoherenceError("protocol needs at least one topic count and one run")
    per_topic: dict[str, list[tuple[str, float]]] = {}
    executions = 0
    for count in topic_counts:
        for run in range(runs):
            seed = base_seed + run
            result = runner(count, seed)
            executions += 1
            for metric, scores in result.items():
                rows = per_topic.setdefault(metric, [])
                for i, score in enumerate(scores):
                    rows.append((f"topics{count}-run{run}-topic{i}", float(score)))
            logger.info("protocol run complete: topic_count=%d seed=%d", count, seed)
    averages = {
        metric: _average([score for _, score in rows]) for metric, rows in per_topic.items()
    }
    return CoherenceReport(
        per_topic={m: tuple(rows) for m, rows in per_topic.items()},
        averages=averages,
        metadata={
            "runs": runs,
            "topic_counts": tuple(topic_counts),
            "executions": executions,
            "base_seed": base_seed,
        },
    )
