"""Document ingestion, sentence segmentation, and tokenization.

Documents arrive as plain-text lines or JSONL records. Segmentation and
tokenization are deterministic rule systems so that identical input bytes
always produce identical downstream clusters.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable


class CorpusError(ValueError):
    """Unreadable, malformed, or empty corpus input."""


DEFAULT_ABBREVIATIONS = frozenset({"mr", "mrs", "dr", "st", "vs", "etc", "e.g", "i.e"})

# 150 high-frequency English function words. Override with load_stopwords().
DEFAULT_STOPWORDS = frozenset("""
a about above after again against all also although always am among an and
any anything are around as at away back be because been before being below
between both but by can cannot could did do does doing down during each even
ever every few for from further get got had has have having he her here hers
herself him himself his how however i if in into is it its itself just may
me might more most much must my myself never no nor not now of off often on
once only onto or other our ours ourselves out over own per same she should
so some such than that the their theirs them themselves then there these
they this those through to too under until up upon very was we were what
when where which while who whom why will with would you your yours yourself
yourselves
""".split())

_TOKEN_RE = re.compile(r"[^\W_]+(?:'[^\W_]+)*")
_SENTENCE_TERMINATORS = ".!?"


@dataclass(frozen=True)
class Document:
    """One input record: a unit of text with a corpus-unique id."""

    id: str
    text: str
    source: str | None = None


@dataclass(frozen=True)
class Sentence:
    doc_id: str
    index: int
    text: str
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    sentences: tuple[Sentence, ...]

    def doc_tokens(self) -> list[list[str]]:
        """Token stream per document, sentences concatenated in order."""
        by_doc: dict[str, list[str]] = {d.id: [] for d in self.documents}
        for s in self.sentences:
            by_doc[s.doc_id].extend(s.tokens)
        return [by_doc[d.id] for d in self.documents]


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a stopword file: one token per line, ``#`` comments ignored."""
    words = set()
    try:
        content = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"unreadable stopword file {path}: {exc}") from exc
    for line in content.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        words.add(line.lower())
    return frozenset(words)


def tokenize(sentence_text: str, stopwords: frozenset[str] | set[str] = DEFAULT_STOPWORDS) -> list[str]:
    """Lowercase and split on non-alphanumeric runs.

    Apostrophes are kept word-internal ("it's" stays one token). Tokens
    shorter than 2 characters, purely numeric tokens, and stopwords are
    dropped.
    """
    tokens = []
    for match in _TOKEN_RE.finditer(sentence_text.lower()):
        tok = match.group()
        if len(tok) < 2:
            continue
        if tok.replace("'", "").isdigit():
            continue
        if tok in stopwords:
            continue
        tokens.append(tok)
    return tokens


def _preceding_word(line: str, i: int) -> str:
    # Word immediately before position i; dots included so "e.g" survives.
    j = i
    while j > 0 and (line[j - 1].isalpha() or line[j - 1] == "."):
        j -= 1
    return line[j:i].lstrip(".")


def _is_boundary(line: str, i: int, abbreviations: frozenset[str]) -> bool:
    j = i + 1
    if j >= len(line):
        return True
    if not line[j].isspace():
        return False
    while j < len(line) and line[j].isspace():
        j += 1
    if j >= len(line):
        return True
    if not line[j].isupper():
        return False
    if line[i] == "." and _preceding_word(line, i).lower() in abbreviations:
        return False
    return True


def split_text(text: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS) -> list[str]:
    """Split text into sentence strings.

    A terminator (``.``, ``!``, ``?``) ends a sentence when followed by
    whitespace plus an uppercase letter, or at end of text. A hard newline
    always ends a sentence. The abbreviation list suppresses ``.``
    boundaries ("Dr. Smith" stays together). Segments are trimmed and
    empties dropped; worst case the whole text is one sentence.
    """
    segments = []
    for line in text.split("\n"):
        start = 0
        for i, ch in enumerate(line):
            if ch in _SENTENCE_TERMINATORS and _is_boundary(line, i, abbreviations):
                segments.append(line[start : i + 1])
                start = i + 1
        if start < len(line):
            segments.append(line[start:])
    return [s for s in (seg.strip() for seg in segments) if s]


def split_sentences(
    doc: Document,
    stopwords: frozenset[str] | set[str] = DEFAULT_STOPWORDS,
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS,
) -> list[Sentence]:
    """Segment one document into Sentence records with token lists."""
    if not doc.text.strip():
        raise CorpusError(f"document {doc.id!r} has empty text")
    return [
        Sentence(doc_id=doc.id, index=idx, text=seg, tokens=tuple(tokenize(seg, stopwords)))
        for idx, seg in enumerate(split_text(doc.text, abbreviations))
    ]


def _parse_lines(raw: str) -> list[Document]:
    documents = []
    for line in raw.splitlines():
        text = line.strip()
        if not text:
            continue
        documents.append(Document(id=f"doc-{len(documents)}", text=text))
    return documents


def _parse_jsonl(raw: str) -> list[Document]:
    documents = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {lineno}: malformed JSON record: {exc}") from exc
        if not isinstance(record, dict) or "text" not in record:
            raise CorpusError(f"line {lineno}: record must be an object with a 'text' field")
        text = str(record["text"]).strip()
        if not text:
            raise CorpusError(f"line {lineno}: empty document text")
        raw_id = record.get("id")
        doc_id = str(raw_id) if raw_id is not None else f"doc-{len(documents)}"
        source = record.get("source")
        documents.append(Document(id=doc_id, text=text, source=None if source is None else str(source)))
    return documents


def load_corpus(
    path: str | Path,
    format: str = "lines",
    stopwords: frozenset[str] | set[str] = DEFAULT_STOPWORDS,
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS,
) -> Corpus:
    """Load a corpus file: one document per line (``lines``) or JSONL.

    JSONL records need a ``text`` field; ``id`` and ``source`` are optional.
    Documents without an explicit id get stable ids ``doc-<n>``.
    """
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"unreadable corpus path {path}: {exc}") from exc

    if format == "lines":
        documents = _parse_lines(raw)
    elif format == "jsonl":
        documents = _parse_jsonl(raw)
    else:
        raise CorpusError(f"unknown corpus format: {format!r}")

    if not documents:
        raise CorpusError("empty corpus")

    seen: set[str] = set()
    for doc in documents:
        if not doc.id:
            raise CorpusError("empty document id")
        if doc.id in seen:
            raise CorpusError(f"duplicate document id: {doc.id}")
        seen.add(doc.id)

    sentences: list[Sentence] = []
    for doc in documents:
        sentences.extend(split_sentences(doc, stopwords, abbreviations))
    return Corpus(documents=tuple(documents), sentences=tuple(sentences))
