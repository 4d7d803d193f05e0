"""Synthetic themed corpora with matching embedding stores.

Stands in where a real dataset plus a transformer encoder would sit:
every theme owns a direction in embedding space, word vectors sit near
their theme direction, and sentence vectors are the renormalized mean of
their word vectors plus a little noise. The result clusters, scores, and
co-occurs the way an encoded corpus does, while staying deterministic and
dependency-free.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embed import EmbeddingMatrix, write_embedding_file

# Topical vocabulary in the flavor of newsgroup discussions. Words must be
# lowercase, >= 3 chars, and stay clear of the default stopword list.
THEME_WORDS: dict[str, list[str]] = {
    "space": [
        "orbit", "satellite", "launch", "rocket", "nasa", "shuttle", "moon",
        "spacecraft", "astronaut", "mission", "telescope", "planet", "solar",
        "lunar", "gravity", "payload", "propulsion", "reentry", "capsule", "comet",
    ],
    "medicine": [
        "doctor", "patient", "disease", "treatment", "cancer", "symptoms",
        "diagnosis", "clinic", "medicine", "therapy", "vaccine", "infection",
        "surgery", "hospital", "physician", "dosage", "chronic", "immune",
        "prescription", "pathology",
    ],
    "encryption": [
        "encryption", "cipher", "keys", "decrypt", "security", "algorithm",
        "clipper", "privacy", "cryptography", "secure", "escrow", "wiretap",
        "plaintext", "ciphertext", "protocol", "backdoor", "hash", "signature",
        "authentication", "entropy",
    ],
    "graphics": [
        "jpeg", "gif", "image", "pixels", "compression", "format", "colors",
        "display", "conversion", "quality", "bitmap", "rendering", "palette",
        "resolution", "quantization", "viewer", "shareware", "decoder",
        "grayscale", "dithering",
    ],
    "religion": [
        "jesus", "christ", "god", "bible", "faith", "church", "scripture",
        "gospel", "heaven", "prayer", "atheism", "belief", "worship", "spirit",
        "doctrine", "prophet", "salvation", "sacred", "theology", "covenant",
    ],
    "hockey": [
        "hockey", "game", "team", "season", "playoff", "goal", "score",
        "player", "penalty", "goalie", "puck", "league", "coach", "defenseman",
        "rink", "skating", "roster", "overtime", "standings", "tournament",
    ],
    "autos": [
        "car", "engine", "wheels", "brakes", "tires", "gear", "motorcycle",
        "driving", "dealer", "mileage", "transmission", "exhaust", "clutch",
        "sedan", "horsepower", "ignition", "chassis", "suspension", "carburetor",
        "odometer",
    ],
    "politics": [
        "government", "law", "policy", "rights", "congress", "election",
        "amendment", "citizen", "legislation", "senate", "vote", "taxes",
        "regulation", "liberty", "constitution", "debate", "campaign", "reform",
        "lobbying", "statute",
    ],
}

FILLER_WORDS = [
    "people", "time", "way", "thing", "question", "point", "fact", "case",
    "example", "reason", "group", "post", "article", "reply", "thread",
    "discussion", "opinion", "idea", "issue", "note", "detail", "answer",
    "comment", "message", "topic", "list", "source", "reference", "story",
    "report", "review", "update", "summary", "claim", "argument", "context",
]


@dataclass
class SynthSpec:
    """Parameters for one synthetic corpus."""

    themes: dict[str, list[str]] = field(default_factory=lambda: dict(THEME_WORDS))
    n_docs: int = 500
    sentences_per_doc: tuple[int, int] = (1, 3)
    tokens_per_sentence: tuple[int, int] = (8, 14)
    theme_word_fraction: float = 0.7
    dim: int = 64
    word_noise: float = 0.5
    sentence_noise: float = 0.05
    # Optional anchors: per theme, words embedded exactly on the theme
    # direction (and injected into every sentence mix).
    anchors: dict[str, list[str]] = field(default_factory=dict)
    # Pairs of theme names forced to a given direction cosine.
    theme_overlap: dict[tuple[str, str], float] = field(default_factory=dict)
    seed: int = 7


@dataclass(frozen=True)
class SynthCorpus:
    """Generated documents plus the embedding store contents."""

    doc_texts: tuple[str, ...]
    doc_themes: tuple[str, ...]
    sentence_texts: tuple[str, ...]
    sentence_themes: tuple[str, ...]
    vectors: dict[str, np.ndarray]  # sentence text or word -> unit vector
    theme_directions: dict[str, np.ndarray]

    def jsonl(self) -> str:
        lines = [
            json.dumps({"id": f"doc-{i}", "text": text, "source": theme})
            for i, (text, theme) in enumerate(zip(self.doc_texts, self.doc_themes))
        ]
        return "\n".join(lines) + "\n"


def _theme_directions(spec: SynthSpec, rng) -> dict[str, np.ndarray]:
    names = list(spec.themes)
    basis, _ = np.linalg.qr(rng.standard_normal((spec.dim, len(names))))
    directions = {name: basis[:, i].copy() for i, name in enumerate(names)}
    for (a, b), target_cos in spec.theme_overlap.items():
        mixed = target_cos * directions[a] + np.sqrt(1.0 - target_cos**2) * directions[b]
        directions[b] = mixed / np.linalg.norm(mixed)
    return directions


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def generate(spec: SynthSpec) -> SynthCorpus:
    """Build a deterministic synthetic corpus from the spec."""
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    directions = _theme_directions(spec, rng)

    vectors: dict[str, np.ndarray] = {}
    for theme, words in spec.themes.items():
        direction = directions[theme]
        for word in words:
            noise = _unit(rng.standard_normal(spec.dim)) * spec.word_noise
            vectors[word] = _unit(direction + noise)
        for word in spec.anchors.get(theme, []):
            vectors[word] = direction.copy()
    for word in FILLER_WORDS:
        vectors.setdefault(word, _unit(rng.standard_normal(spec.dim)))

    theme_names = list(spec.themes)
    doc_texts: list[str] = []
    doc_themes: list[str] = []
    sentence_texts: list[str] = []
    sentence_themes: list[str] = []
    lo_s, hi_s = spec.sentences_per_doc
    lo_t, hi_t = spec.tokens_per_sentence
    for i in range(spec.n_docs):
        theme = theme_names[i % len(theme_names)]
        pool = spec.themes[theme]
        anchors = spec.anchors.get(theme, [])
        doc_sentences = []
        for _ in range(int(rng.integers(lo_s, hi_s + 1))):
            n_tokens = int(rng.integers(lo_t, hi_t + 1))
            n_theme = max(1, round(n_tokens * spec.theme_word_fraction))
            words = list(anchors)
            words += [pool[int(rng.integers(len(pool)))] for _ in range(max(0, n_theme - len(words)))]
            while len(words) < n_tokens:
                words.append(FILLER_WORDS[int(rng.integers(len(FILLER_WORDS)))])
            order = rng.permutation(len(words))
            words = [words[j] for j in order]
            text = " ".join(words)
            text = text[0].upper() + text[1:] + "."
            if text not in vectors:
                mean = np.mean([vectors[w] for w in words], axis=0)
                noise = _unit(rng.standard_normal(spec.dim)) * spec.sentence_noise
                vectors[text] = _unit(mean + noise)
            doc_sentences.append(text)
            sentence_texts.append(text)
            sentence_themes.append(theme)
        doc_texts.append(" ".join(doc_sentences))
        doc_themes.append(theme)

    return SynthCorpus(
        doc_texts=tuple(doc_texts),
        doc_themes=tuple(doc_themes),
        sentence_texts=tuple(sentence_texts),
        sentence_themes=tuple(sentence_themes),
        vectors=vectors,
        theme_directions=directions,
    )


def write_fixture(directory: str | Path, spec: SynthSpec) -> dict[str, Path]:
    """Materialize a corpus + embedding store + ground truth on disk."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    data = generate(spec)

    corpus_path = out / "corpus.jsonl"
    corpus_path.write_text(data.jsonl(), encoding="utf-8")

    keys = sorted(data.vectors)
    values = np.stack([data.vectors[k] for k in keys]).astype(np.float32)
    store_base = out / "embeddings"
    write_embedding_file(
        EmbeddingMatrix(values=values, keys=tuple(keys), normalized=True), store_base
    )

    truth_path = out / "truth.tsv"
    with truth_path.open("w", encoding="utf-8") as fh:
        fh.write("doc_id\ttheme\n")
        for i, theme in enumerate(data.doc_themes):
            fh.write(f"doc-{i}\t{theme}\n")

    return {"corpus": corpus_path, "store": store_base, "truth": truth_path}
