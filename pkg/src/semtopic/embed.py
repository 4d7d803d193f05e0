"""Embedding acquisition and vector arithmetic.

Vectors come from an external provider: a precomputed on-disk store or an
HTTP encoding service. The engine never runs a language model itself; it
consumes whatever the provider returns, L2-normalizes every row at
ingestion, and works in float32 with float64 accumulations.

On-disk store format (bit-exact round trip):
  <base>.vecs  magic ``SEMB1`` (5 bytes), u32-LE row count n, u32-LE
               dimension d, u8 normalized flag, then n*d little-endian
               float32 values row-major.
  <base>.keys  UTF-8, exactly n lines, line i is the text of row i, each
               line newline-terminated.

HTTP wire protocol: POST <location>/embed with body
``{"texts": [...], "kind": "sentence"|"word"}``; the response is
``{"vectors": [[...], ...], "dim": int, "model": str}``. Any non-200
status is a transport error; the vector count must equal the text count.
"""

from __future__ import annotations

import math
import os
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import requests

MAGIC = b"SEMB1"
_HEADER = struct.Struct("<IIB")


class EmbeddingError(ValueError):
    """Provider lookup, format, or dimension failure."""


class TransportError(EmbeddingError):
    """HTTP provider unreachable after exhausting retries."""


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Dense row-major float32 block with one key string per row.

    ``normalized`` is True iff every row is L2-normalized (within 1e-4).
    Keys of stored matrices are unique; matrices built by embed_texts keep
    the caller's text order and may repeat a key when the input repeats.
    """

    values: np.ndarray
    keys: tuple[str, ...]
    normalized: bool

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if values.ndim != 2:
            raise EmbeddingError("embedding values must be a 2-D block")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "keys", tuple(self.keys))
        if len(self.keys) != values.shape[0]:
            raise EmbeddingError(
                f"key count {len(self.keys)} does not match row count {values.shape[0]}"
            )

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.values[i]

    def subset(self, rows: Sequence[int]) -> "EmbeddingMatrix":
        idx = list(rows)
        return EmbeddingMatrix(
            values=self.values[idx],
            keys=tuple(self.keys[i] for i in idx),
            normalized=self.normalized,
        )


@dataclass(frozen=True)
class EmbeddingProvider:
    """Where vectors come from: an on-disk store or an HTTP service.

    ``location`` is the store base path (file kind) or the service base URL
    (http kind; requests go to ``<location>/embed``). One provider must
    return a constant dimension.
    """

    kind: str
    location: str
    model_name: str = ""

    def __post_init__(self):
        if self.kind not in ("file", "http"):
            raise EmbeddingError(f"unknown provider kind: {self.kind!r}")


def cosine(u, v) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding."""
    a = np.asarray(u, dtype=np.float64).ravel()
    b = np.asarray(v, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise EmbeddingError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = math.sqrt(float(a @ a))
    nb = math.sqrt(float(b @ b))
    if na == 0.0 or nb == 0.0:
        raise EmbeddingError("undefined cosine: zero vector")
    return min(1.0, max(-1.0, float(a @ b) / (na * nb)))


def normalize_rows(values: np.ndarray, texts: Sequence[str] | None = None) -> np.ndarray:
    """L2-normalize rows in float64, return float32. Zero rows are errors."""
    block = np.asarray(values, dtype=np.float64)
    norms = np.sqrt((block * block).sum(axis=1))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        which = texts[zero[0]] if texts is not None else f"row {zero[0]}"
        raise EmbeddingError(f"zero vector cannot be normalized: {which}")
    return (block / norms[:, None]).astype(np.float32)


def write_embedding_file(matrix: EmbeddingMatrix, base_path: str | Path) -> None:
    """Persist a matrix as ``<base>.vecs`` + ``<base>.keys``."""
    if len(set(matrix.keys)) != matrix.n:
        raise EmbeddingError("cannot store matrix with duplicate keys")
    for key in matrix.keys:
        if "\n" in key or "\r" in key:
            raise EmbeddingError(f"key contains a newline: {key!r}")
    base = str(base_path)
    header = MAGIC + _HEADER.pack(matrix.n, matrix.d, 1 if matrix.normalized else 0)
    block = np.ascontiguousarray(matrix.values, dtype="<f4").tobytes()
    Path(base + ".vecs").write_bytes(header + block)
    keys_text = "".join(key + "\n" for key in matrix.keys)
    Path(base + ".keys").write_bytes(keys_text.encode("utf-8"))


def read_embedding_file(base_path: str | Path) -> EmbeddingMatrix:
    """Load a matrix written by write_embedding_file, bit-exactly."""
    vecs_path = Path(str(base_path) + ".vecs")
    keys_path = Path(str(base_path) + ".keys")
    try:
        raw = vecs_path.read_bytes()
        keys_raw = keys_path.read_bytes()
    except OSError as exc:
        raise EmbeddingError(f"unreadable embedding store {base_path}: {exc}") from exc

    if raw[: len(MAGIC)] != MAGIC:
        raise EmbeddingError(f"bad magic in {vecs_path}")
    header_end = len(MAGIC) + _HEADER.size
    if len(raw) < header_end:
        raise EmbeddingError(f"truncated header in {vecs_path}")
    n, d, flag = _HEADER.unpack(raw[len(MAGIC) : header_end])
    expected = n * d * 4
    block = raw[header_end:]
    if len(block) != expected:
        raise EmbeddingError(
            f"truncated block in {vecs_path}: expected {expected} value bytes, found {len(block)}"
        )
    values = np.frombuffer(block, dtype="<f4").reshape(n, d).astype(np.float32)

    text = keys_raw.decode("utf-8")
    if n == 0:
        keys: list[str] = [] if not text else None
    else:
        if not text.endswith("\n"):
            raise EmbeddingError(f"key count mismatch in {keys_path}: missing final newline")
        keys = text[:-1].split("\n")
    if keys is None or len(keys) != n:
        found = 0 if keys is None else len(keys)
        raise EmbeddingError(f"key count mismatch in {keys_path}: header says {n}, found {found}")
    if len(set(keys)) != n:
        raise EmbeddingError(f"duplicate keys in {keys_path}")
    return EmbeddingMatrix(values=values, keys=tuple(keys), normalized=bool(flag))


_FILE_STORE_CACHE: dict[str, tuple[tuple[int, int], EmbeddingMatrix, dict[str, int]]] = {}


def _load_file_store(location: str) -> tuple[EmbeddingMatrix, dict[str, int]]:
    base = str(Path(location))
    vecs = Path(base + ".vecs")
    try:
        stat = vecs.stat()
        stamp = (stat.st_mtime_ns, stat.st_size)
    except OSError as exc:
        raise EmbeddingError(f"unreadable embedding store {location}: {exc}") from exc
    cached = _FILE_STORE_CACHE.get(base)
    if cached is not None and cached[0] == stamp:
        return cached[1], cached[2]
    matrix = read_embedding_file(base)
    index = {key: i for i, key in enumerate(matrix.keys)}
    _FILE_STORE_CACHE[base] = (stamp, matrix, index)
    return matrix, index


def _embed_from_file(provider: EmbeddingProvider, texts: Sequence[str]) -> np.ndarray:
    matrix, index = _load_file_store(provider.location)
    rows = np.empty((len(texts), matrix.d), dtype=np.float32)
    for i, text in enumerate(texts):
        j = index.get(text)
        if j is None:
            raise EmbeddingError(f"missing embedding: {text}")
        rows[i] = matrix.values[j]
    return rows


def _post_batch(
    url: str,
    batch: Sequence[str],
    kind: str,
    retries: int,
    backoff: float,
    timeout: float,
) -> list[list[float]]:
    payload = {"texts": list(batch), "kind": kind}
    last_error = None
    for attempt in range(retries + 1):
        if attempt:
            time.sleep(backoff * (2 ** (attempt - 1)))
        try:
            response = requests.post(url, json=payload, timeout=timeout)
        except requests.RequestException as exc:
            last_error = f"{type(exc).__name__}: {exc}"
            continue
        if response.status_code != 200:
            last_error = f"HTTP {response.status_code}"
            continue
        try:
            body = response.json()
        except ValueError as exc:
            last_error = f"invalid JSON response: {exc}"
            continue
        vectors = body.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(batch):
            raise EmbeddingError(
                f"provider returned {0 if not isinstance(vectors, list) else len(vectors)} "
                f"vectors for {len(batch)} texts"
            )
        return vectors
    raise TransportError(f"embedding request to {url} failed after {retries} retries: {last_error}")


def _embed_from_http(
    provider: EmbeddingProvider,
    texts: Sequence[str],
    kind: str,
    batch_size: int,
    retries: int,
    backoff: float,
    max_in_flight: int,
    timeout: float,
) -> np.ndarray:
    url = provider.location.rstrip("/") + "/embed"
    # Deduplicate so repeated texts are fetched once and come back identical.
    unique: list[str] = []
    position: dict[str, int] = {}
    for text in texts:
        if text not in position:
            position[text] = len(unique)
            unique.append(text)
    batches = [unique[i : i + batch_size] for i in range(0, len(unique), batch_size)]

    def fetch(batch):
        return _post_batch(url, batch, kind, retries, backoff, timeout)

    if max_in_flight > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            results = list(pool.map(fetch, batches))
    else:
        results = [fetch(b) for b in batches]

    dim = None
    unique_rows: list[list[float]] = []
    for vectors in results:
        for vec in vectors:
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise EmbeddingError(f"dimension mismatch: got {len(vec)}, expected {dim}")
            unique_rows.append(vec)
    block = np.asarray(unique_rows, dtype=np.float64)
    return block[[position[t] for t in texts]]


def embed_texts(
    provider: EmbeddingProvider,
    texts: Sequence[str],
    kind: str,
    batch_size: int = 64,
    retries: int = 3,
    backoff: float = 0.1,
    max_in_flight: int = 4,
    timeout: float = 30.0,
) -> EmbeddingMatrix:
    """Fetch vectors for texts, in order, L2-normalized.

    ``kind`` is "sentence" or "word"; the file provider looks texts up by
    exact match, the http provider batches requests (order restored by
    batch index) and retries transport failures with exponential backoff.
    """
    if not texts:
        raise EmbeddingError("no texts to embed")
    if kind not in ("sentence", "word"):
        raise EmbeddingError(f"unknown embedding kind: {kind!r}")
    if provider.kind == "file":
        rows = _embed_from_file(provider, texts)
    else:
        rows = _embed_from_http(
            provider, texts, kind, batch_size, retries, backoff, max_in_flight, timeout
        )
    return EmbeddingMatrix(
        values=normalize_rows(rows, texts),
        keys=tuple(texts),
        normalized=True,
    )
