import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from semtopic.embed import (
    EmbeddingError,
    EmbeddingMatrix,
    EmbeddingProvider,
    TransportError,
    cosine,
    embed_texts,
    read_embedding_file,
    write_embedding_file,
)


def finite_vectors(dim, min_size=1, max_size=8):
    return st.lists(
        arrays(np.float64, dim, elements=st.floats(-10, 10, allow_nan=False)),
        min_size=min_size,
        max_size=max_size,
    )


class TestCosine:
    def test_identity(self):
        assert cosine([1.0, 0.0], [1.0, 0.0]) == 1.0

    def test_orthogonal(self):
        assert cosine([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_forty_five_degrees(self):
        assert cosine([1.0, 1.0], [1.0, 0.0]) == pytest.approx(math.sqrt(2) / 2, abs=1e-8)

    def test_zero_vector_rejected(self):
        with pytest.raises(EmbeddingError, match="undefined cosine"):
            cosine([0.0, 0.0], [1.0, 0.0])

    def test_dimension_mismatch(self):
        with pytest.raises(EmbeddingError, match="dimension"):
            cosine([1.0, 0.0], [1.0, 0.0, 0.0])

    @given(
        arrays(np.float64, 4, elements=st.floats(-5, 5, allow_nan=False)),
        arrays(np.float64, 4, elements=st.floats(-5, 5, allow_nan=False)),
        st.floats(0.01, 100.0),
    )
    def test_symmetric_and_scale_invariant(self, u, v, c):
        if np.linalg.norm(u) == 0 or np.linalg.norm(v) == 0:
            return
        assert cosine(u, v) == pytest.approx(cosine(v, u), abs=1e-12)
        assert cosine(c * u, v) == pytest.approx(cosine(u, v), abs=1e-6)
        assert -1.0 <= cosine(u, v) <= 1.0


class TestFileStore:
    def _store(self, tmp_path, mapping):
        keys = tuple(mapping)
        values = np.array([mapping[k] for k in keys], dtype=np.float32)
        base = tmp_path / "store"
        write_embedding_file(EmbeddingMatrix(values=values, keys=keys, normalized=False), base)
        return EmbeddingProvider(kind="file", location=str(base))

    def test_three_four_five_normalization(self, tmp_path):
        provider = self._store(tmp_path, {"a": [3.0, 4.0]})
        matrix = embed_texts(provider, ["a"], "word")
        assert matrix.normalized
        np.testing.assert_allclose(matrix.values, [[0.6, 0.8]], atol=1e-7)

    def test_missing_key_named(self, tmp_path):
        provider = self._store(tmp_path, {"a": [3.0, 4.0]})
        with pytest.raises(EmbeddingError, match="missing embedding: b"):
            embed_texts(provider, ["a", "b"], "word")

    def test_duplicated_text_identical_rows(self, tmp_path):
        provider = self._store(tmp_path, {"a": [1.0, 2.0], "b": [2.0, 1.0]})
        matrix = embed_texts(provider, ["a", "b", "a"], "sentence")
        np.testing.assert_array_equal(matrix.values[0], matrix.values[2])

    def test_empty_texts_rejected(self, tmp_path):
        provider = self._store(tmp_path, {"a": [1.0, 0.0]})
        with pytest.raises(EmbeddingError, match="no texts"):
            embed_texts(provider, [], "word")


class TestEmbeddingFile:
    @given(
        st.integers(1, 5),
        st.integers(1, 6),
        st.randoms(use_true_random=False),
    )
    def test_round_trip_bitwise(self, n, d, rnd):
        import tempfile

        values = np.array(
            [[rnd.uniform(-100, 100) for _ in range(d)] for _ in range(n)], dtype=np.float32
        )
        keys = tuple(f"key-{i}" for i in range(n))
        matrix = EmbeddingMatrix(values=values, keys=keys, normalized=False)
        with tempfile.TemporaryDirectory() as tmp:
            write_embedding_file(matrix, tmp + "/m")
            loaded = read_embedding_file(tmp + "/m")
        assert loaded.values.tobytes() == matrix.values.tobytes()
        assert loaded.keys == keys
        assert loaded.normalized == matrix.normalized

    def test_normalized_flag_round_trip(self, tmp_path):
        matrix = EmbeddingMatrix(
            values=np.array([[1.0, 0.0]], dtype=np.float32), keys=("k",), normalized=True
        )
        write_embedding_file(matrix, tmp_path / "m")
        assert read_embedding_file(tmp_path / "m").normalized is True

    def test_bad_magic(self, tmp_path):
        write_embedding_file(
            EmbeddingMatrix(values=np.ones((1, 2), dtype=np.float32), keys=("k",), normalized=False),
            tmp_path / "m",
        )
        raw = (tmp_path / "m.vecs").read_bytes()
        (tmp_path / "m.vecs").write_bytes(b"XXXXX" + raw[5:])
        with pytest.raises(EmbeddingError, match="bad magic"):
            read_embedding_file(tmp_path / "m")

    def test_truncated_block(self, tmp_path):
        write_embedding_file(
            EmbeddingMatrix(values=np.ones((2, 3), dtype=np.float32), keys=("a", "b"), normalized=False),
            tmp_path / "m",
        )
        raw = (tmp_path / "m.vecs").read_bytes()
        (tmp_path / "m.vecs").write_bytes(raw[:-4])
        with pytest.raises(EmbeddingError, match="truncated"):
            read_embedding_file(tmp_path / "m")

    def test_key_count_mismatch(self, tmp_path):
        write_embedding_file(
            EmbeddingMatrix(values=np.ones((2, 3), dtype=np.float32), keys=("a", "b"), normalized=False),
            tmp_path / "m",
        )
        (tmp_path / "m.keys").write_text("a\n", encoding="utf-8")
        with pytest.raises(EmbeddingError, match="key count mismatch"):
            read_embedding_file(tmp_path / "m")

    def test_duplicate_store_keys_rejected_on_write(self, tmp_path):
        matrix = EmbeddingMatrix(
            values=np.ones((2, 2), dtype=np.float32), keys=("a", "a"), normalized=False
        )
        with pytest.raises(EmbeddingError, match="duplicate"):
            write_embedding_file(matrix, tmp_path / "m")


class _MockEmbedServer:
    """Tiny /embed endpoint that logs request bodies and can fail."""

    def __init__(self, dim=4, fail_first=0):
        self.dim = dim
        self.requests: list[dict] = []
        self.fail_remaining = fail_first
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers["Content-Length"])
                body = json.loads(self.rfile.read(length))
                if self.path != "/embed":
                    self.send_response(404)
                    self.end_headers()
                    return
                if outer.fail_remaining > 0:
                    outer.fail_remaining -= 1
                    self.send_response(500)
                    self.end_headers()
                    return
                outer.requests.append(body)
                vectors = []
                for text in body["texts"]:
                    seeded = (hash(text) % 97) + 1.0
                    vectors.append([seeded + i for i in range(outer.dim)])
                payload = json.dumps(
                    {"vectors": vectors, "dim": outer.dim, "model": "mock"}
                ).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()

    @property
    def url(self):
        host, port = self.server.server_address
        return f"http://{host}:{port}"


class TestHttpProvider:
    def test_batching_and_order(self):
        texts = [f"text number {i}" for i in range(130)]
        with _MockEmbedServer() as server:
            provider = EmbeddingProvider(kind="http", location=server.url)
            matrix = embed_texts(provider, texts, "sentence", batch_size=64, max_in_flight=1)
            sizes = [len(r["texts"]) for r in server.requests]
            assert sizes == [64, 64, 2]
            assert all(r["kind"] == "sentence" for r in server.requests)
        # Row i corresponds to texts[i]: recompute the expected direction.
        for i in (0, 64, 129):
            seeded = (hash(texts[i]) % 97) + 1.0
            expected = np.array([seeded + j for j in range(4)])
            expected = expected / np.linalg.norm(expected)
            np.testing.assert_allclose(matrix.values[i], expected, atol=1e-6)

    def test_concurrent_fetch_restores_order(self):
        texts = [f"item {i}" for i in range(130)]
        with _MockEmbedServer() as server:
            provider = EmbeddingProvider(kind="http", location=server.url)
            serial = embed_texts(provider, texts, "word", batch_size=32, max_in_flight=1)
            concurrent = embed_texts(provider, texts, "word", batch_size=32, max_in_flight=4)
        np.testing.assert_array_equal(serial.values, concurrent.values)

    def test_retry_then_succeed(self):
        with _MockEmbedServer(fail_first=2) as server:
            provider = EmbeddingProvider(kind="http", location=server.url)
            matrix = embed_texts(
                provider, ["alpha"], "word", retries=3, backoff=0.01, max_in_flight=1
            )
            assert matrix.n == 1

    def test_retries_exhausted(self):
        with _MockEmbedServer(fail_first=100) as server:
            provider = EmbeddingProvider(kind="http", location=server.url)
            with pytest.raises(TransportError, match="after 2 retries"):
                embed_texts(provider, ["alpha"], "word", retries=2, backoff=0.01, max_in_flight=1)

    def test_unreachable_host(self):
        provider = EmbeddingProvider(kind="http", location="http://127.0.0.1:9")
        with pytest.raises(TransportError):
            embed_texts(provider, ["alpha"], "word", retries=0, backoff=0.01, timeout=0.5)


def test_normalized_rows_dot_equals_cosine(tmp_path):
    rng = np.random.default_rng(5)
    values = rng.normal(size=(6, 8)).astype(np.float32)
    keys = tuple(f"t{i}" for i in range(6))
    base = tmp_path / "s"
    write_embedding_file(EmbeddingMatrix(values=values, keys=keys, normalized=False), base)
    provider = EmbeddingProvider(kind="file", location=str(base))
    matrix = embed_texts(provider, list(keys), "sentence")
    for i in range(matrix.n):
        for j in range(matrix.n):
            dot = float(matrix.values[i].astype(np.float64) @ matrix.values[j].astype(np.float64))
            assert abs(dot - cosine(values[i], values[j])) < 1e-6
