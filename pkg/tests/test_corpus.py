import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from semtopic.corpus import (
    Corpus,
    CorpusError,
    DEFAULT_STOPWORDS,
    Document,
    load_corpus,
    load_stopwords,
    split_sentences,
    split_text,
    tokenize,
)


def test_default_stopword_list_size():
    assert len(DEFAULT_STOPWORDS) == 150


class TestSplitText:
    def test_two_terminal_periods(self):
        assert split_text("A. B.") == ["A.", "B."]

    def test_abbreviation_suppresses_boundary(self):
        assert split_text("Dr. Smith spoke.") == ["Dr. Smith spoke."]

    def test_end_of_text_boundary(self):
        assert split_text("no terminator") == ["no terminator"]

    def test_hard_newline_always_splits(self):
        assert split_text("first part\nsecond part") == ["first part", "second part"]

    def test_lowercase_continuation_not_a_boundary(self):
        assert split_text("approx. value is fine.") == ["approx. value is fine."]

    def test_question_and_exclamation(self):
        assert split_text("Really? Yes! Fine.") == ["Really?", "Yes!", "Fine."]

    def test_dotted_abbreviations(self):
        assert split_text("Use e.g. Apples here.") == ["Use e.g. Apples here."]

    def test_empty_segments_dropped(self):
        assert split_text("One.\n\n  \nTwo.") == ["One.", "Two."]


class TestSplitSentences:
    def test_indexing_and_tokens(self):
        doc = Document(id="d", text="Alpha beta. Gamma delta.")
        sentences = split_sentences(doc, stopwords=frozenset())
        assert [s.index for s in sentences] == [0, 1]
        assert [s.doc_id for s in sentences] == ["d", "d"]
        assert sentences[0].tokens == ("alpha", "beta")

    def test_empty_document_rejected(self):
        with pytest.raises(CorpusError):
            split_sentences(Document(id="d", text="   "))

    @given(st.text(min_size=1, max_size=200))
    def test_concatenation_preserves_non_whitespace(self, text):
        doc_text = text.strip()
        if not doc_text:
            return
        parts = split_text(doc_text)
        rebuilt = "".join("".join(p.split()) for p in parts)
        assert rebuilt == "".join(doc_text.split())


class TestTokenize:
    def test_stopword_and_punctuation(self):
        assert tokenize("JPEG and GIF!", {"and"}) == ["jpeg", "gif"]

    def test_numeric_dropped_apostrophe_kept(self):
        assert tokenize("it's 2021", set()) == ["it's"]

    def test_empty_input(self):
        assert tokenize("", set()) == []

    def test_short_tokens_dropped(self):
        assert tokenize("a I ok xyz", set()) == ["ok", "xyz"]

    @given(st.text(max_size=120))
    def test_idempotent_on_own_output(self, text):
        once = tokenize(text)
        again = tokenize(" ".join(once))
        assert once == again

    @given(st.text(max_size=120))
    def test_never_returns_stopwords_or_numbers(self, text):
        for tok in tokenize(text):
            assert tok == tok.lower()
            assert len(tok) >= 2
            assert tok not in DEFAULT_STOPWORDS
            assert not tok.replace("'", "").isdigit()


class TestLoadCorpus:
    def test_single_line(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("Hello world.\n", encoding="utf-8")
        corpus = load_corpus(path, "lines")
        assert len(corpus.documents) == 1
        assert len(corpus.sentences) == 1
        assert corpus.documents[0].id == "doc-0"

    def test_jsonl_two_sentences(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps({"id": "a", "text": "X. Y."}) + "\n", encoding="utf-8")
        corpus = load_corpus(path, "jsonl")
        assert len(corpus.documents) == 1
        assert [s.text for s in corpus.sentences] == ["X.", "Y."]

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("", encoding="utf-8")
        with pytest.raises(CorpusError, match="empty corpus"):
            load_corpus(path, "lines")

    def test_malformed_jsonl_reports_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"text": "ok"}\nnot json\n', encoding="utf-8")
        with pytest.raises(CorpusError, match="line 2"):
            load_corpus(path, "jsonl")

    def test_missing_text_field_reports_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": "a"}\n', encoding="utf-8")
        with pytest.raises(CorpusError, match="line 1"):
            load_corpus(path, "jsonl")

    def test_duplicate_ids_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        rows = [{"id": "a", "text": "One."}, {"id": "a", "text": "Two."}]
        path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        with pytest.raises(CorpusError, match="duplicate"):
            load_corpus(path, "jsonl")

    def test_unreadable_path(self, tmp_path):
        with pytest.raises(CorpusError, match="unreadable"):
            load_corpus(tmp_path / "missing.txt", "lines")

    def test_unknown_format(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("x\n", encoding="utf-8")
        with pytest.raises(CorpusError, match="format"):
            load_corpus(path, "csv")

    def test_deterministic(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("First doc. More text.\nSecond doc!\n", encoding="utf-8")
        assert load_corpus(path, "lines") == load_corpus(path, "lines")

    def test_sentence_order_follows_documents(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("Alpha one. Alpha two.\nBeta one.\n", encoding="utf-8")
        corpus = load_corpus(path, "lines")
        assert [(s.doc_id, s.index) for s in corpus.sentences] == [
            ("doc-0", 0), ("doc-0", 1), ("doc-1", 0),
        ]

    def test_doc_tokens_grouping(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("Alpha beta. Gamma delta.\nEpsilon zeta.\n", encoding="utf-8")
        corpus = load_corpus(path, "lines", stopwords=frozenset())
        assert corpus.doc_tokens() == [
            ["alpha", "beta", "gamma", "delta"],
            ["epsilon", "zeta"],
        ]


def test_load_stopwords_ignores_comments(tmp_path):
    path = tmp_path / "stop.txt"
    path.write_text("# comment\nThe\n\nand\n", encoding="utf-8")
    assert load_stopwords(path) == frozenset({"the", "and"})
