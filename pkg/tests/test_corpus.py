import numpy as np
import pytest

from relemb.corpus import build_index, mle_prob, read_corpus_file
from relemb.errors import DuplicateDocumentError, UnknownDocumentError
from relemb.tokenization import load_stopwords, tokenize


class TestTokenize:
    def test_case_fold_and_stopwords(self):
        assert tokenize("The DOG barked!", {"the"}) == ["dog", "barked"]

    def test_empty_input(self):
        assert tokenize("") == []

    def test_split_on_non_alphanumeric(self):
        # Hand application of the split rule: '-' separates, digits stay.
        assert tokenize("a1-b2 c") == ["a1", "b2", "c"]

    @pytest.mark.parametrize(
        "text,expected",
        [
            ("punct.,;!?", ["punct"]),
            ("under_score", ["under", "score"]),
            ("MiXed CASE", ["mixed", "case"]),
            ("1 2 3", ["1", "2", "3"]),
        ],
    )
    def test_edge_cases(self, text, expected):
        assert tokenize(text) == expected

    def test_bundled_stopword_list(self):
        stopwords = load_stopwords()
        assert "the" in stopwords and "of" in stopwords
        assert len(stopwords) > 300
        assert tokenize("state of the art", stopwords) == ["state", "art"]


def _toy_index():
    return build_index([("d1", "a a b"), ("d2", "b c")])


class TestBuildIndex:
    def test_hand_counted_statistics(self):
        index = _toy_index()
        vocab = index.vocabulary
        assert index.num_terms == 3
        assert vocab.total_tokens == 5
        assert int(vocab.cf[vocab.ids["b"]]) == 2
        assert int(vocab.df[vocab.ids["b"]]) == 2
        index.validate()

    def test_empty_document(self):
        index = build_index([("d1", "a"), ("d2", "")])
        assert index.doc_length("d2") == 0
        assert len(index.doc_terms[index.doc_position("d2")]) == 0
        index.validate()

    def test_deterministic_rebuild(self):
        docs = [("d1", "a a b"), ("d2", "b c"), ("d3", "c a")]
        a, b = build_index(docs), build_index(docs)
        assert a.vocabulary.terms == b.vocabulary.terms
        assert np.array_equal(a.doc_lengths, b.doc_lengths)
        for ta, tb in zip(a.doc_terms, b.doc_terms):
            assert np.array_equal(ta, tb)

    def test_duplicate_doc_id_rejected(self):
        with pytest.raises(DuplicateDocumentError, match="dup1"):
            build_index([("dup1", "a"), ("dup1", "b")])

    def test_partitioning_does_not_change_result(self):
        rng = np.random.default_rng(3)
        docs = [
            (f"d{i}", " ".join(rng.choice(list("abcdefgh"), size=rng.integers(1, 12))))
            for i in range(40)
        ]
        single = build_index(docs, workers=1)
        multi = build_index(docs, workers=4)
        assert single.vocabulary.terms == multi.vocabulary.terms
        assert np.array_equal(single.vocabulary.cf, multi.vocabulary.cf)
        assert np.array_equal(single.doc_lengths, multi.doc_lengths)

    def test_min_cf_threshold_prunes_vocabulary(self):
        index = build_index([("d1", "common common rare")], min_cf=2)
        assert index.vocabulary.terms == ["common"]
        # Pruned occurrences count toward neither postings nor length.
        assert index.doc_length("d1") == 2
        index.validate()

    def test_collection_model_sums_to_one(self):
        rng = np.random.default_rng(5)
        for trial in range(20):
            docs = [
                (f"d{i}", " ".join(rng.choice(list("abcdefg"), size=rng.integers(1, 20))))
                for i in range(rng.integers(1, 15))
            ]
            index = build_index(docs)
            assert abs(index.collection_prob.sum() - 1.0) <= 1e-9

    def test_doc_lengths_match_tokenizer_output(self):
        rng = np.random.default_rng(9)
        words = ["alpha", "beta", "gamma", "delta"]
        docs = [
            (f"d{i}", " ".join(rng.choice(words, size=rng.integers(0, 25))))
            for i in range(30)
        ]
        index = build_index(docs)
        for doc_id, text in docs:
            assert index.doc_length(doc_id) == len(tokenize(text))


class TestPersistence:
    def test_round_trip_identical_statistics(self, tmp_path):
        index = build_index([("d1", "a a b"), ("d2", "b c d"), ("d3", "")])
        path = str(tmp_path / "index.npz")
        index.save(path)
        loaded = type(index).load(path)
        loaded.validate()
        assert loaded.vocabulary.terms == index.vocabulary.terms
        assert np.array_equal(loaded.vocabulary.cf, index.vocabulary.cf)
        assert np.array_equal(loaded.vocabulary.df, index.vocabulary.df)
        assert loaded.doc_ids == index.doc_ids
        assert np.array_equal(loaded.doc_lengths, index.doc_lengths)
        assert set(loaded.postings) == set(index.postings)
        for tid in index.postings:
            assert np.array_equal(loaded.postings[tid][0], index.postings[tid][0])
            assert np.array_equal(loaded.postings[tid][1], index.postings[tid][1])

    def test_vocab_dump_format(self, tmp_path):
        index = _toy_index()
        path = str(tmp_path / "vocab.tsv")
        index.write_vocab_dump(path)
        lines = open(path).read().splitlines()
        assert lines[0].split("\t") == ["a", "0", "1", "2"]
        assert len(lines) == index.num_terms

    def test_corpus_file_reader(self, tmp_path):
        path = tmp_path / "corpus.tsv"
        path.write_text("d1\thello world\nd2\tsecond doc\n", encoding="utf-8")
        docs = list(read_corpus_file(str(path)))
        assert docs == [("d1", "hello world"), ("d2", "second doc")]

    def test_corpus_file_rejects_missing_tab(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("no tab here\n", encoding="utf-8")
        with pytest.raises(ValueError, match="docid"):
            list(read_corpus_file(str(path)))


class TestMleProb:
    def test_hand_count(self):
        index = _toy_index()
        assert mle_prob(index, index.vocabulary.ids["a"], "d1") == pytest.approx(2 / 3)

    def test_absent_term_is_zero(self):
        index = _toy_index()
        assert mle_prob(index, index.vocabulary.ids["c"], "d1") == 0.0

    def test_normalization_over_document(self):
        index = _toy_index()
        total = sum(mle_prob(index, tid, "d1") for tid in range(index.num_terms))
        assert total == pytest.approx(1.0)

    def test_unknown_document(self):
        with pytest.raises(UnknownDocumentError):
            mle_prob(_toy_index(), 0, "nope")

    def test_empty_document_rejected(self):
        index = build_index([("d1", "a"), ("d2", "")])
        with pytest.raises(ValueError, match="empty"):
            mle_prob(index, 0, "d2")
