import math

import numpy as np
import pytest

from relemb.corpus import build_index
from relemb.expansion import (
    ExpansionConfig,
    cross_validate_expansion,
    expand_query,
)
from relemb.metrics import average_precision
from relemb.model import KIND_POSTERIOR, EmbeddingModel
from relemb.retrieval import QueryLanguageModel, kl_retrieve


def abc_index():
    return build_index([("d1", "a b c"), ("d2", "a c"), ("d3", "b c c")])


def hand_model(index):
    """Posterior model over the index vocabulary with controlled scores.

    With query 'a b' the projection is [1.0]; term scores come out as
    sigmoid(0) = 0.5 for 'a', tiny for 'b', 0.75 for 'c', so the top-2
    embedding distribution renormalizes to {c: 0.6, a: 0.4}.
    """
    terms = list(index.vocabulary.terms)
    query_vecs = np.ones((3, 1))
    term_vecs = np.array([[0.0], [-9.0], [math.log(3.0)]])
    return EmbeddingModel(
        kind=KIND_POSTERIOR, dim=1, terms=terms, query_vecs=query_vecs, term_vecs=term_vecs
    )


class TestExpandQuery:
    def test_alpha_one_is_exactly_the_mle_model(self):
        index = abc_index()
        model = hand_model(index)
        expanded = expand_query(model, index, ["a", "b"], ExpansionConfig(alpha=1.0, num_terms=2))
        mle = QueryLanguageModel.from_tokens(index, ["a", "b"])
        assert expanded.used_embedding
        assert expanded.model.probs == mle.probs

    def test_alpha_zero_is_the_renormalized_embedding_distribution(self):
        index = abc_index()
        model = hand_model(index)
        expanded = expand_query(model, index, ["a", "b"], ExpansionConfig(alpha=0.0, num_terms=2))
        ids = index.vocabulary.ids
        assert expanded.model.probs[ids["c"]] == pytest.approx(0.6)
        assert expanded.model.probs[ids["a"]] == pytest.approx(0.4)
        assert ids["b"] not in expanded.model.probs

    def test_hand_interpolation(self):
        # alpha 0.5, p_ml = {a: .5, b: .5}, embedding = {c: .6, a: .4}.
        index = abc_index()
        model = hand_model(index)
        expanded = expand_query(model, index, ["a", "b"], ExpansionConfig(alpha=0.5, num_terms=2))
        ids = index.vocabulary.ids
        probs = expanded.model.probs
        assert probs[ids["a"]] == pytest.approx(0.45)
        assert probs[ids["b"]] == pytest.approx(0.25)
        assert probs[ids["c"]] == pytest.approx(0.30)

    @pytest.mark.parametrize("alpha", [0.0, 0.3, 0.5, 0.8, 1.0])
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_output_sums_to_one(self, alpha, m):
        index = abc_index()
        model = hand_model(index)
        expanded = expand_query(
            model, index, ["a", "b"], ExpansionConfig(alpha=alpha, num_terms=m)
        )
        assert sum(expanded.model.probs.values()) == pytest.approx(1.0, abs=1e-9)
        expanded.model.validate()

    def test_projection_failure_falls_back_to_mle(self):
        index = abc_index()
        model = hand_model(index)
        model.terms = ["x", "y", "z"]  # embeddings no longer cover the query
        model._ids = {t: i for i, t in enumerate(model.terms)}
        expanded = expand_query(model, index, ["a", "b"], ExpansionConfig(alpha=0.5, num_terms=2))
        assert not expanded.used_embedding
        mle = QueryLanguageModel.from_tokens(index, ["a", "b"])
        assert expanded.model.probs == mle.probs

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ExpansionConfig(alpha=1.5).validate()
        with pytest.raises(ValueError):
            ExpansionConfig(num_terms=0).validate()


def bigger_setup(seed=3):
    """A 30-doc two-term-theme corpus with qrels keyed on theme."""
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(30):
        theme = "a b" if i % 2 == 0 else "x y"
        extra = " ".join(rng.choice(list("abxy"), size=3))
        docs.append((f"d{i:02d}", f"{theme} {extra}"))
    index = build_index(docs)
    queries = {"q0": ["a"], "q1": ["x"], "q2": ["b"], "q3": ["y"]}
    qrels = {
        qid: {
            doc_id: 1
            for doc_id, text in docs
            if (tokens[0] in "ab") == (int(doc_id[1:]) % 2 == 0)
        }
        for qid, tokens in queries.items()
    }
    model = EmbeddingModel(
        kind=KIND_POSTERIOR,
        dim=2,
        terms=list(index.vocabulary.terms),
        query_vecs=np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]),
        term_vecs=np.array([[2.0, -2.0], [2.0, -2.0], [-2.0, 2.0], [-2.0, 2.0]]),
    )
    return index, model, queries, qrels


class TestCrossValidateExpansion:
    def test_grid_of_one_point_equals_direct_evaluation(self):
        index, model, queries, qrels = bigger_setup()
        report = cross_validate_expansion(
            model, index, queries, qrels, alpha_grid=[0.5], m_grid=[2], folds=2, k=30, mu=100.0
        )
        assert report.fold_choices == [(0.5, 2), (0.5, 2)]
        for qid, tokens in queries.items():
            expanded = expand_query(
                model, index, tokens, ExpansionConfig(alpha=0.5, num_terms=2, mu=100.0)
            )
            run = kl_retrieve(index, expanded.model, k=30, mu=100.0, query_id=qid)
            assert report.per_query_expanded_ap[qid] == pytest.approx(
                average_precision(run, qrels, cutoff=30)
            )

    def test_alpha_one_grid_point_reproduces_baseline(self):
        index, model, queries, qrels = bigger_setup()
        report = cross_validate_expansion(
            model, index, queries, qrels, alpha_grid=[1.0], m_grid=[3], folds=2, k=30, mu=100.0
        )
        for metric in ("map", "p20", "ndcg20"):
            assert report.expanded[metric] == pytest.approx(report.baseline[metric], abs=1e-12)

    def test_tuned_point_maximizes_training_map(self):
        index, model, queries, qrels = bigger_setup()
        report = cross_validate_expansion(
            model,
            index,
            queries,
            qrels,
            alpha_grid=[0.2, 0.5, 0.8],
            m_grid=[1, 2, 4],
            folds=2,
            k=30,
            mu=100.0,
        )
        for fold, chosen in enumerate(report.fold_choices):
            table = report.grid_train_map[fold]
            assert table[chosen] == max(table.values())

    def test_tie_break_prefers_larger_alpha_then_fewer_terms(self):
        index, model, queries, qrels = bigger_setup()
        # All grid points give identical rankings when the embedding
        # distribution only reinforces the query theme.
        report = cross_validate_expansion(
            model, index, queries, qrels, alpha_grid=[0.4, 0.6], m_grid=[2, 3],
            folds=2, k=30, mu=100.0,
        )
        for fold, table in enumerate(report.grid_train_map):
            best_map = max(table.values())
            tied = [p for p, v in table.items() if v == best_map]
            expected = max(tied, key=lambda p: (p[0], -p[1]))
            assert report.fold_choices[fold] == expected

    def test_queries_without_qrels_are_excluded(self):
        index, model, queries, qrels = bigger_setup()
        queries = dict(queries)
        queries["q9"] = ["a"]
        report = cross_validate_expansion(
            model, index, queries, qrels, alpha_grid=[0.5], m_grid=[2], folds=2, k=30, mu=100.0
        )
        assert report.excluded["no_qrels"] == ["q9"]
        assert report.num_queries == 4

    def test_deterministic_fold_split(self):
        index, model, queries, qrels = bigger_setup()
        a = cross_validate_expansion(
            model, index, queries, qrels, alpha_grid=[0.5, 0.9], m_grid=[2], folds=2,
            k=30, mu=100.0,
        )
        b = cross_validate_expansion(
            model, index, queries, qrels, alpha_grid=[0.5, 0.9], m_grid=[2], folds=2,
            k=30, mu=100.0,
        )
        assert a.fold_choices == b.fold_choices
        assert a.expanded == b.expanded

    def test_report_formats(self):
        index, model, queries, qrels = bigger_setup()
        report = cross_validate_expansion(
            model, index, queries, qrels, alpha_grid=[0.5], m_grid=[2], folds=2, k=30, mu=100.0
        )
        text = report.format_text()
        assert "baseline" in text and "expanded" in text
        lines = report.machine_lines()
        assert any(line.startswith("map\texpanded\t") for line in lines)
        for line in lines:
            assert len(line.split("\t")) == 3

    def test_optional_grid_run_dump(self, tmp_path):
        index, model, queries, qrels = bigger_setup()
        dump_dir = tmp_path / "grid"
        cross_validate_expansion(
            model, index, queries, qrels, alpha_grid=[0.3, 0.7], m_grid=[2], folds=2,
            k=30, mu=100.0, dump_dir=str(dump_dir),
        )
        files = sorted(p.name for p in dump_dir.iterdir())
        assert files == ["run_alpha0.3_m2.trec", "run_alpha0.7_m2.trec"]
        lines = (dump_dir / files[0]).read_text().splitlines()
        assert lines and len(lines[0].split()) == 6
