import numpy as np
import pytest

from relemb.classification import (
    CentroidTable,
    LabeledQuery,
    classify,
    compute_centroids,
    cross_validate_classification,
    evaluate_classification,
    read_category_list,
    read_labeled_queries,
    write_predictions,
)
from relemb.model import KIND_POSTERIOR, EmbeddingModel


def indicator_model(terms_per_class, dim=None):
    """Each class's terms share a one-hot direction: perfectly separable."""
    num_classes = len(terms_per_class)
    dim = dim or num_classes
    terms, rows = [], []
    for c, class_terms in enumerate(terms_per_class):
        for t in class_terms:
            terms.append(t)
            row = np.zeros(dim)
            row[c] = 1.0
            rows.append(row)
    query_vecs = np.stack(rows)
    return EmbeddingModel(
        kind=KIND_POSTERIOR,
        dim=dim,
        terms=terms,
        query_vecs=query_vecs,
        term_vecs=np.zeros_like(query_vecs),
    )


def model3():
    return indicator_model([["red", "crimson"], ["green", "lime"], ["blue", "navy"]])


class TestComputeCentroids:
    def test_single_query_category_is_its_vector(self):
        model = model3()
        labeled = [LabeledQuery("q1", "red crimson", [["warm"]])]
        table = compute_centroids(model, labeled)
        np.testing.assert_allclose(table.vectors[0], [1.0, 0.0, 0.0])
        assert table.labels == ["warm"] and table.member_counts == [1]

    def test_two_queries_average(self):
        model = model3()
        labeled = [
            LabeledQuery("q1", "red", [["warm"]]),
            LabeledQuery("q2", "green", [["warm"]]),
        ]
        table = compute_centroids(model, labeled)
        np.testing.assert_allclose(table.vectors[0], [0.5, 0.5, 0.0])

    def test_matches_brute_force_recomputation(self):
        rng = np.random.default_rng(19)
        model = model3()
        vocab = model.terms
        labels = ["c0", "c1", "c2"]
        labeled = []
        for i in range(10):
            words = list(rng.choice(vocab, size=2, replace=False))
            mine = list(rng.choice(labels, size=rng.integers(1, 3), replace=False))
            labeled.append(LabeledQuery(f"q{i}", " ".join(words), [mine]))
        table = compute_centroids(model, labeled)
        for idx, label in enumerate(table.labels):
            members = []
            for q in labeled:
                if label in q.all_labels():
                    tids = model.term_ids(q.text.split())
                    members.append(model.query_vecs[tids].mean(axis=0))
            np.testing.assert_allclose(table.vectors[idx], np.mean(members, axis=0))

    def test_multi_editor_labels_union(self):
        model = model3()
        labeled = [LabeledQuery("q1", "red", [["a"], ["b"]])]
        table = compute_centroids(model, labeled)
        assert table.labels == ["a", "b"]

    def test_unprojectable_queries_skipped(self):
        model = model3()
        labeled = [
            LabeledQuery("q1", "red", [["warm"]]),
            LabeledQuery("q2", "unknownword", [["warm"]]),
        ]
        table = compute_centroids(model, labeled)
        assert table.skipped_queries == 1
        assert table.member_counts == [1]

    def test_empty_category_excluded_with_order_preserved(self):
        model = model3()
        labeled = [LabeledQuery("q1", "red", [["warm"]])]
        table = compute_centroids(model, labeled, label_order=["cold", "warm"])
        assert table.excluded_labels == ["cold"]
        assert table.labels == ["warm"]


class TestClassify:
    def test_identical_query_ranks_its_category_first(self):
        model = model3()
        labeled = [
            LabeledQuery("q1", "red crimson", [["warm"]]),
            LabeledQuery("q2", "blue navy", [["cold"]]),
        ]
        table = compute_centroids(model, labeled)
        assert classify(model, table, ["red", "crimson"], 1) == ["warm"]

    def test_identical_centroids_fall_back_to_label_order(self):
        model = model3()
        table = CentroidTable(
            labels=["z_last", "a_first", "m_mid"],
            vectors=np.ones((3, 3)),
            member_counts=[1, 1, 1],
        )
        assert classify(model, table, ["red"], 2) == ["z_last", "a_first"]

    def test_matches_brute_force_cosine_ordering(self):
        rng = np.random.default_rng(23)
        model = model3()
        table = CentroidTable(
            labels=["c0", "c1", "c2"],
            vectors=rng.normal(size=(3, 3)),
            member_counts=[1, 1, 1],
        )
        tokens = ["red", "lime"]
        qvec = model.query_vecs[model.term_ids(tokens)].mean(axis=0)
        sims = {
            label: float(
                np.dot(table.vectors[i], qvec)
                / (np.linalg.norm(table.vectors[i]) * np.linalg.norm(qvec))
            )
            for i, label in enumerate(table.labels)
        }
        expected = sorted(table.labels, key=lambda lab: -sims[lab])
        assert classify(model, table, tokens, 3) == expected

    def test_scale_invariance_of_returned_labels(self):
        model = model3()
        table = CentroidTable(
            labels=["c0", "c1", "c2"],
            vectors=np.array([[1.0, 0.2, 0.0], [0.0, 1.0, 0.1], [0.3, 0.0, 1.0]]),
            member_counts=[1, 1, 1],
        )
        scaled = CentroidTable(
            labels=table.labels, vectors=17.0 * table.vectors, member_counts=[1, 1, 1]
        )
        for t in (1, 2, 3):
            assert classify(model, table, ["red"], t) == classify(model, scaled, ["red"], t)

    def test_projection_failure_gives_empty_prediction(self):
        model = model3()
        table = compute_centroids(model, [LabeledQuery("q1", "red", [["warm"]])])
        assert classify(model, table, ["mystery"], 1) == []

    def test_t_outside_range_rejected(self):
        model = model3()
        table = compute_centroids(model, [LabeledQuery("q1", "red", [["warm"]])])
        for t in (0, 6):
            with pytest.raises(ValueError):
                classify(model, table, ["red"], t)


class TestEvaluateClassification:
    def test_exact_match_single_editor(self):
        gold = [LabeledQuery("q1", "x", [["a", "b"]])]
        metrics = evaluate_classification({"q1": ["a", "b"]}, gold)
        assert metrics.precision == metrics.recall == metrics.f1 == 1.0

    def test_disjoint_predictions(self):
        gold = [LabeledQuery("q1", "x", [["a"]])]
        metrics = evaluate_classification({"q1": ["b"]}, gold)
        assert metrics.precision == metrics.recall == metrics.f1 == 0.0

    def test_hand_computed_micro_average(self):
        # Editor pools: q1 contributes 1/2 hit, q2 contributes 1/1.
        # P = 2/3, R = 2/4, F1 = 2 * (2/3) * (1/2) / (2/3 + 1/2).
        gold = [
            LabeledQuery("q1", "x", [["a", "b", "c"]]),
            LabeledQuery("q2", "y", [["d"]]),
        ]
        predictions = {"q1": ["a", "z"], "q2": ["d"]}
        metrics = evaluate_classification(predictions, gold)
        assert metrics.precision == pytest.approx(2 / 3)
        assert metrics.recall == pytest.approx(2 / 4)
        expected_f1 = 2 * (2 / 3) * (1 / 2) / ((2 / 3) + (1 / 2))
        assert metrics.f1 == pytest.approx(expected_f1)

    def test_editor_mean(self):
        # Editor 1 agrees fully, editor 2 not at all: mean of 1 and 0.
        gold = [LabeledQuery("q1", "x", [["a"], ["b"]])]
        metrics = evaluate_classification({"q1": ["a"]}, gold)
        assert metrics.precision == pytest.approx(0.5)
        assert metrics.f1 == pytest.approx(0.5)

    def test_macro_mode_differs_from_micro(self):
        gold = [
            LabeledQuery("q1", "x", [["a", "b", "c", "d"]]),
            LabeledQuery("q2", "y", [["e"]]),
        ]
        predictions = {"q1": ["a"], "q2": ["z"]}
        micro = evaluate_classification(predictions, gold, macro=False)
        macro = evaluate_classification(predictions, gold, macro=True)
        assert micro.precision == pytest.approx(1 / 2)
        assert macro.precision == pytest.approx((1.0 + 0.0) / 2)

    def test_f1_bounds(self):
        rng = np.random.default_rng(31)
        labels = list("abcdef")
        for trial in range(50):
            gold = [
                LabeledQuery(
                    f"q{i}", "x", [list(rng.choice(labels, size=rng.integers(1, 4), replace=False))]
                )
                for i in range(5)
            ]
            predictions = {
                f"q{i}": list(rng.choice(labels, size=rng.integers(1, 4), replace=False))
                for i in range(5)
            }
            metrics = evaluate_classification(predictions, gold)
            assert 0.0 <= metrics.f1 <= 1.0
            if metrics.f1 == 1.0:
                assert metrics.precision == 1.0 and metrics.recall == 1.0

    def test_all_empty_predictions_rejected(self):
        gold = [LabeledQuery("q1", "x", [["a"]])]
        with pytest.raises(ValueError):
            evaluate_classification({"q1": []}, gold)

    def test_predictions_without_gold_rejected(self):
        gold = [LabeledQuery("q1", "x", [["a"]])]
        with pytest.raises(ValueError):
            evaluate_classification({"q9": ["a"]}, gold)


class TestCrossValidation:
    def _labeled_set(self):
        model = model3()
        names = {0: ("red", "crimson", "warm"), 1: ("green", "lime", "plant"), 2: ("blue", "navy", "cold")}
        labeled = []
        for i in range(30):
            cls = i % 3
            w1, w2, label = names[cls]
            text = w1 if i % 2 == 0 else f"{w1} {w2}"
            labeled.append(LabeledQuery(f"q{i:02d}", text, [[label]]))
        return model, labeled

    def test_perfectly_separable_data_scores_one(self):
        model, labeled = self._labeled_set()
        report = cross_validate_classification(model, labeled, folds=5, seed=1)
        assert report.f1 == pytest.approx(1.0)
        assert report.precision == pytest.approx(1.0)

    def test_fixed_seed_reproduces_folds_and_metrics(self):
        model, labeled = self._labeled_set()
        a = cross_validate_classification(model, labeled, folds=5, seed=9)
        b = cross_validate_classification(model, labeled, folds=5, seed=9)
        assert a.fold_t == b.fold_t
        assert a.f1 == b.f1 and a.precision == b.precision

    def test_tie_break_prefers_smaller_t(self):
        model, labeled = self._labeled_set()
        report = cross_validate_classification(model, labeled, folds=3, seed=2)
        assert all(t == 1 for t in report.fold_t)

    def test_report_formats(self):
        model, labeled = self._labeled_set()
        report = cross_validate_classification(model, labeled, folds=3, seed=2)
        assert "mean" in report.format_text()
        assert any(line.startswith("f1\t") for line in report.machine_lines())


class TestLabelFiles:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "labels.tsv"
        path.write_text(
            "q1\tred shoes\te1:warm,bright;e2:warm\nq2\tnavy coat\te1:cold\n",
            encoding="utf-8",
        )
        labeled = read_labeled_queries(str(path))
        assert labeled[0].query_id == "q1"
        assert labeled[0].editors == [["warm", "bright"], ["warm"]]
        assert labeled[1].editors == [["cold"]]

    def test_too_many_labels_rejected(self, tmp_path):
        path = tmp_path / "labels.tsv"
        path.write_text("q1\tx\te1:a,b,c,d,e,f\n", encoding="utf-8")
        with pytest.raises(ValueError):
            read_labeled_queries(str(path))

    def test_labels_outside_category_set_rejected(self):
        query = LabeledQuery("q1", "x", [["a", "mystery"]])
        with pytest.raises(ValueError, match="mystery"):
            query.validate({"a", "b"})

    def test_predictions_writer(self, tmp_path):
        path = str(tmp_path / "pred.tsv")
        write_predictions({"q2": ["a"], "q1": ["b", "c"]}, path)
        assert open(path).read() == "q1\tb,c\nq2\ta\n"

    def test_category_list_reader(self, tmp_path):
        path = tmp_path / "categories.txt"
        path.write_text("alpha\nbeta\n\ngamma\n", encoding="utf-8")
        assert read_category_list(str(path)) == ["alpha", "beta", "gamma"]
