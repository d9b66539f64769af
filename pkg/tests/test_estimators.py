import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from relemb.errors import ProjectionError
from relemb.estimators import (
    CentroidQueryClassifier,
    RelevanceLikelihoodEmbedding,
    RelevancePosteriorEmbedding,
)
from relemb.model import KIND_LIKELIHOOD, KIND_POSTERIOR, project_query

from test_classification import indicator_model
from test_model import small_training_set, tiny_index


@pytest.fixture(scope="module")
def fitted_pair():
    index = tiny_index()
    training = small_training_set()
    lik = RelevanceLikelihoodEmbedding(dim=6, epochs=2, batch_size=4, seed=3)
    post = RelevancePosteriorEmbedding(dim=6, epochs=2, batch_size=4, seed=3, eta_pos=5)
    return lik.fit(training, index), post.fit(training, index), index, training


class TestEstimatorApi:
    def test_get_params_round_trip(self):
        est = RelevanceLikelihoodEmbedding(dim=32, learning_rate=0.05)
        params = est.get_params()
        assert params["dim"] == 32 and params["learning_rate"] == 0.05
        est.set_params(epochs=11)
        assert est.epochs == 11

    def test_clone_keeps_hyperparameters(self):
        est = RelevancePosteriorEmbedding(dim=8, eta_pos=7, eta_neg_mult=3.0)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_unfitted_transform_raises(self):
        with pytest.raises(NotFittedError):
            RelevanceLikelihoodEmbedding().transform([["a"]])

    def test_fit_sets_model_and_loss_curve(self, fitted_pair):
        lik, post, _, _ = fitted_pair
        assert lik.model_.kind == KIND_LIKELIHOOD
        assert post.model_.kind == KIND_POSTERIOR
        assert len(lik.loss_curve_) == 2 and len(post.loss_curve_) == 2
        lik.model_.validate()
        post.model_.validate()

    def test_transform_matches_projection(self, fitted_pair):
        lik, _, _, _ = fitted_pair
        queries = [["w0", "w3"], ["w5"]]
        out = lik.transform(queries)
        assert out.shape == (2, 6)
        expected = project_query(lik.model_, lik.model_.term_ids(["w0", "w3"]))
        np.testing.assert_allclose(out[0], expected)

    def test_transform_rejects_unprojectable_query(self, fitted_pair):
        lik, _, _, _ = fitted_pair
        with pytest.raises(ProjectionError, match="query 1"):
            lik.transform([["w0"], ["nothing"]])

    def test_transform_rejects_raw_strings(self, fitted_pair):
        lik, _, _, _ = fitted_pair
        with pytest.raises(TypeError):
            lik.transform(["w0 w3"])

    def test_term_scores_convenience(self, fitted_pair):
        _, post, _, _ = fitted_pair
        scores = post.term_scores(["w1"], 3)
        assert len(scores) == 3
        assert sum(s for _, s in scores.entries) == pytest.approx(1.0)

    def test_same_seed_same_model(self):
        index = tiny_index()
        training = small_training_set()
        a = RelevanceLikelihoodEmbedding(dim=4, epochs=1, seed=5).fit(training, index)
        b = RelevanceLikelihoodEmbedding(dim=4, epochs=1, seed=5).fit(training, index)
        assert np.array_equal(a.model_.query_vecs, b.model_.query_vecs)


class TestCentroidQueryClassifier:
    def test_fit_predict_separable(self):
        model = indicator_model([["red", "crimson"], ["blue", "navy"]])
        clf = CentroidQueryClassifier(embedding=model, top_t=1)
        clf.fit([["red"], ["crimson"], ["blue"]], [["warm"], ["warm"], ["cold"]])
        assert clf.predict([["crimson", "red"], ["navy"]]) == [["warm"], ["cold"]]

    def test_unfitted_predict_raises(self):
        model = indicator_model([["red"], ["blue"]])
        with pytest.raises(NotFittedError):
            CentroidQueryClassifier(embedding=model).predict([["red"]])

    def test_missing_embedding_rejected(self):
        with pytest.raises(ValueError):
            CentroidQueryClassifier().fit([["red"]], [["warm"]])

    def test_length_mismatch_rejected(self):
        model = indicator_model([["red"], ["blue"]])
        with pytest.raises(ValueError):
            CentroidQueryClassifier(embedding=model).fit([["red"]], [["a"], ["b"]])

    def test_get_params_includes_embedding(self):
        model = indicator_model([["red"], ["blue"]])
        clf = CentroidQueryClassifier(embedding=model, top_t=2)
        assert clf.get_params()["top_t"] == 2
        assert clf.get_params()["embedding"] is model
