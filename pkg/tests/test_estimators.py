import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import toy_dataset
from scenecf.errors import EligibilityError
from scenecf.estimators import CounterfactualRetriever, GraphEditDistance, GraphKernel
from scenecf.ged import approx_ged, pairwise_ged_matrix
from scenecf.graph import make_graph
from scenecf.kernels import KernelConfig, gram
from scenecf.retrieval import counterfactual


@pytest.fixture(scope="module")
def ds():
    return toy_dataset(seed=8, n=12)


def test_params_and_clone(tax10):
    est = GraphEditDistance(tax10, method="exact", n_jobs=1)
    assert est.get_params()["method"] == "exact"
    c = clone(est)
    assert c.get_params()["node_budget"] == 10 and c is not est
    k = clone(GraphKernel("SP", normalize=False))
    assert k.kind == "SP" and k.normalize is False


def test_ged_transform(tax10, cm10, ds):
    est = GraphEditDistance(tax10, n_jobs=1).fit(ds.graphs)
    D = est.transform(ds.graphs)
    assert np.array_equal(D, pairwise_ged_matrix(ds, cm10, workers=1).values)
    part = est.transform(ds.graphs[:3])
    assert part.shape == (3, 12)
    assert part[1, 5] == approx_ged(ds.graphs[1], ds.graphs[5], cm10)[0]


def test_ged_validation(tax10, ds):
    with pytest.raises(NotFittedError):
        GraphEditDistance(tax10).transform(ds.graphs)
    with pytest.raises(TypeError):
        GraphEditDistance(None).fit(ds.graphs)
    with pytest.raises(ValueError):
        GraphEditDistance(tax10, method="fast").fit(ds.graphs)
    with pytest.raises(TypeError):
        GraphEditDistance(tax10).fit(ds.graphs[0])
    with pytest.raises(ValueError):
        GraphEditDistance(tax10).fit([])


def test_kernel_transform_matches_gram(ds):
    est = GraphKernel("WL").fit(ds)
    K = est.transform(ds.graphs)
    np.testing.assert_allclose(K, gram(ds, KernelConfig("WL")).values, atol=1e-12)
    assert est.transform(ds.graphs[:2]).shape == (2, 12)


def test_retriever_predict(tax10, cm10, ds):
    y = [ds.labels[i] for i in ds.ids]
    est = CounterfactualRetriever(tax10, n_jobs=1).fit(ds.graphs, y)
    m = pairwise_ged_matrix(ds, cm10, workers=1)
    expected = [counterfactual(q, ds, m)[0] for q in ds.ids]
    assert est.predict(ds.graphs).tolist() == expected
    assert list(est.classes_) == sorted(set(y))
    cid, cost, path = est.explain(ds.graphs[0])
    assert cid == expected[0] and path.total_cost == pytest.approx(cost)


def test_retriever_new_query(tax10, ds):
    y = [ds.labels[i] for i in ds.ids]
    est = CounterfactualRetriever(tax10, n_jobs=1).fit(ds.graphs, y)
    q = make_graph("new", {"a": "dog"})
    with pytest.raises(ValueError):
        est.predict([q])
    (cid,) = est.predict([q], y=[y[0]])
    assert ds.labels[cid] != y[0]


def test_retriever_needs_two_classes(tax10, ds):
    with pytest.raises(ValueError):
        CounterfactualRetriever(tax10).fit(ds.graphs, ["a"] * len(ds))


def test_retriever_no_eligible_reference(tax10, ds):
    est = CounterfactualRetriever(tax10, n_jobs=1).fit(ds.graphs[:3], ["a", "b", "b"])
    # the only other-class reference is the query itself
    with pytest.raises(EligibilityError):
        est.kneighbors([ds.graphs[0]], y=["b"])
    assert est.kneighbors([ds.graphs[1]], k=5)[0][0][0] == ds.graphs[0].id
