"""scikit-learn style wrappers.

``X`` is a sequence of :class:`SceneGraph` (or a :class:`LabeledDataset`),
``y`` a sequence of class labels. Estimators follow the usual contract:
hyperparameters in ``__init__``, learned state in trailing-underscore
attributes set by ``fit``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ConsistencyError, EligibilityError
from .ged import DEFAULT_NODE_BUDGET, EditPath, approx_ged, exact_ged, ged, pairwise_ged_matrix
from .graph import LabeledDataset, SceneGraph
from .kernels import KernelConfig, _raw_gram, normalize_gram
from .taxonomy import CostModel, Taxonomy


def check_graphs(X) -> list[SceneGraph]:
    """Validate ``X`` as a nonempty sequence of scene graphs with unique ids."""
    if isinstance(X, LabeledDataset):
        return list(X.graphs)
    if isinstance(X, SceneGraph):
        raise TypeError("expected a sequence of SceneGraph, got a single graph; wrap it in a list")
    try:
        graphs = list(X)
    except TypeError:
        raise TypeError(f"expected a sequence of SceneGraph, got {type(X).__name__}") from None
    if not graphs:
        raise ValueError("expected at least one graph")
    for i, g in enumerate(graphs):
        if not isinstance(g, SceneGraph):
            raise TypeError(f"element {i} is {type(g).__name__}, not SceneGraph")
    ids = [g.id for g in graphs]
    if len(set(ids)) != len(ids):
        raise ConsistencyError("graph ids in X must be unique")
    return graphs


def check_labels(y, n: int, min_classes: int = 1) -> list[str]:
    labels = [str(v) for v in np.asarray(y, dtype=object).ravel()]
    if len(labels) != n:
        raise ValueError(f"y has {len(labels)} labels for {n} graphs")
    if len(set(labels)) < min_classes:
        raise ValueError(f"y needs at least {min_classes} distinct classes")
    return labels


def _as_dataset(graphs, labels=None) -> LabeledDataset:
    if labels is None:
        labels = ["_"] * len(graphs)
    return LabeledDataset(tuple(graphs), {g.id: lab for g, lab in zip(graphs, labels)})


class GraphEditDistance(TransformerMixin, BaseEstimator):
    """Edit distances to the graphs seen in ``fit``.

    ``transform(X)`` returns an ``(len(X), n_fit)`` matrix. When ``X`` is the
    fitted set itself the pairwise engine (mirrored upper triangle, worker
    pool) is used.
    """

    def __init__(
        self,
        taxonomy: Taxonomy | None = None,
        method: str = "approx",
        raw_hop_del_cost: bool = False,
        node_budget: int = DEFAULT_NODE_BUDGET,
        n_jobs: int | None = None,
        directional: bool = False,
    ):
        self.taxonomy = taxonomy
        self.method = method
        self.raw_hop_del_cost = raw_hop_del_cost
        self.node_budget = node_budget
        self.n_jobs = n_jobs
        self.directional = directional

    def fit(self, X, y=None):
        if not isinstance(self.taxonomy, Taxonomy):
            raise TypeError("taxonomy must be a Taxonomy instance")
        if self.method not in ("exact", "approx"):
            raise ValueError(f"method must be 'exact' or 'approx', got {self.method!r}")
        self.graphs_ = check_graphs(X)
        self.cost_model_ = CostModel(self.taxonomy, self.raw_hop_del_cost)
        self.n_features_in_ = len(self.graphs_)
        return self

    def transform(self, X):
        check_is_fitted(self, "graphs_")
        graphs = check_graphs(X)
        if [g.id for g in graphs] == [g.id for g in self.graphs_] and graphs == self.graphs_:
            m = pairwise_ged_matrix(
                _as_dataset(graphs), self.cost_model_, self.method, self.n_jobs, self.directional, self.node_budget
            )
            return m.values
        out = np.empty((len(graphs), len(self.graphs_)))
        for i, g in enumerate(graphs):
            for j, h in enumerate(self.graphs_):
                out[i, j] = ged(g, h, self.cost_model_, self.method, self.node_budget)[0]
        return out

    def edit_path(self, g1: SceneGraph, g2: SceneGraph) -> EditPath:
        check_is_fitted(self, "cost_model_")
        if self.method == "exact":
            return exact_ged(g1, g2, self.cost_model_, self.node_budget)[1]
        return approx_ged(g1, g2, self.cost_model_)[1]


class GraphKernel(TransformerMixin, BaseEstimator):
    """Kernel values against the graphs seen in ``fit``.

    The random-walk decay, when left automatic, is chosen from the maximum
    degree over the fitted and transformed graphs together.
    """

    def __init__(self, kind: str = "WL", normalize: bool = True, wl_iterations: int = 3, nh_iterations: int = 2,
                 nh_bits: int = 32, rw_lambda: float | None = None, gs_graphlet_size: int = 4,
                 gs_samples: int = 500, gs_seed: int = 0):
        self.kind = kind
        self.normalize = normalize
        self.wl_iterations = wl_iterations
        self.nh_iterations = nh_iterations
        self.nh_bits = nh_bits
        self.rw_lambda = rw_lambda
        self.gs_graphlet_size = gs_graphlet_size
        self.gs_samples = gs_samples
        self.gs_seed = gs_seed

    def _config(self) -> KernelConfig:
        params = self.get_params()
        params.pop("normalize")
        return KernelConfig(**params)

    def fit(self, X, y=None):
        self.config_ = self._config()
        self.graphs_ = check_graphs(X)
        self.n_features_in_ = len(self.graphs_)
        return self

    def transform(self, X):
        check_is_fitted(self, "graphs_")
        graphs = check_graphs(X)
        both = graphs + self.graphs_
        K = _raw_gram(both, self.config_)
        if self.normalize:
            K = normalize_gram(K)
        return K[: len(graphs), len(graphs):]


class CounterfactualRetriever(BaseEstimator):
    """Nearest different-class graph under edit distance.

    ``fit(X, y)`` stores the reference graphs and their classes. ``predict``
    returns, for each query graph, the id of the closest reference graph
    whose class differs from the query's class. Query classes come from
    ``y`` when given, otherwise from the fitted labels (queries must then be
    fitted graphs).
    """

    def __init__(self, taxonomy: Taxonomy | None = None, method: str = "approx", raw_hop_del_cost: bool = False,
                 node_budget: int = DEFAULT_NODE_BUDGET, n_jobs: int | None = None):
        self.taxonomy = taxonomy
        self.method = method
        self.raw_hop_del_cost = raw_hop_del_cost
        self.node_budget = node_budget
        self.n_jobs = n_jobs

    def fit(self, X, y):
        graphs = check_graphs(X)
        labels = check_labels(y, len(graphs), min_classes=2)
        self.ged_ = GraphEditDistance(
            self.taxonomy, self.method, self.raw_hop_del_cost, self.node_budget, self.n_jobs
        ).fit(graphs)
        self.labels_ = dict(zip((g.id for g in graphs), labels))
        self.classes_ = np.array(sorted(set(labels)), dtype=object)
        self.distances_ = None
        return self

    def _query_labels(self, graphs, y):
        if y is not None:
            return check_labels(y, len(graphs))
        missing = [g.id for g in graphs if g.id not in self.labels_]
        if missing:
            raise ValueError(f"no class known for query graph(s) {missing[:5]}; pass y")
        return [self.labels_[g.id] for g in graphs]

    def _distances(self, graphs):
        if graphs == self.ged_.graphs_:
            if self.distances_ is None:
                self.distances_ = self.ged_.transform(graphs)
            return self.distances_
        return self.ged_.transform(graphs)

    def kneighbors(self, X, y=None, k: int | None = None):
        """Ranked ``(id, cost)`` lists of different-class reference graphs."""
        check_is_fitted(self, "labels_")
        graphs = check_graphs(X)
        labels = self._query_labels(graphs, y)
        D = self._distances(graphs)
        ref = [g.id for g in self.ged_.graphs_]
        out = []
        for i, (g, lab) in enumerate(zip(graphs, labels)):
            cands = [(ref[j], float(D[i, j])) for j in range(len(ref)) if self.labels_[ref[j]] != lab and ref[j] != g.id]
            if not cands:
                raise EligibilityError(f"no reference graph with a class other than {lab!r} for {g.id!r}")
            cands.sort(key=lambda c: (c[1], c[0]))
            out.append(cands if k is None else cands[:k])
        return out

    def predict(self, X, y=None):
        return np.array([lst[0][0] for lst in self.kneighbors(X, y, k=1)], dtype=object)

    def explain(self, query: SceneGraph, y=None) -> tuple[str, float, EditPath]:
        """Counterfactual id, its cost, and the edit path from ``query`` to it."""
        (cid, cost), = self.kneighbors([query], None if y is None else [y], k=1)[0]
        target = next(g for g in self.ged_.graphs_ if g.id == cid)
        return cid, cost, self.ged_.edit_path(query, target)
