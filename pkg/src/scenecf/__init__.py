"""Knowledge-grounded graph edit distance and counterfactual retrieval for
scene graphs."""

__version__ = "0.1.0"

from .errors import (
    CapacityError,
    ConceptLookupError,
    ConnectivityError,
    ConsistencyError,
    CoverageError,
    DivergenceError,
    EligibilityError,
    ParseError,
    ScenecfError,
    ShapeError,
    SizeError,
    StructureError,
)
from .graph import (
    ConceptNode,
    GraphStats,
    LabeledDataset,
    RoleEdge,
    SceneGraph,
    graph_stats,
    load_dataset,
    make_graph,
    save_dataset,
    split_dense,
    split_random,
)
from .taxonomy import CostModel, Taxonomy, load_taxonomy, path_similarity
from .lap import LARGE, solve_lap
from .ged import (
    EditOp,
    EditPath,
    PairwiseMatrix,
    apply_edit_path,
    approx_ged,
    build_bipartite_cost_matrix,
    exact_ged,
    pairwise_ged_matrix,
)
from .kernels import GramMatrix, KernelConfig, gram, gs_kernel, nh_kernel, rw_kernel, sp_kernel, wl_kernel
from .embedding import EmbeddingTable, cosine_rank, load_embeddings, wl_feature_embedding
from .retrieval import GroundTruth, RankTable, backend_ranks, counterfactual, ground_truth_ranks
from .evaluation import MetricReport, binary_hit_at_k, evaluate, ndcg_at_k, precision_at_k
from .estimators import CounterfactualRetriever, GraphEditDistance, GraphKernel
