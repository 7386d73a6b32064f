"""Class-constrained counterfactual retrieval and rank tables.

For a query of class A the candidates are all graphs whose class differs
from A. Any backend (edit-distance matrix, Gram matrix, embedding table)
is reduced to a score per candidate plus a sort direction; ties always fall
back to ascending graph id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .embedding import EmbeddingTable, cosine_scores
from .errors import ConceptLookupError, CoverageError, EligibilityError, ParseError, ShapeError
from .ged import PairwiseMatrix
from .graph import LabeledDataset
from .kernels import GramMatrix

ASCENDING = "ascending"
DESCENDING = "descending"


@dataclass(frozen=True)
class RankTable:
    ranks: dict  # query id -> list of (candidate id, score)
    backend_tag: str
    direction: str = ASCENDING

    def __post_init__(self):
        if self.direction not in (ASCENDING, DESCENDING):
            raise ValueError(f"direction must be {ASCENDING!r} or {DESCENDING!r}")
        object.__setattr__(
            self, "ranks", {q: [(str(c), float(s)) for c, s in lst] for q, lst in self.ranks.items()}
        )

    def __len__(self):
        return len(self.ranks)

    @property
    def queries(self) -> list[str]:
        return list(self.ranks)

    def ids(self, query: str) -> list[str]:
        return [c for c, _ in self.ranks[query]]

    def to_dict(self) -> dict:
        return {
            "header": {"backend_tag": self.backend_tag, "direction": self.direction},
            "ranks": {q: [{"id": c, "score": s} for c, s in lst] for q, lst in self.ranks.items()},
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "RankTable":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            header = doc["header"]
            ranks = {q: [(e["id"], e["score"]) for e in lst] for q, lst in doc["ranks"].items()}
            return cls(ranks, header["backend_tag"], header["direction"])
        except OSError as exc:
            raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"{path}: malformed rank file ({exc})") from exc


@dataclass(frozen=True)
class GroundTruth:
    table: RankTable
    matrix: PairwiseMatrix

    def top(self, query: str, k: int) -> list[str]:
        return self.table.ids(query)[:k]

    def top1(self, query: str) -> str:
        return self.table.ids(query)[0]


def candidates(ds: LabeledDataset, query: str) -> list[str]:
    if query not in ds.labels:
        raise ConceptLookupError(f"unknown graph id {query!r}")
    cls = ds.labels[query]
    return [gid for gid in ds.ids if ds.labels[gid] != cls]


def _sort(scores: dict, direction: str) -> list[tuple[str, float]]:
    sign = 1.0 if direction == ASCENDING else -1.0
    return sorted(scores.items(), key=lambda kv: (sign * kv[1], kv[0]))


def _matrix_index(ds: LabeledDataset, ids, what: str) -> dict:
    index = {gid: i for i, gid in enumerate(ids)}
    missing = [gid for gid in ds.ids if gid not in index]
    if missing:
        raise ConceptLookupError(f"{what} has no entry for graph id(s) {missing[:10]}" + (
            f" and {len(missing) - 10} more" if len(missing) > 10 else ""))
    return index


def _check_matrix(ds: LabeledDataset, matrix: PairwiseMatrix) -> dict:
    if len(matrix.graph_ids) != len(ds):
        raise ShapeError(f"matrix covers {len(matrix.graph_ids)} graphs, dataset has {len(ds)}")
    return _matrix_index(ds, matrix.graph_ids, "edit-distance matrix")


def counterfactual(query: str, ds: LabeledDataset, matrix: PairwiseMatrix) -> tuple[str, float]:
    """Closest graph of a different class; ties go to the smaller id."""
    index = _check_matrix(ds, matrix)
    cands = candidates(ds, query)
    if not cands:
        raise EligibilityError(f"no graph with a class other than {ds.labels[query]!r} for query {query!r}")
    row = matrix.values[index[query]]
    best = min(cands, key=lambda c: (row[index[c]], c))
    return best, float(row[index[best]])


def ground_truth_ranks(ds: LabeledDataset, matrix: PairwiseMatrix) -> GroundTruth:
    index = _check_matrix(ds, matrix)
    ranks = {}
    for q in ds.ids:
        row = matrix.values[index[q]]
        ranks[q] = _sort({c: float(row[index[c]]) for c in candidates(ds, q)}, ASCENDING)
    return GroundTruth(RankTable(ranks, f"ged-{matrix.method}", ASCENDING), matrix)


def backend_ranks(ds: LabeledDataset, backend, k: int | None = None, tag: str | None = None) -> RankTable:
    """Rank the different-class candidates of every query, truncated to ``k``.

    Edit distances sort ascending; kernel and cosine similarities descending.
    """
    if k is not None and k < 1:
        raise ValueError("k must be >= 1")
    if isinstance(backend, PairwiseMatrix):
        index = _matrix_index(ds, backend.graph_ids, "edit-distance matrix")
        direction, default_tag = ASCENDING, f"ged-{backend.method}"

        def score(q, cands):
            row = backend.values[index[q]]
            return {c: float(row[index[c]]) for c in cands}

    elif isinstance(backend, GramMatrix):
        index = _matrix_index(ds, backend.graph_ids, "Gram matrix")
        direction, default_tag = DESCENDING, f"kernel-{backend.config.kind}"

        def score(q, cands):
            row = backend.values[index[q]]
            return {c: float(row[index[c]]) for c in cands}

    elif isinstance(backend, EmbeddingTable):
        _matrix_index(ds, backend.vectors, "embedding table")
        direction, default_tag = DESCENDING, f"embedding-{backend.source_tag}"

        def score(q, cands):
            return cosine_scores(q, backend, cands)

    else:
        raise TypeError(f"unsupported backend type {type(backend).__name__}")
    ranks = {}
    for q in ds.ids:
        ranked = _sort(score(q, candidates(ds, q)), direction)
        ranks[q] = ranked if k is None else ranked[:k]
    return RankTable(ranks, tag or default_tag, direction)


def check_class_exclusion(ds: LabeledDataset, table: RankTable) -> None:
    """Raise if any listed candidate shares its query's class."""
    for q, lst in table.ranks.items():
        for c, _ in lst:
            if ds.labels[c] == ds.labels[q]:
                raise CoverageError(f"candidate {c!r} shares class {ds.labels[q]!r} with query {q!r}")

