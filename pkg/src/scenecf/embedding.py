"""Graph embeddings: CSV ingestion, a hashed WL feature embedding, and cosine
nearest-neighbor ranking."""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConceptLookupError, ParseError, ShapeError
from .graph import LabeledDataset
from .kernels import KernelConfig, wl_features

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    vectors: dict  # graph_id -> np.ndarray of shape (dim,)
    source_tag: str = "file"

    def __post_init__(self):
        vecs = {}
        for gid, v in self.vectors.items():
            v = np.asarray(v, dtype=float)
            if v.shape != (self.dim,):
                raise ShapeError(f"vector for {gid!r} has shape {v.shape}, expected ({self.dim},)")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"vector for {gid!r} has non-finite entries")
            vecs[gid] = v
        object.__setattr__(self, "vectors", vecs)

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, gid):
        return gid in self.vectors

    @property
    def ids(self) -> list[str]:
        return list(self.vectors)

    def vector(self, gid: str) -> np.ndarray:
        try:
            return self.vectors[gid]
        except KeyError:
            raise ConceptLookupError(f"no embedding for graph id {gid!r}") from None

    def save(self, path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["graph_id", *(f"v{i}" for i in range(self.dim))])
            for gid, v in self.vectors.items():
                w.writerow([gid, *(repr(float(x)) for x in v)])


def load_embeddings(path, source_tag: str | None = None) -> EmbeddingTable:
    """Read ``graph_id,v0,v1,...`` rows. The width of the first data row sets ``dim``."""
    path = Path(path)
    try:
        fh = path.open(encoding="utf-8", newline="")
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
    vectors = {}
    dim = None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "graph_id":
            raise ParseError(f"{path}:1: expected a header starting with 'graph_id'")
        for row in reader:
            if not row:
                continue
            lineno = reader.line_num
            gid, values = row[0].strip(), row[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise ShapeError(f"{path}:{lineno}: row has no vector entries")
            if len(values) != dim:
                raise ShapeError(f"{path}:{lineno}: {len(values)} entries, expected {dim}")
            try:
                v = np.array([float(x) for x in values])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{path}:{lineno}: non-finite entry for {gid!r}")
            if gid in vectors:
                raise ParseError(f"{path}:{lineno}: duplicate graph id {gid!r}")
            vectors[gid] = v
    if dim is None:
        raise ParseError(f"{path}: no embedding rows")
    return EmbeddingTable(dim, vectors, source_tag or path.stem)


def _bucket(key, dim: int, seed: int) -> tuple[int, float]:
    h = hashlib.blake2b(repr(key).encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little")).digest()
    x = int.from_bytes(h, "little")
    return (x >> 1) % dim, (1.0 if x & 1 else -1.0)


def wl_feature_embedding(
    ds: LabeledDataset, cfg: KernelConfig = KernelConfig("WL"), dim: int = 4096, seed: int = 0
) -> EmbeddingTable:
    """Signed feature hashing of each graph's WL histogram into ``dim`` slots."""
    if cfg.kind != "WL":
        raise ValueError(f"WL feature embedding needs a WL config, got {cfg.kind}")
    if dim < 1:
        raise ValueError("dim must be positive")
    cache = {}
    vectors = {}
    for g in ds.graphs:
        v = np.zeros(dim)
        for key, count in wl_features(g, cfg.wl_iterations).items():
            slot = cache.get(key)
            if slot is None:
                slot = cache[key] = _bucket(key, dim, seed)
            v[slot[0]] += slot[1] * count
        vectors[g.id] = v
    return EmbeddingTable(dim, vectors, f"wl-hash-{dim}")


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = math.sqrt(float(u @ u)), math.sqrt(float(v @ v))
    if nu == 0 or nv == 0:
        return 0.0
    return float(u @ v) / (nu * nv)


def cosine_scores(query_id: str, table: EmbeddingTable, candidates) -> dict:
    q = table.vector(query_id)
    if not q.any():
        log.warning("embedding of %r is the zero vector; all its similarities are 0", query_id)
    scores = {}
    for cid in candidates:
        v = table.vector(cid)
        if not v.any():
            log.warning("embedding of %r is the zero vector; ranked with similarity 0", cid)
        scores[cid] = cosine(q, v)
    return scores


def cosine_rank(query_id: str, table: EmbeddingTable, candidates, k: int) -> list[tuple[str, float]]:
    """Top ``k`` candidates by descending cosine, ties by ascending id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = cosine_scores(query_id, table, candidates)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]
