"""Graph kernels: Weisfeiler-Lehman, shortest path, neighborhood hash,
random walk and graphlet sampling.

WL, SP and NH read node concepts; RW and GS look at structure only. No kernel
reads edge predicates. Every kernel works on the undirected simple view of a
scene graph (direction, parallel edges and self-loops dropped) except where
noted.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter, deque
from dataclasses import asdict, dataclass
from functools import lru_cache
from itertools import combinations, permutations
from pathlib import Path

import numpy as np

from .errors import DivergenceError, ParseError, ShapeError
from .ged import read_matrix_csv, write_matrix_csv
from .graph import LabeledDataset, SceneGraph

KINDS = ("WL", "SP", "NH", "RW", "GS")
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class KernelConfig:
    kind: str = "WL"
    wl_iterations: int = 3
    nh_iterations: int = 2
    nh_bits: int = 32
    rw_lambda: float | None = None  # None: min(0.01, 0.5 / (d1 * d2))
    gs_graphlet_size: int = 4
    gs_samples: int = 500
    gs_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", str(self.kind).upper())
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}, expected one of {KINDS}")
        if self.wl_iterations < 1:
            raise ValueError("wl_iterations must be >= 1")
        if self.nh_iterations < 0:
            raise ValueError("nh_iterations must be >= 0")
        if self.nh_bits not in (16, 32, 64):
            raise ValueError("nh_bits must be 16, 32 or 64")
        if self.rw_lambda is not None and not self.rw_lambda > 0:
            raise ValueError("rw_lambda must be positive")
        if self.gs_graphlet_size not in (3, 4, 5):
            raise ValueError("gs_graphlet_size must be 3, 4 or 5")
        if self.gs_samples < 1:
            raise ValueError("gs_samples must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def _neighbors(g: SceneGraph) -> list[list[int]]:
    index = {nid: i for i, nid in enumerate(g.node_ids)}
    nb = [set() for _ in g.nodes]
    for e in g.edges:
        s, t = index[e.source], index[e.target]
        if s != t:
            nb[s].add(t)
            nb[t].add(s)
    return [sorted(x) for x in nb]


def _labels(g: SceneGraph) -> list[str]:
    return [n.concept for n in g.nodes]


# ---------------------------------------------------------------- WL


def _wl_relabel(own: str, neighbor_labels) -> str:
    # content-derived compressed label: equal signatures get equal labels in
    # every process, so no shared relabeling table is needed
    sig = own + "\x00" + "\x01".join(sorted(neighbor_labels))
    return hashlib.blake2b(sig.encode("utf-8"), digest_size=12).hexdigest()


def wl_features(g: SceneGraph, iterations: int) -> Counter:
    """Concatenated label histograms of iterations ``0..iterations``."""
    labels = _labels(g)
    nb = _neighbors(g)
    feats = Counter((0, lab) for lab in labels)
    for it in range(1, iterations + 1):
        labels = [_wl_relabel(labels[i], (labels[j] for j in nb[i])) for i in range(len(labels))]
        feats.update((it, lab) for lab in labels)
    return feats


def _dot(a: Counter, b: Counter) -> float:
    if len(a) > len(b):
        a, b = b, a
    return float(sum(v * b[k] for k, v in a.items() if k in b))


def wl_kernel(g1: SceneGraph, g2: SceneGraph, cfg: KernelConfig = KernelConfig("WL")) -> float:
    return _dot(wl_features(g1, cfg.wl_iterations), wl_features(g2, cfg.wl_iterations))


# ---------------------------------------------------------------- SP


def sp_features(g: SceneGraph) -> Counter:
    """Counts of ``(label, label, distance)`` over connected node pairs."""
    labels = _labels(g)
    nb = _neighbors(g)
    feats = Counter()
    n = len(labels)
    for s in range(n):
        dist = {s: 0}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in nb[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        for t, d in dist.items():
            if t > s:
                a, b = labels[s], labels[t]
                feats[(min(a, b), max(a, b), d)] += 1
    return feats


def sp_kernel(g1: SceneGraph, g2: SceneGraph, cfg: KernelConfig = KernelConfig("SP")) -> float:
    return _dot(sp_features(g1), sp_features(g2))


# ---------------------------------------------------------------- NH


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def label_hash(label: str, bits: int = 32, seed: int = 0) -> int:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    h = _splitmix64(int.from_bytes(digest, "little") ^ seed)
    return h & ((1 << bits) - 1)


def _rot1(x: int, bits: int) -> int:
    return ((x << 1) | (x >> (bits - 1))) & ((1 << bits) - 1)


def nh_hashes(g: SceneGraph, iterations: int, bits: int = 32) -> Counter:
    """Multiset of node hashes after ``iterations`` neighborhood-hash rounds."""
    h = [label_hash(lab, bits) for lab in _labels(g)]
    nb = _neighbors(g)
    for _ in range(iterations):
        nxt = []
        for i, hi in enumerate(h):
            acc = _rot1(hi, bits)
            for j in nb[i]:
                acc ^= h[j]
            nxt.append(acc)
        h = nxt
    return Counter(h)


def _tanimoto(a: Counter, b: Counter) -> float:
    common = sum(min(v, b[k]) for k, v in a.items() if k in b)
    total = sum(a.values()) + sum(b.values()) - common
    return common / total if total else 0.0


def nh_kernel(g1: SceneGraph, g2: SceneGraph, cfg: KernelConfig = KernelConfig("NH")) -> float:
    return _tanimoto(nh_hashes(g1, cfg.nh_iterations, cfg.nh_bits), nh_hashes(g2, cfg.nh_iterations, cfg.nh_bits))


# ---------------------------------------------------------------- RW


def adjacency_matrix(g: SceneGraph) -> np.ndarray:
    nb = _neighbors(g)
    A = np.zeros((len(nb), len(nb)))
    for i, js in enumerate(nb):
        A[i, js] = 1.0
    return A


def _max_degree(A: np.ndarray) -> int:
    return int(A.sum(axis=1).max()) if A.size else 0


def default_rw_lambda(d1: int, d2: int) -> float:
    return min(0.01, 0.5 / (d1 * d2)) if d1 * d2 else 0.01


def _check_lambda(lam: float, d1: int, d2: int) -> None:
    if lam * d1 * d2 >= 1:
        raise DivergenceError(
            f"rw_lambda={lam} does not converge for max degrees {d1} and {d2}; need lambda < {1.0 / (d1 * d2):.6g}"
        )


def rw_kernel(g1: SceneGraph, g2: SceneGraph, cfg: KernelConfig = KernelConfig("RW")) -> float:
    """Geometric random-walk kernel on the unlabeled direct product graph,
    counting walks of length >= 1."""
    A1, A2 = adjacency_matrix(g1), adjacency_matrix(g2)
    d1, d2 = _max_degree(A1), _max_degree(A2)
    lam = cfg.rw_lambda if cfg.rw_lambda is not None else default_rw_lambda(d1, d2)
    _check_lambda(lam, d1, d2)
    Ax = np.kron(A1, A2)
    n = Ax.shape[0]
    ones = np.ones(n)
    x = np.linalg.solve(np.eye(n) - lam * Ax, ones)
    return float(ones @ x - n)


def _rw_spectral(e1, e2, lam: float) -> float:
    # same quantity as the linear solve, via the eigenbasis of each factor
    (w1, p1), (w2, p2) = e1, e2
    denom = 1.0 - lam * np.outer(w1, w2)
    return float(np.sum(np.outer(p1, p2) / denom) - p1.sum() * p2.sum())


def _rw_eig(A: np.ndarray):
    w, U = np.linalg.eigh(A)
    p = (U.T @ np.ones(A.shape[0])) ** 2
    return w, p


# ---------------------------------------------------------------- GS


@lru_cache(maxsize=None)
def _canonical_table(k: int) -> np.ndarray:
    """Maps every adjacency bitmask on ``k`` nodes to its isomorphism-class
    representative (the smallest mask over all relabelings)."""
    pairs = list(combinations(range(k), 2))
    bit = {p: i for i, p in enumerate(pairs)}
    perms = list(permutations(range(k)))
    size = 1 << len(pairs)
    table = np.empty(size, dtype=np.int64)
    for mask in range(size):
        best = mask
        for perm in perms:
            m = 0
            for (a, b), i in bit.items():
                if mask >> i & 1:
                    x, y = perm[a], perm[b]
                    m |= 1 << bit[(x, y) if x < y else (y, x)]
            best = min(best, m)
        table[mask] = best
    return table


def graphlet_distribution(g: SceneGraph, k: int = 4, samples: int = 500, seed: int = 0) -> dict:
    """Normalized frequencies of induced ``k``-node graphlet classes.

    Exhaustive when there are at most ``samples`` node subsets, otherwise
    estimated from ``samples`` uniform draws. Graphs with fewer than ``k``
    nodes put all mass on the class ``"empty"``.
    """
    n = len(g.nodes)
    if n < k:
        return {"empty": 1.0}
    A = adjacency_matrix(g).astype(bool)
    table = _canonical_table(k)
    pairs = list(combinations(range(k), 2))
    if math.comb(n, k) <= samples:
        subsets = combinations(range(n), k)
        total = math.comb(n, k)
    else:
        rng = np.random.default_rng(seed)
        subsets = (np.sort(rng.choice(n, size=k, replace=False)) for _ in range(samples))
        total = samples
    counts = Counter()
    for nodes in subsets:
        mask = 0
        for i, (a, b) in enumerate(pairs):
            if A[nodes[a], nodes[b]]:
                mask |= 1 << i
        counts[int(table[mask])] += 1
    return {cls: c / total for cls, c in sorted(counts.items())}


def gs_kernel(g1: SceneGraph, g2: SceneGraph, cfg: KernelConfig = KernelConfig("GS")) -> float:
    args = (cfg.gs_graphlet_size, cfg.gs_samples, cfg.gs_seed)
    p, q = graphlet_distribution(g1, *args), graphlet_distribution(g2, *args)
    return float(sum(v * q.get(c, 0.0) for c, v in p.items()))


_PAIR_KERNELS = {"WL": wl_kernel, "SP": sp_kernel, "NH": nh_kernel, "RW": rw_kernel, "GS": gs_kernel}


def kernel(g1: SceneGraph, g2: SceneGraph, cfg: KernelConfig) -> float:
    return _PAIR_KERNELS[cfg.kind](g1, g2, cfg)


# ---------------------------------------------------------------- Gram matrices


@dataclass(frozen=True)
class GramMatrix:
    values: np.ndarray
    normalized: bool
    graph_ids: tuple
    config: KernelConfig

    def __post_init__(self):
        object.__setattr__(self, "graph_ids", tuple(self.graph_ids))
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.graph_ids), len(self.graph_ids)):
            raise ShapeError(f"Gram shape {v.shape} does not match {len(self.graph_ids)} ids")
        object.__setattr__(self, "values", v)

    def index(self) -> dict:
        return {gid: i for i, gid in enumerate(self.graph_ids)}

    def save(self, path) -> Path:
        """Write the matrix CSV plus a ``<path>.config.json`` sidecar."""
        path = Path(path)
        write_matrix_csv(path, self.values, self.graph_ids)
        sidecar = path.with_name(path.name + ".config.json")
        record = {"kernel": self.config.to_dict(), "normalized": self.normalized}
        sidecar.write_text(json.dumps(record, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return sidecar

    @classmethod
    def load(cls, path) -> "GramMatrix":
        path = Path(path)
        values, ids = read_matrix_csv(path)
        sidecar = path.with_name(path.name + ".config.json")
        try:
            record = json.loads(sidecar.read_text(encoding="utf-8"))
            cfg = KernelConfig(**record["kernel"])
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"{sidecar}: missing or malformed kernel config ({exc})") from exc
        return cls(values, bool(record.get("normalized", False)), ids, cfg)


def _feature_matrix(feats: list[Counter]) -> np.ndarray:
    keys = sorted({k for f in feats for k in f}, key=repr)
    col = {k: i for i, k in enumerate(keys)}
    F = np.zeros((len(feats), len(keys)))
    for r, f in enumerate(feats):
        for k, v in f.items():
            F[r, col[k]] = v
    return F


def _raw_gram(graphs: list[SceneGraph], cfg: KernelConfig) -> np.ndarray:
    n = len(graphs)
    if cfg.kind in ("WL", "SP", "GS"):
        if cfg.kind == "WL":
            feats = [wl_features(g, cfg.wl_iterations) for g in graphs]
        elif cfg.kind == "SP":
            feats = [sp_features(g) for g in graphs]
        else:
            feats = [
                Counter(graphlet_distribution(g, cfg.gs_graphlet_size, cfg.gs_samples, cfg.gs_seed)) for g in graphs
            ]
        F = _feature_matrix(feats)
        return F @ F.T
    K = np.zeros((n, n))
    if cfg.kind == "NH":
        hashes = [nh_hashes(g, cfg.nh_iterations, cfg.nh_bits) for g in graphs]
        for i in range(n):
            for j in range(i, n):
                K[i, j] = K[j, i] = _tanimoto(hashes[i], hashes[j])
        return K
    # RW: one lambda for the whole dataset keeps the matrix a valid kernel
    adj = [adjacency_matrix(g) for g in graphs]
    dmax = max(_max_degree(A) for A in adj)
    lam = cfg.rw_lambda if cfg.rw_lambda is not None else default_rw_lambda(dmax, dmax)
    _check_lambda(lam, dmax, dmax)
    eig = [_rw_eig(A) for A in adj]
    for i in range(n):
        for j in range(i, n):
            K[i, j] = K[j, i] = _rw_spectral(eig[i], eig[j], lam)
    return K


def normalize_gram(K: np.ndarray) -> np.ndarray:
    """``k(i,j) / sqrt(k(i,i) k(j,j))``; rows with zero self-similarity become 0
    off the diagonal, and the diagonal is 1."""
    d = np.sqrt(np.clip(np.diag(K), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = K / np.outer(d, d)
    out[~np.isfinite(out)] = 0.0
    out[np.outer(d, d) == 0] = 0.0
    out = np.clip(out, -1.0, 1.0)
    np.fill_diagonal(out, 1.0)
    return out


def gram(ds: LabeledDataset, cfg: KernelConfig, normalize: bool = True) -> GramMatrix:
    graphs = list(ds.graphs)
    K = _raw_gram(graphs, cfg)
    K = (K + K.T) / 2
    if cfg.kind == "RW" and cfg.rw_lambda is None:
        adj_max = max(_max_degree(adjacency_matrix(g)) for g in graphs)
        cfg = KernelConfig(**{**cfg.to_dict(), "rw_lambda": default_rw_lambda(adj_max, adj_max)})
    if normalize:
        K = normalize_gram(K)
    return GramMatrix(K, normalize, tuple(g.id for g in graphs), cfg)
