"""Graph edit distance between scene graphs.

Both solvers score a node mapping the same way: node costs come from the
mapping itself, and every ordered pair of mapped nodes matches its parallel
edges optimally (replace, delete, insert). Edges that touch a deleted or
inserted node are deleted or inserted with it.

``approx_ged`` finds the mapping with a single linear assignment over an
``(n1+n2)``-square matrix, optionally polished by greedy swaps; ``exact_ged``
searches all mappings by branch and bound.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConceptLookupError, ParseError, ScenecfError, ShapeError, SizeError
from .graph import LabeledDataset, SceneGraph
from .lap import LARGE, lap_total, solve_lap, square_edit_matrix
from .taxonomy import CostModel

log = logging.getLogger(__name__)

TOL = 1e-9
DEFAULT_NODE_BUDGET = 10
EDGE_WEIGHT = 0.5


@dataclass(frozen=True)
class EditOp:
    kind: str  # "replace" | "delete" | "insert"
    target: str  # "node" | "edge"
    old: tuple | None  # (node_id, concept) or (src, dst, predicate) in the source graph
    new: tuple | None  # same, in the target graph
    cost: float

    def __post_init__(self):
        if self.kind not in ("replace", "delete", "insert") or self.target not in ("node", "edge"):
            raise ValueError(f"bad edit op {self.kind}/{self.target}")
        if (self.old is None) != (self.kind == "insert") or (self.new is None) != (self.kind == "delete"):
            raise ValueError(f"{self.kind} op has inconsistent endpoints")

    def to_dict(self) -> dict:
        def item(x):
            if x is None:
                return None
            if self.target == "node":
                return {"id": x[0], "concept": x[1]}
            return {"src": x[0], "dst": x[1], "predicate": x[2]}

        return {"kind": self.kind, "target": self.target, "from": item(self.old), "to": item(self.new), "cost": self.cost}


@dataclass(frozen=True)
class EditPath:
    """Edit operations turning one graph into another.

    ``node_map`` sends every source node id to its target node id, or to
    ``None`` when the node is deleted. Zero-cost identities are not listed as
    operations; the map is what lets them be replayed.
    """

    ops: tuple[EditOp, ...]
    node_map: dict = field(default_factory=dict)

    @property
    def total_cost(self) -> float:
        return sum((op.cost for op in self.ops), 0.0)

    def __len__(self):
        return len(self.ops)

    def to_dict(self) -> dict:
        return {"ops": [op.to_dict() for op in self.ops], "total_cost": self.total_cost}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def apply_edit_path(g1: SceneGraph, path: EditPath) -> tuple[dict, list]:
    """Replay ``path`` on ``g1``.

    Returns ``(nodes, edges)`` in target-graph ids: a ``node_id -> concept``
    map and a sorted list of ``(src, dst, predicate)`` triples.
    """
    nodes = {n.node_id: n.concept for n in g1.nodes}
    edges: list[tuple] = [(e.source, e.target, e.predicate) for e in g1.edges]
    added_nodes, added_edges = {}, []
    renamed = dict(path.node_map)
    for op in path.ops:
        if op.target == "node":
            if op.kind == "delete":
                del nodes[op.old[0]]
                renamed[op.old[0]] = None
            elif op.kind == "replace":
                nodes[op.old[0]] = op.new[1]
                renamed[op.old[0]] = op.new[0]
            else:
                added_nodes[op.new[0]] = op.new[1]
        else:
            if op.kind in ("delete", "replace"):
                edges.remove(op.old)
            if op.kind in ("insert", "replace"):
                added_edges.append(op.new)
    out_nodes = {}
    for nid, concept in nodes.items():
        out_nodes[renamed.get(nid, nid)] = concept
    out_nodes.update(added_nodes)
    out_edges = [(renamed[s], renamed[t], p) for s, t, p in edges] + added_edges
    return out_nodes, sorted(out_edges)


# ---------------------------------------------------------------- indexed graphs


class _Indexed:
    """Integer-indexed view of a scene graph used by the solvers."""

    __slots__ = ("graph", "n", "ids", "concepts", "groups", "group_edges", "partners", "out_preds", "in_preds")

    def __init__(self, g: SceneGraph):
        self.graph = g
        self.ids = g.node_ids
        pos = {nid: i for i, nid in enumerate(self.ids)}
        self.n = len(self.ids)
        self.concepts = [n.concept for n in g.nodes]
        group_edges: dict[tuple[int, int], list] = {}
        out_preds = [[] for _ in range(self.n)]
        in_preds = [[] for _ in range(self.n)]
        partners = [set() for _ in range(self.n)]
        for e in g.edges:
            a, b = pos[e.source], pos[e.target]
            group_edges.setdefault((a, b), []).append((e.source, e.target, e.predicate))
            out_preds[a].append(e.predicate)
            in_preds[b].append(e.predicate)
            partners[a].add(b)
            partners[b].add(a)
        self.group_edges = group_edges
        self.groups = {k: tuple(sorted(p for _, _, p in v)) for k, v in group_edges.items()}
        self.partners = [tuple(sorted(p)) for p in partners]
        self.out_preds = [tuple(sorted(p)) for p in out_preds]
        self.in_preds = [tuple(sorted(p)) for p in in_preds]


def _validate_labels(ix: _Indexed, cm: CostModel):
    tax = cm.taxonomy
    for c in ix.concepts:
        if c not in tax:
            raise ConceptLookupError(f"graph {ix.graph.id!r}: concept {c!r} not in taxonomy")
    for preds in ix.groups.values():
        for p in preds:
            if p not in tax:
                raise ConceptLookupError(f"graph {ix.graph.id!r}: predicate {p!r} not in taxonomy")


class _PairCosts:
    """Cost tables for one (source, target) graph pair."""

    def __init__(self, a: _Indexed, b: _Indexed, cm: CostModel):
        self.a, self.b, self.cm = a, b, cm
        sub = cm.substitution_cost
        self.node_sub = np.array([[sub(x, y) for y in b.concepts] for x in a.concepts]).reshape(a.n, b.n)
        self.node_del = np.array([cm.deletion_cost(x) for x in a.concepts])
        self.node_ins = np.array([cm.insertion_cost(y) for y in b.concepts])


def build_bipartite_cost_matrix(g1: SceneGraph, g2: SceneGraph, cm: CostModel) -> np.ndarray:
    """Square assignment matrix of size ``n1 + n2``.

    A substitution cell adds half the optimal matching cost of the two nodes'
    incident edges (outgoing with outgoing, incoming with incoming), since each
    edge is seen from both of its endpoints.
    """
    a, b = _Indexed(g1), _Indexed(g2)
    _validate_labels(a, cm)
    _validate_labels(b, cm)
    return _bipartite_matrix(_PairCosts(a, b, cm))


def _bipartite_matrix(pc: _PairCosts) -> np.ndarray:
    a, b, cm = pc.a, pc.b, pc.cm
    mc = cm.multiset_cost
    edge = np.empty((a.n, b.n))
    for i in range(a.n):
        oa, ia = a.out_preds[i], a.in_preds[i]
        row = edge[i]
        for j in range(b.n):
            row[j] = mc(oa, b.out_preds[j]) + mc(ia, b.in_preds[j])
    dl = np.array([mc(a.out_preds[i], ()) + mc(a.in_preds[i], ()) for i in range(a.n)])
    ins = np.array([mc((), b.out_preds[j]) + mc((), b.in_preds[j]) for j in range(b.n)])
    return square_edit_matrix(
        pc.node_sub + EDGE_WEIGHT * edge,
        pc.node_del + EDGE_WEIGHT * dl,
        pc.node_ins + EDGE_WEIGHT * ins,
        large=LARGE,
    )


# ---------------------------------------------------------------- mapping cost


def _mapping_cost(pc: _PairCosts, phi) -> float:
    a, b = pc.a, pc.b
    psi = [-1] * b.n
    total = 0.0
    for u, t in enumerate(phi):
        if t >= 0:
            psi[t] = u
            total += pc.node_sub[u, t]
        else:
            total += pc.node_del[u]
    for v in range(b.n):
        if psi[v] < 0:
            total += pc.node_ins[v]
    mc = pc.cm.multiset_cost
    for (s, d), preds in a.groups.items():
        if phi[s] >= 0 and phi[d] >= 0:
            total += mc(preds, b.groups.get((phi[s], phi[d]), ()))
        else:
            total += mc(preds, ())
    for (x, y), preds in b.groups.items():
        if psi[x] < 0 or psi[y] < 0 or (psi[x], psi[y]) not in a.groups:
            total += mc((), preds)
    return total


def _match_edges(left: list, right: list, cm: CostModel):
    """Optimal pairing of two parallel-edge lists; yields (l or None, r or None, cost)."""
    if not right:
        return [(e, None, cm.deletion_cost(e[2])) for e in left]
    if not left:
        return [(None, e, cm.insertion_cost(e[2])) for e in right]
    sub = [[cm.substitution_cost(l[2], r[2]) for r in right] for l in left]
    mat = square_edit_matrix(sub, [cm.deletion_cost(l[2]) for l in left], [cm.insertion_cost(r[2]) for r in right])
    assign, _ = solve_lap(mat)
    n, m = len(left), len(right)
    out = []
    for i in range(n):
        j = assign[i]
        out.append((left[i], right[j], sub[i][j]) if j < m else (left[i], None, cm.deletion_cost(left[i][2])))
    for i in range(n, n + m):
        j = assign[i]
        if j < m:
            out.append((None, right[j], cm.insertion_cost(right[j][2])))
    return out


def _edit_path(pc: _PairCosts, phi) -> EditPath:
    a, b, cm = pc.a, pc.b, pc.cm
    psi = [-1] * b.n
    node_map = {}
    ops = []
    for u, t in enumerate(phi):
        uid, uc = a.ids[u], a.concepts[u]
        if t >= 0:
            psi[t] = u
            node_map[uid] = b.ids[t]
            if uc != b.concepts[t]:
                ops.append(EditOp("replace", "node", (uid, uc), (b.ids[t], b.concepts[t]), float(pc.node_sub[u, t])))
        else:
            node_map[uid] = None
            ops.append(EditOp("delete", "node", (uid, uc), None, float(pc.node_del[u])))
    for v in range(b.n):
        if psi[v] < 0:
            ops.append(EditOp("insert", "node", None, (b.ids[v], b.concepts[v]), float(pc.node_ins[v])))

    # decide every edge's fate group by group, then emit in file order
    fate = {}
    ins_count = Counter()
    for (s, d), edges in a.group_edges.items():
        if phi[s] >= 0 and phi[d] >= 0:
            right = b.group_edges.get((phi[s], phi[d]), [])
            for l, r, c in _match_edges(edges, right, cm):
                if l is None:
                    ins_count[r] += 1
                else:
                    fate.setdefault(l, []).append((r, c))
        else:
            for l in edges:
                fate.setdefault(l, []).append((None, cm.deletion_cost(l[2])))
    for (x, y), edges in b.group_edges.items():
        if psi[x] < 0 or psi[y] < 0 or (psi[x], psi[y]) not in a.group_edges:
            ins_count.update(edges)
    for e in a.graph.edges:
        key = (e.source, e.target, e.predicate)
        r, c = fate[key].pop()
        if r is None:
            ops.append(EditOp("delete", "edge", key, None, c))
        elif r[2] != key[2]:
            ops.append(EditOp("replace", "edge", key, r, c))
    for e in b.graph.edges:
        key = (e.source, e.target, e.predicate)
        if ins_count[key] > 0:
            ins_count[key] -= 1
            ops.append(EditOp("insert", "edge", None, key, cm.insertion_cost(key[2])))
    return EditPath(tuple(ops), node_map)


# ---------------------------------------------------------------- approximate GED


def _local_cost(pc: _PairCosts, phi, psi, S, T) -> float:
    """Part of the mapping cost that depends on source nodes ``S`` and target nodes ``T``.

    Valid as a difference measure when the preimages of ``T`` lie in ``S``
    both before and after a move.
    """
    a, b = pc.a, pc.b
    mc = pc.cm.multiset_cost
    cost = 0.0
    for u in S:
        t = phi[u]
        cost += pc.node_sub[u, t] if t >= 0 else pc.node_del[u]
    pairs = set()
    for u in S:
        for w in a.partners[u]:
            pairs.add((u, w))
            pairs.add((w, u))
    ins_pairs = set()
    for x in T:
        px = psi[x]
        if px < 0:
            cost += pc.node_ins[x]
        for y in b.partners[x]:
            py = psi[y]
            if px >= 0 and py >= 0:
                pairs.add((px, py))
                pairs.add((py, px))
            else:
                ins_pairs.add((x, y))
                ins_pairs.add((y, x))
    for s, d in pairs:
        g1 = a.groups.get((s, d), ())
        ps, pd = phi[s], phi[d]
        if ps >= 0 and pd >= 0:
            g2 = b.groups.get((ps, pd), ())
            if g1 or g2:
                cost += mc(g1, g2)
        elif g1:
            cost += mc(g1, ())
    for key in ins_pairs:
        g2 = b.groups.get(key)
        if g2:
            cost += mc((), g2)
    return cost


def _swap_candidates(C: np.ndarray, n1: int, n2: int, phi, theta: float):
    """Moves whose change in assignment-matrix cost is within ``theta`` of the
    replaced cells, cheapest first.

    A move is either a swap of two source nodes' images or a reassignment of
    one source node to a free target node or to deletion.
    """
    if n1 == 0:
        return []
    P = np.asarray(phi)
    rows = np.arange(n1)
    cdel = C[rows, n2 + rows]
    cins = C[n1 + np.arange(n2), np.arange(n2)]
    cur = np.where(P >= 0, C[rows, np.maximum(P, 0)], cdel)
    # M[u, w]: cost of giving u the image of w
    M = np.where(P[None, :] >= 0, C[:n1, np.maximum(P, 0)], cdel[:, None])
    new = M + M.T
    old = cur[:, None] + cur[None, :]
    delta = new - old
    ok = np.triu(delta <= theta * old + 1e-9, 1) & ~((P[:, None] < 0) & (P[None, :] < 0))
    out = [(float(delta[u, w]), u, int(P[w])) for u, w in zip(*np.nonzero(ok))]
    used = np.zeros(n2, dtype=bool)
    used[P[P >= 0]] = True
    free = np.flatnonzero(~used)
    freed = np.where(P >= 0, cins[np.maximum(P, 0)], 0.0)
    if free.size:
        new = C[:n1][:, free] + freed[:, None]
        old = cur[:, None] + cins[free][None, :]
        delta = new - old
        for u, k in zip(*np.nonzero(delta <= theta * old + 1e-9)):
            out.append((float(delta[u, k]), int(u), int(free[k])))
    for u in np.flatnonzero(P >= 0):
        d = cdel[u] + freed[u] - cur[u]
        if d <= theta * cur[u] + 1e-9:
            out.append((float(d), int(u), -1))
    out.sort()
    return out


def _refine(pc: _PairCosts, C: np.ndarray, phi, theta: float = 0.1, max_moves: int | None = None):
    """Greedy swap polishing of an assignment.

    Candidate moves come from :func:`_swap_candidates`; each is scored on the
    true edit cost and kept only if it lowers it. Stops at the first sweep
    without improvement or after ``max_moves`` exact evaluations.
    """
    a, b = pc.a, pc.b
    phi = list(phi)
    psi = [-1] * b.n
    for u, t in enumerate(phi):
        if t >= 0:
            psi[t] = u
    if max_moves is None:
        max_moves = 4 * (a.n + b.n)
    tried = set()
    evaluations = 0
    improved = True
    while improved and evaluations < max_moves:
        improved = False
        for _, u, t in _swap_candidates(C, a.n, b.n, phi, theta):
            cur = phi[u]
            key = (tuple(phi), u, t)
            if t == cur or key in tried:
                continue
            tried.add(key)
            w = psi[t] if t >= 0 else -1
            S = (u, w) if w >= 0 else (u,)
            T = tuple(x for x in (cur, t) if x >= 0)
            evaluations += 1
            before = _local_cost(pc, phi, psi, S, T)
            phi[u] = t
            if t >= 0:
                psi[t] = u
            if w >= 0:
                phi[w] = cur
                if cur >= 0:
                    psi[cur] = w
            elif cur >= 0:
                psi[cur] = -1
            after = _local_cost(pc, phi, psi, S, T)
            if after < before - 1e-12:
                improved = True
                break
            phi[u] = cur
            if cur >= 0:
                psi[cur] = u
            if w >= 0:
                phi[w] = t
                psi[t] = w
            elif t >= 0:
                psi[t] = -1
            if evaluations >= max_moves:
                break
    return phi


def _approx_indexed(a: _Indexed, b: _Indexed, cm: CostModel, refine: bool = True):
    pc = _PairCosts(a, b, cm)
    C = _bipartite_matrix(pc)
    assign, _ = solve_lap(C)
    phi = [int(j) if j < b.n else -1 for j in assign[: a.n]]
    if refine:
        phi = _refine(pc, C, phi)
    return pc, phi


def approx_ged(g1: SceneGraph, g2: SceneGraph, cm: CostModel, refine: bool = True) -> tuple[float, EditPath]:
    """Upper bound on the edit distance from one linear assignment.

    The node mapping is read off the assignment of
    :func:`build_bipartite_cost_matrix`; with ``refine`` it is then improved by
    greedy pairwise swaps, which never raises the cost. Edge edits follow from
    the mapping. Returns ``(cost, path)`` with ``cost == path.total_cost``.
    """
    a, b = _Indexed(g1), _Indexed(g2)
    _validate_labels(a, cm)
    _validate_labels(b, cm)
    pc, phi = _approx_indexed(a, b, cm, refine)
    path = _edit_path(pc, phi)
    return path.total_cost, path


# ---------------------------------------------------------------- exact GED


def _exact_indexed(a: _Indexed, b: _Indexed, cm: CostModel):
    pc = _PairCosts(a, b, cm)
    C = _bipartite_matrix(pc)
    assign, _ = solve_lap(C)
    phi0 = _refine(pc, C, [int(j) if j < b.n else -1 for j in assign[: a.n]])
    best_cost = _mapping_cost(pc, phi0)
    best_phi = list(phi0)
    n1, n2 = a.n, b.n
    S, D, I = pc.node_sub, pc.node_del, pc.node_ins
    mc = cm.multiset_cost
    g1s, g2s = a.groups, b.groups
    partners1 = [set(p) for p in a.partners]
    partners2 = b.partners
    out1, in1 = _adjacency(a)
    out2, in2 = _adjacency(b)

    def pair_cost(u, x, tu, tx):
        # edges between u and x in both directions, given their images
        c = 0.0
        for s, d, ts, td in ((u, x, tu, tx), (x, u, tx, tu)):
            g1 = g1s.get((s, d), ())
            if ts >= 0 and td >= 0:
                g2 = g2s.get((ts, td), ())
                if g1 or g2:
                    c += mc(g1, g2)
            elif g1:
                c += mc(g1, ())
        return c

    def loop_cost(u, t):
        g1 = g1s.get((u, u), ())
        g2 = g2s.get((t, t), ()) if t >= 0 else ()
        return mc(g1, g2) if (g1 or g2) else 0.0

    order = sorted(range(n1), key=lambda u: -len(a.partners[u]))
    phi = [-1] * n1
    used = [False] * n2
    alive = [True] * n1
    # inc[u, t]: edge cost between u and the nodes mapped so far if u goes to t
    # (last column: u deleted); insinc[t]: the same for an inserted t
    inc = np.zeros((n1, n2 + 1))
    insinc = np.zeros(n2)

    def completion():
        c = 0.0
        for v in range(n2):
            if not used[v]:
                c += I[v]
        for (x, y), g2 in g2s.items():
            if not used[x] or not used[y]:
                c += mc((), g2)
        return c

    def bound(rest, free):
        # edges to mapped nodes are exact, edges among the unmapped ones are
        # shared half and half between their endpoints
        r, f = len(rest), len(free)
        if r + f == 0:
            return 0.0
        out_r = [tuple(sorted(p for w, p in out1[u] if alive[w])) for u in rest]
        in_r = [tuple(sorted(p for w, p in in1[u] if alive[w])) for u in rest]
        out_f = [tuple(sorted(p for w, p in out2[t] if not used[w])) for t in free]
        in_f = [tuple(sorted(p for w, p in in2[t] if not used[w])) for t in free]
        M = np.zeros((r + f, r + f))
        M[:r, f:] = LARGE
        M[r:, :f] = LARGE
        for i, u in enumerate(rest):
            row = M[i]
            for j, t in enumerate(free):
                row[j] = S[u, t] + inc[u, t] + EDGE_WEIGHT * (mc(out_r[i], out_f[j]) + mc(in_r[i], in_f[j]))
            row[f + i] = D[u] + inc[u, n2] + EDGE_WEIGHT * (mc(out_r[i], ()) + mc(in_r[i], ()))
        for j, t in enumerate(free):
            M[r + j, j] = I[t] + insinc[t] + EDGE_WEIGHT * (mc((), out_f[j]) + mc((), in_f[j]))
        return lap_total(M)

    def search(k, g):
        nonlocal best_cost, best_phi, inc, insinc
        if k == n1:
            total = g + completion()
            if total < best_cost - 1e-12:
                best_cost, best_phi = total, list(phi)
            return
        u = order[k]
        free = [v for v in range(n2) if not used[v]]
        options = [(S[u, t] + inc[u, t] + loop_cost(u, t), t) for t in free]
        options.append((D[u] + inc[u, n2] + loop_cost(u, -1), -1))
        options.sort(key=lambda o: (o[0], o[1] < 0, o[1]))
        alive[u] = False
        rest = order[k + 1 :]
        for step, t in options:
            g_next = g + step
            if g_next >= best_cost - 1e-12:
                break
            phi[u] = t
            if t >= 0:
                used[t] = True
            saved = inc.copy(), insinc.copy()
            free_after = [v for v in free if v != t]
            for w in rest:
                if w in partners1[u]:
                    cols = free_after + [-1]
                elif t >= 0:
                    cols = [x for x in partners2[t] if not used[x]]
                else:
                    continue
                for x in cols:
                    inc[w, x if x >= 0 else n2] += pair_cost(w, u, x, t)
            if t >= 0:
                for x in partners2[t]:
                    if not used[x]:
                        insinc[x] += mc((), g2s.get((x, t), ())) + mc((), g2s.get((t, x), ()))
            if g_next + bound(rest, free_after) < best_cost - 1e-12:
                search(k + 1, g_next)
            inc, insinc = saved
            if t >= 0:
                used[t] = False
            phi[u] = -1
        alive[u] = True

    search(0, 0.0)
    return pc, best_phi


def _adjacency(ix: _Indexed):
    out = [[] for _ in range(ix.n)]
    inc = [[] for _ in range(ix.n)]
    for (s, d), preds in ix.groups.items():
        for p in preds:
            out[s].append((d, p))
            inc[d].append((s, p))
    return out, inc


def exact_ged(
    g1: SceneGraph, g2: SceneGraph, cm: CostModel, node_budget: int = DEFAULT_NODE_BUDGET
) -> tuple[float, EditPath]:
    """Exact edit distance by depth-first branch and bound.

    The refined bipartite solution seeds the incumbent. A partial mapping is
    pruned when its cost plus a lower bound for the rest reaches the
    incumbent. The bound is an optimal assignment of the unmapped nodes in
    which edges towards already mapped nodes are costed exactly and edges
    among unmapped nodes at half weight per endpoint, so it never overcounts.
    """
    size = max(len(g1), len(g2))
    if size > node_budget:
        raise SizeError(
            f"graphs {g1.id!r}/{g2.id!r} have {size} nodes, above the exact budget of {node_budget}; use approx_ged"
        )
    a, b = _Indexed(g1), _Indexed(g2)
    _validate_labels(a, cm)
    _validate_labels(b, cm)
    pc, phi = _exact_indexed(a, b, cm)
    path = _edit_path(pc, phi)
    return path.total_cost, path


def ged(g1, g2, cm, method: str = "approx", node_budget: int = DEFAULT_NODE_BUDGET, refine: bool = True):
    if method == "exact":
        return exact_ged(g1, g2, cm, node_budget)
    if method == "approx":
        return approx_ged(g1, g2, cm, refine=refine)
    raise ValueError(f"unknown GED method {method!r}")


# ---------------------------------------------------------------- pairwise matrix


@dataclass(frozen=True)
class PairwiseMatrix:
    """Edit distances, rows and columns in dataset order."""

    values: np.ndarray
    graph_ids: tuple
    method: str = "approx"

    def __post_init__(self):
        object.__setattr__(self, "graph_ids", tuple(self.graph_ids))
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.graph_ids), len(self.graph_ids)):
            raise ShapeError(f"matrix shape {v.shape} does not match {len(self.graph_ids)} ids")
        object.__setattr__(self, "values", v)

    def index(self) -> dict:
        return {gid: i for i, gid in enumerate(self.graph_ids)}

    def save(self, path) -> None:
        path = Path(path)
        if path.suffix == ".npz":
            np.savez(path, values=self.values, graph_ids=np.array(self.graph_ids), method=np.array(self.method))
            return
        write_matrix_csv(path, self.values, self.graph_ids)

    @classmethod
    def load(cls, path, method: str = "approx") -> "PairwiseMatrix":
        path = Path(path)
        if path.suffix == ".npz":
            with np.load(path) as z:
                return cls(z["values"], tuple(str(x) for x in z["graph_ids"]), str(z["method"]))
        values, ids = read_matrix_csv(path)
        return cls(values, ids, method)


def write_matrix_csv(path, values, ids) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["graph_id", *ids])
        for gid, row in zip(ids, values):
            w.writerow([gid, *(repr(float(x)) for x in row)])


def read_matrix_csv(path):
    path = Path(path)
    try:
        with path.open(encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
    if not rows or rows[0][:1] != ["graph_id"]:
        raise ParseError(f"{path}:1: expected a header starting with 'graph_id'")
    ids = tuple(rows[0][1:])
    body = [r for r in rows[1:] if r]
    if len(body) != len(ids):
        raise ShapeError(f"{path}: {len(body)} rows for {len(ids)} columns")
    values = np.empty((len(ids), len(ids)))
    for i, row in enumerate(body):
        if row[0] != ids[i] or len(row) != len(ids) + 1:
            raise ParseError(f"{path}:{i + 2}: row does not match header order or width")
        try:
            values[i] = [float(x) for x in row[1:]]
        except ValueError as exc:
            raise ParseError(f"{path}:{i + 2}: {exc}") from exc
    return values, ids


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        env = os.environ.get("SCENECF_WORKERS")
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


_STATE = {}


def _init_worker(indexed, cm, method, node_budget, refine):
    _STATE.update(indexed=indexed, cm=cm, method=method, node_budget=node_budget, refine=refine)


def _pair_value(i, j):
    st = _STATE
    a, b, cm = st["indexed"][i], st["indexed"][j], st["cm"]
    if st["method"] == "exact":
        if max(a.n, b.n) > st["node_budget"]:
            raise SizeError(f"graph pair ({a.graph.id!r}, {b.graph.id!r}) exceeds the exact node budget")
        pc, phi = _exact_indexed(a, b, cm)
    else:
        pc, phi = _approx_indexed(a, b, cm, st["refine"])
    # summed over edit operations, exactly as the single-pair functions report it
    return _edit_path(pc, phi).total_cost


def _pair_chunk(pairs):
    out = []
    for i, j in pairs:
        try:
            out.append((i, j, _pair_value(i, j)))
        except ScenecfError as exc:
            a, b = _STATE["indexed"][i].graph.id, _STATE["indexed"][j].graph.id
            raise type(exc)(f"pair ({a!r}, {b!r}): {exc}") from exc
    return out


def pairwise_ged_matrix(
    ds: LabeledDataset,
    cm: CostModel,
    method: str = "approx",
    workers: int | None = None,
    directional: bool = False,
    node_budget: int = DEFAULT_NODE_BUDGET,
    refine: bool = True,
    chunk_size: int = 256,
) -> PairwiseMatrix:
    """All-pairs edit distances over a dataset.

    The upper triangle is computed and mirrored; ``directional`` computes both
    triangles independently instead. Results do not depend on ``workers``.
    """
    if method not in ("exact", "approx"):
        raise ValueError(f"unknown GED method {method!r}")
    graphs = list(ds.graphs)
    if method == "exact":
        too_big = [g.id for g in graphs if len(g) > node_budget]
        if too_big:
            raise SizeError(f"graphs above the exact node budget {node_budget}: {too_big[:5]}; use approx")
    indexed = [_Indexed(g) for g in graphs]
    for ix in indexed:
        _validate_labels(ix, cm)
    n = len(graphs)
    pairs = [(i, j) for i in range(n) for j in range(n) if (i < j or (directional and i != j))]
    chunks = [pairs[k : k + chunk_size] for k in range(0, len(pairs), chunk_size)]
    workers = resolve_workers(workers)
    values = np.zeros((n, n))
    if workers == 1 or len(chunks) <= 1:
        _init_worker(indexed, cm, method, node_budget, refine)
        results = map(_pair_chunk, chunks)
        for chunk in results:
            for i, j, c in chunk:
                values[i, j] = c
    else:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(indexed, cm, method, node_budget, refine)
        ) as pool:
            for chunk in pool.map(_pair_chunk, chunks):
                for i, j, c in chunk:
                    values[i, j] = c
    if not directional:
        iu = np.triu_indices(n, 1)
        values[(iu[1], iu[0])] = values[iu]
    return PairwiseMatrix(values, tuple(g.id for g in graphs), method)
