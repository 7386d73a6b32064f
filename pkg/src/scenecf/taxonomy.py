"""Concept hierarchy and the edit costs derived from it.

Similarity of two concepts is ``1 / (1 + d)`` with ``d`` the shortest
undirected path length in the hypernym graph. Replacing one concept by another
costs ``1 - similarity``; deleting or inserting a concept costs its
dissimilarity to the root, so all three edit kinds share the ``[0, 1)`` scale.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path

from .errors import ConceptLookupError, ConnectivityError, ParseError, StructureError
from .lap import solve_lap, square_edit_matrix


@dataclass(frozen=True)
class Taxonomy:
    concepts: frozenset
    hypernym_edges: tuple  # (child, parent) pairs
    root: str
    _neighbors: dict = field(init=False, repr=False, compare=False, hash=False)
    _dist_cache: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "concepts", frozenset(self.concepts))
        object.__setattr__(self, "hypernym_edges", tuple(self.hypernym_edges))
        if self.root not in self.concepts:
            raise ConnectivityError(f"root concept {self.root!r} does not appear in the taxonomy")
        parents: dict[str, list[str]] = {c: [] for c in self.concepts}
        neighbors: dict[str, set[str]] = {c: set() for c in self.concepts}
        for child, parent in self.hypernym_edges:
            parents[child].append(parent)
            neighbors[child].add(parent)
            neighbors[parent].add(child)
        _check_acyclic(parents)
        _check_rooted(parents, self.root)
        object.__setattr__(self, "_neighbors", {c: tuple(sorted(ns)) for c, ns in neighbors.items()})
        object.__setattr__(self, "_dist_cache", {})

    def __contains__(self, concept):
        return concept in self.concepts

    def __len__(self):
        return len(self.concepts)

    def _require(self, concept):
        if concept not in self.concepts:
            raise ConceptLookupError(f"unknown concept {concept!r}")

    def distances_from(self, concept: str) -> dict[str, int]:
        """Undirected hop counts from ``concept`` to every concept (memoized)."""
        cached = self._dist_cache.get(concept)
        if cached is not None:
            return cached
        self._require(concept)
        dist = {concept: 0}
        queue = deque([concept])
        while queue:
            c = queue.popleft()
            for nb in self._neighbors[c]:
                if nb not in dist:
                    dist[nb] = dist[c] + 1
                    queue.append(nb)
        # concurrent fills compute identical maps, so last-writer-wins is harmless
        self._dist_cache[concept] = dist
        return dist

    def distance(self, a: str, b: str) -> int:
        self._require(b)
        return self.distances_from(a)[b]


def _check_acyclic(parents: dict[str, list[str]]) -> None:
    WHITE, GREY, BLACK = 0, 1, 2
    color = dict.fromkeys(parents, WHITE)
    for start in sorted(parents):
        if color[start] != WHITE:
            continue
        color[start] = GREY
        stack = [(start, iter(parents[start]))]
        path = [start]
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = BLACK
                stack.pop()
                path.pop()
            elif color[nxt] == GREY:
                cycle = path[path.index(nxt):] + [nxt]
                raise StructureError("hypernym cycle: " + " -> ".join(cycle))
            elif color[nxt] == WHITE:
                color[nxt] = GREY
                stack.append((nxt, iter(parents[nxt])))
                path.append(nxt)


def _check_rooted(parents: dict[str, list[str]], root: str) -> None:
    children: dict[str, list[str]] = {c: [] for c in parents}
    for c, ps in parents.items():
        for p in ps:
            children[p].append(c)
    reached = {root}
    queue = deque([root])
    while queue:
        for ch in children[queue.popleft()]:
            if ch not in reached:
                reached.add(ch)
                queue.append(ch)
    orphans = sorted(set(parents) - reached)
    if orphans:
        raise ConnectivityError(f"concept {orphans[0]!r} cannot reach root {root!r}" + (
            f" (and {len(orphans) - 1} more)" if len(orphans) > 1 else ""))


def load_taxonomy(path, root: str | None = None) -> Taxonomy:
    """Read a ``child<TAB>parent`` file. ``#`` lines and blank lines are skipped.

    When ``root`` is omitted the unique concept without a parent is used.
    """
    path = Path(path)
    edges = []
    concepts = set()
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.rstrip("\r\n").split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise ParseError(f"{path}:{lineno}: expected 'child<TAB>parent', got {line!r}")
        child, parent = parts[0].strip(), parts[1].strip()
        if child == parent:
            raise StructureError(f"{path}:{lineno}: self-loop on {child!r}")
        edges.append((child, parent))
        concepts.update((child, parent))
    if root is None:
        has_parent = {c for c, _ in edges}
        tops = sorted(concepts - has_parent)
        if len(tops) != 1:
            raise ConnectivityError(f"{path}: cannot infer a unique root, candidates {tops}")
        root = tops[0]
    elif root not in concepts:
        raise ConnectivityError(f"{path}: root {root!r} does not appear in the file")
    return Taxonomy(frozenset(concepts), tuple(edges), root)


def path_similarity(t: Taxonomy, a: str, b: str) -> float:
    return 1.0 / (1.0 + t.distance(a, b))


class CostModel:
    """Replacement, deletion and insertion costs over a taxonomy.

    With ``raw_hop_del_cost`` the deletion/insertion cost is the plain hop
    count to the root instead of ``1 - path_similarity(concept, root)``.
    Node concepts and edge predicates are costed by the same functions.
    """

    def __init__(self, taxonomy: Taxonomy, raw_hop_del_cost: bool = False):
        self.taxonomy = taxonomy
        self.raw_hop_del_cost = raw_hop_del_cost
        self._sub = {}
        self._del = {}
        self._group = {}

    def __repr__(self):
        return f"CostModel(root={self.taxonomy.root!r}, concepts={len(self.taxonomy)}, raw_hop_del_cost={self.raw_hop_del_cost})"

    def __getstate__(self):
        return {"taxonomy": self.taxonomy, "raw_hop_del_cost": self.raw_hop_del_cost}

    def __setstate__(self, state):
        self.__init__(state["taxonomy"], state["raw_hop_del_cost"])

    def substitution_cost(self, a: str, b: str) -> float:
        key = (a, b) if a <= b else (b, a)
        cost = self._sub.get(key)
        if cost is None:
            if a == b:
                self.taxonomy._require(a)
                cost = 0.0
            else:
                cost = 1.0 - path_similarity(self.taxonomy, a, b)
            self._sub[key] = cost
        return cost

    def deletion_cost(self, a: str) -> float:
        cost = self._del.get(a)
        if cost is None:
            d = self.taxonomy.distance(a, self.taxonomy.root)
            cost = float(d) if self.raw_hop_del_cost else 1.0 - 1.0 / (1.0 + d)
            self._del[a] = cost
        return cost

    insertion_cost = deletion_cost

    def multiset_cost(self, left: tuple, right: tuple) -> float:
        """Optimal matching cost between two sorted label multisets.

        Every label is either replaced by one on the other side or
        deleted/inserted. Used for parallel edges and incident-edge terms.
        """
        key = (left, right)
        cost = self._group.get(key)
        if cost is None:
            cost = self._multiset_cost(left, right)
            self._group[key] = cost
        return cost

    def _multiset_cost(self, left, right):
        if not left:
            return sum(self.insertion_cost(b) for b in right)
        if not right:
            return sum(self.deletion_cost(a) for a in left)
        if len(left) == 1 and len(right) == 1:
            a, b = left[0], right[0]
            return min(self.substitution_cost(a, b), self.deletion_cost(a) + self.insertion_cost(b))
        n, m = len(left), len(right)
        if n + m <= 6:
            return self._brute_multiset(left, right)
        sub = [[self.substitution_cost(a, b) for b in right] for a in left]
        cm = square_edit_matrix(sub, [self.deletion_cost(a) for a in left], [self.insertion_cost(b) for b in right])
        return solve_lap(cm)[1]

    def _brute_multiset(self, left, right):
        # small case: choose which right labels receive each left label (or none)
        if len(left) > len(right):
            left, right, flip = right, left, True
        else:
            flip = False
        dl = self.insertion_cost if flip else self.deletion_cost
        ir = self.deletion_cost if flip else self.insertion_cost
        best = float("inf")
        slots = list(range(len(right))) + [None] * len(left)
        for choice in set(permutations(slots, len(left))):
            used = set()
            total = 0.0
            for a, j in zip(left, choice):
                if j is None:
                    total += dl(a)
                else:
                    used.add(j)
                    total += self.substitution_cost(a, right[j])
            total += sum(ir(right[j]) for j in range(len(right)) if j not in used)
            best = min(best, total)
        return best


def substitution_cost(cm: CostModel, a: str, b: str) -> float:
    return cm.substitution_cost(a, b)


def deletion_cost(cm: CostModel, a: str) -> float:
    return cm.deletion_cost(a)


def insertion_cost(cm: CostModel, a: str) -> float:
    return cm.insertion_cost(a)
