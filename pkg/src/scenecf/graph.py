"""Scene-graph data model, dataset I/O and density-based splitting."""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import CapacityError, ConceptLookupError, ConsistencyError, ParseError


@dataclass(frozen=True)
class ConceptNode:
    node_id: str
    concept: str

    def __post_init__(self):
        if not self.concept:
            raise ConsistencyError(f"node {self.node_id!r} has an empty concept")


@dataclass(frozen=True)
class RoleEdge:
    source: str
    target: str
    predicate: str


@dataclass(frozen=True)
class SceneGraph:
    """Directed labeled multigraph. Parallel edges and self-loops are allowed."""

    id: str
    nodes: tuple[ConceptNode, ...]
    edges: tuple[RoleEdge, ...] = ()
    _concepts: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        if not self.nodes:
            raise ConsistencyError(f"graph {self.id!r} has no nodes")
        concepts = {}
        for node in self.nodes:
            if node.node_id in concepts:
                raise ConsistencyError(f"graph {self.id!r}: duplicate node id {node.node_id!r}")
            concepts[node.node_id] = node.concept
        for e in self.edges:
            for end in (e.source, e.target):
                if end not in concepts:
                    raise ConsistencyError(
                        f"graph {self.id!r}: edge {e.source}->{e.target} references unknown node {end!r}"
                    )
        object.__setattr__(self, "_concepts", concepts)

    def __len__(self):
        return len(self.nodes)

    def concept_of(self, node_id: str) -> str:
        return self._concepts[node_id]

    @property
    def node_ids(self) -> list[str]:
        return [n.node_id for n in self.nodes]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "nodes": [{"id": n.node_id, "concept": n.concept} for n in self.nodes],
            "edges": [{"src": e.source, "dst": e.target, "predicate": e.predicate} for e in self.edges],
        }

    @classmethod
    def from_dict(cls, record: dict) -> "SceneGraph":
        nodes = [ConceptNode(str(n["id"]), str(n["concept"])) for n in record["nodes"]]
        edges = [RoleEdge(str(e["src"]), str(e["dst"]), str(e["predicate"])) for e in record.get("edges", [])]
        return cls(str(record["id"]), tuple(nodes), tuple(edges))


def make_graph(graph_id: str, nodes, edges=()) -> SceneGraph:
    """Shorthand constructor.

    ``nodes`` is either a mapping ``node_id -> concept`` or a sequence of
    ``(node_id, concept)`` pairs; ``edges`` is a sequence of
    ``(source, target, predicate)`` triples.
    """
    items = nodes.items() if isinstance(nodes, dict) else nodes
    return SceneGraph(
        graph_id,
        tuple(ConceptNode(str(i), str(c)) for i, c in items),
        tuple(RoleEdge(str(s), str(t), str(p)) for s, t, p in edges),
    )


@dataclass(frozen=True)
class LabeledDataset:
    graphs: tuple[SceneGraph, ...]
    labels: dict[str, str]

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        seen = set()
        for g in self.graphs:
            if g.id in seen:
                raise ConsistencyError(f"duplicate graph id {g.id!r}")
            seen.add(g.id)
            if g.id not in self.labels:
                raise ConsistencyError(f"graph {g.id!r} has no class label")
        extra = set(self.labels) - seen
        if extra:
            raise ConsistencyError(f"labels reference unknown graph ids: {sorted(extra)}")

    def __len__(self):
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    @property
    def ids(self) -> list[str]:
        return [g.id for g in self.graphs]

    @property
    def classes(self) -> list[str]:
        return sorted(set(self.labels.values()))

    def graph(self, graph_id: str) -> SceneGraph:
        for g in self.graphs:
            if g.id == graph_id:
                return g
        raise ConceptLookupError(f"unknown graph id {graph_id!r}")

    def subset(self, graphs: Iterable[SceneGraph]) -> "LabeledDataset":
        graphs = tuple(graphs)
        return LabeledDataset(graphs, {g.id: self.labels[g.id] for g in graphs})


# ---------------------------------------------------------------- I/O


def _parse_graph_file(path: Path) -> list[SceneGraph]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("graphs"), list):
        raise ParseError(f'{path}: expected a top-level object with a "graphs" list')
    graphs = []
    for i, record in enumerate(doc["graphs"]):
        try:
            graphs.append(SceneGraph.from_dict(record))
        except (KeyError, TypeError, AttributeError) as exc:
            raise ParseError(f"{path}: graph record #{i} is malformed (missing or bad field {exc})") from exc
        except ConsistencyError as exc:
            raise ConsistencyError(f"{path}: graph record #{i}: {exc}") from exc
    return graphs


def _parse_label_file(path: Path) -> dict[str, str]:
    labels: dict[str, str] = {}
    try:
        fh = path.open(encoding="utf-8", newline="")
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["graph_id", "label"]:
            raise ParseError(f"{path}:1: expected header 'graph_id,label'")
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2 or not row[0].strip() or not row[1].strip():
                raise ParseError(f"{path}:{lineno}: expected 'graph_id,label', got {row!r}")
            gid, label = row[0].strip(), row[1].strip()
            if gid in labels:
                raise ConsistencyError(f"{path}:{lineno}: duplicate label for graph {gid!r}")
            labels[gid] = label
    return labels


def load_dataset(graphs_path, labels_path, require_classes: int = 2) -> LabeledDataset:
    """Load and validate a labeled scene-graph dataset.

    Graph and node order follow the file. ``require_classes`` is the minimum
    number of distinct labels; counterfactual retrieval needs at least two.
    """
    graphs_path, labels_path = Path(graphs_path), Path(labels_path)
    graphs = _parse_graph_file(graphs_path)
    labels = _parse_label_file(labels_path)
    ids = {g.id for g in graphs}
    unknown = [gid for gid in labels if gid not in ids]
    if unknown:
        raise ConsistencyError(f"{labels_path}: labels reference unknown graph ids {unknown}")
    missing = [g.id for g in graphs if g.id not in labels]
    if missing:
        raise ConsistencyError(f"{labels_path}: graphs without a label: {missing}")
    ds = LabeledDataset(tuple(graphs), {g.id: labels[g.id] for g in graphs})
    if len(ds.classes) < require_classes:
        raise ConsistencyError(
            f"{labels_path}: {len(ds.classes)} distinct class label(s), at least {require_classes} required"
        )
    return ds


def save_dataset(ds: LabeledDataset, graphs_path, labels_path) -> None:
    doc = {"graphs": [g.to_dict() for g in ds.graphs]}
    Path(graphs_path).write_text(json.dumps(doc, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    with Path(labels_path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["graph_id", "label"])
        for g in ds.graphs:
            writer.writerow([g.id, ds.labels[g.id]])


# ---------------------------------------------------------------- statistics & splits


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    isolated_node_count: int
    density: float

    @property
    def isolated_fraction(self) -> float:
        return self.isolated_node_count / self.node_count


def graph_stats(g: SceneGraph) -> GraphStats:
    touched = set()
    for e in g.edges:
        touched.add(e.source)
        touched.add(e.target)
    n, m = len(g.nodes), len(g.edges)
    return GraphStats(n, m, sum(1 for nd in g.nodes if nd.node_id not in touched), m / n)


DENSE_DEFAULTS = {"max_nodes": 20, "min_density": 0.8, "max_isolated_fraction": 0.2}


def split_dense(
    ds: LabeledDataset,
    max_nodes: int = 20,
    min_density: float = 0.8,
    max_isolated_fraction: float = 0.2,
    n: int = 500,
) -> LabeledDataset:
    """First ``n`` graphs (file order) that are small, well connected and
    have few isolated nodes."""
    keep = []
    for g in ds.graphs:
        s = graph_stats(g)
        if s.node_count <= max_nodes and s.density >= min_density and s.isolated_fraction <= max_isolated_fraction:
            keep.append(g)
    if len(keep) < n:
        raise CapacityError(f"only {len(keep)} graph(s) satisfy the density thresholds, {n} requested")
    return ds.subset(keep[:n])


def split_random(ds: LabeledDataset, n: int = 500, seed: int = 0) -> LabeledDataset:
    """Seeded sample of ``n`` graphs, returned in their original file order."""
    if n > len(ds):
        raise CapacityError(f"requested {n} graphs from a dataset of {len(ds)}")
    # random.Random's sample() is specified to be stable for a given seed
    chosen = set(random.Random(seed).sample(range(len(ds)), n))
    return ds.subset(g for i, g in enumerate(ds.graphs) if i in chosen)
