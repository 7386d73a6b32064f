import json
import random

import pytest

from scenecf.graph import LabeledDataset, make_graph, save_dataset
from scenecf.taxonomy import CostModel, Taxonomy

# the small hierarchy used throughout the examples
TOY_EDGES = [
    ("dog", "animal"),
    ("cat", "animal"),
    ("animal", "entity"),
    ("car", "artifact"),
    ("artifact", "entity"),
]

# ten concepts: nouns and predicates under one root
TAX10_EDGES = [
    ("animal", "entity"),
    ("dog", "animal"),
    ("cat", "animal"),
    ("artifact", "entity"),
    ("car", "artifact"),
    ("chair", "artifact"),
    ("act", "entity"),
    ("on", "act"),
    ("chase", "act"),
]
NOUNS = ["entity", "animal", "dog", "cat", "artifact", "car", "chair"]
PREDICATES = ["act", "on", "chase"]


def make_taxonomy(edges, root="entity"):
    concepts = {c for e in edges for c in e}
    return Taxonomy(frozenset(concepts), tuple(edges), root)


@pytest.fixture(scope="session")
def toy_tax():
    return make_taxonomy(TOY_EDGES + [("chase", "entity")])


@pytest.fixture(scope="session")
def toy_cm(toy_tax):
    return CostModel(toy_tax)


@pytest.fixture(scope="session")
def tax10():
    return make_taxonomy(TAX10_EDGES)


@pytest.fixture(scope="session")
def cm10(tax10):
    return CostModel(tax10)


def random_graph(rng, gid, max_nodes, min_nodes=1, edge_p=0.3, concepts=NOUNS, predicates=PREDICATES):
    """Random multigraph; self-loops are rarer, and a parallel edge is
    sometimes added."""
    n = rng.randint(min_nodes, max_nodes)
    nodes = [(f"n{i}", rng.choice(concepts)) for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(n):
            p = edge_p if i != j else edge_p / 4
            if rng.random() < p:
                edges.append((f"n{i}", f"n{j}", rng.choice(predicates)))
    if edges and rng.random() < 0.3:
        s, t, _ = edges[0]
        edges.append((s, t, rng.choice(predicates)))
    return make_graph(gid, nodes, edges)


def permuted_copy(g, rng, gid=None):
    """Same labeled graph with shuffled node order and fresh node ids."""
    order = list(g.node_ids)
    rng.shuffle(order)
    rename = {old: f"m{i}" for i, old in enumerate(order)}
    nodes = [(rename[old], g.concept_of(old)) for old in order]
    edges = [(rename[e.source], rename[e.target], e.predicate) for e in g.edges]
    rng.shuffle(edges)
    return make_graph(gid or g.id + "_perm", nodes, edges)


def toy_dataset(seed=0, n=20, classes=("kitchen", "park", "street"), max_nodes=5):
    rng = random.Random(seed)
    graphs = [random_graph(rng, f"g{i:02d}", max_nodes) for i in range(n)]
    labels = {g.id: classes[i % len(classes)] for i, g in enumerate(graphs)}
    return LabeledDataset(tuple(graphs), labels)


def write_taxonomy(path, edges):
    path.write_text("# child\tparent\n" + "".join(f"{c}\t{p}\n" for c, p in edges), encoding="utf-8")


def write_files(tmp_path, ds, tax_edges=TAX10_EDGES):
    g, lab, tax = tmp_path / "graphs.json", tmp_path / "labels.csv", tmp_path / "taxonomy.tsv"
    save_dataset(ds, g, lab)
    write_taxonomy(tax, tax_edges)
    return g, lab, tax


@pytest.fixture
def toy_files(tmp_path):
    return write_files(tmp_path, toy_dataset())


def write_json(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
