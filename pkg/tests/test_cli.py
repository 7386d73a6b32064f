import csv
import json

import pytest

from conftest import TOY_EDGES, toy_dataset, write_files
from scenecf.cli import main
from scenecf.graph import LabeledDataset, load_dataset, make_graph
from scenecf.retrieval import RankTable


@pytest.fixture
def pair_files(tmp_path):
    ds = LabeledDataset(
        (make_graph("g1", {"a": "dog"}), make_graph("g2", {"b": "cat"}), make_graph("g3", {"c": "dog"})),
        {"g1": "x", "g2": "y", "g3": "y"},
    )
    return write_files(tmp_path, ds, TOY_EDGES + [("chase", "entity")])


def data_args(files):
    g, lab, tax = files
    return ["--graphs", str(g), "--labels", str(lab), "--taxonomy", str(tax)]


def test_ged_prints_cost(pair_files, capsys):
    assert main(["ged", *data_args(pair_files), "--a", "g1", "--b", "g3"]) == 0
    assert capsys.readouterr().out.strip() == "0.0"
    assert main(["ged", *data_args(pair_files), "--a", "g1", "--b", "g2", "--method", "exact"]) == 0
    assert capsys.readouterr().out.strip() == "0.6667"


def test_ged_path_json(pair_files, capsys):
    main(["ged", *data_args(pair_files), "--a", "g1", "--b", "g2", "--path"])
    out = capsys.readouterr().out
    doc = json.loads(out[out.index("{"):])
    assert doc["ops"][0]["kind"] == "replace"


def test_exact_budget_error(tmp_path, capsys):
    big = make_graph("big", [(str(i), "dog") for i in range(11)])
    ds = LabeledDataset((big, make_graph("s", {"a": "cat"})), {"big": "x", "s": "y"})
    files = write_files(tmp_path, ds)
    code = main(["ged", *data_args(files), "--a", "big", "--b", "s", "--method", "exact"])
    err = capsys.readouterr().err
    assert code != 0 and "size error" in err and "approx" in err


def test_missing_input_is_reported(tmp_path, capsys):
    code = main(["matrix", "--graphs", str(tmp_path / "none.json"), "--labels", "x", "--taxonomy", "y",
                 "--out", str(tmp_path / "m.csv")])
    assert code == 1 and capsys.readouterr().err.startswith("scenecf:")


def test_matrix_gram_embed_rank_eval(tmp_path, toy_files, capsys):
    args = data_args(toy_files)
    m, gm, emb = tmp_path / "m.csv", tmp_path / "k.csv", tmp_path / "e.csv"
    assert main(["matrix", *args, "--out", str(m), "--workers", "1"]) == 0
    assert main(["gram", *args[:4], "--kernel", "sp", "--out", str(gm)]) == 0
    cfg = json.loads((tmp_path / "k.csv.config.json").read_text())
    assert cfg["kernel"]["kind"] == "SP" and cfg["normalized"] is True
    assert main(["embed", *args[:4], "--dim", "256", "--out", str(emb)]) == 0
    assert main(["rank", *args[:4], "--matrix", str(m), "--out", str(tmp_path / "gt.json")]) == 0
    assert main(["rank", *args[:4], "--matrix", str(m), "--k", "4", "--out", str(tmp_path / "r1.json")]) == 0
    assert main(["rank", *args[:4], "--gram", str(gm), "--k", "4", "--out", str(tmp_path / "r2.json")]) == 0
    assert main(["rank", *args[:4], "--embeddings", str(emb), "--k", "4", "--out", str(tmp_path / "r3.json")]) == 0
    assert RankTable.load(tmp_path / "r2.json").backend_tag == "kernel-SP"
    code = main(["eval", "--gt", str(tmp_path / "gt.json"), "--ranks", *(str(tmp_path / f"r{i}.json") for i in (1, 2, 3)),
                 "--out-dir", str(tmp_path / "ev")])
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "ev" / "metrics_topk.csv").open()))
    assert [r["backend"] for r in rows] == ["ged-approx", "kernel-SP", "embedding-e"]
    assert all(float(v) == 1.0 for k, v in rows[0].items() if k != "backend")
    capsys.readouterr()


def test_rank_needs_one_backend(toy_files, tmp_path, capsys):
    code = main(["rank", *data_args(toy_files)[:4], "--out", str(tmp_path / "r.json")])
    assert code == 1 and "exactly one" in capsys.readouterr().err


def test_explain(toy_files, capsys):
    assert main(["explain", *data_args(toy_files), "--query", "g00"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["replay_ok"] is True
    assert doc["query_label"] != doc["counterfactual_label"]
    assert doc["path"]["total_cost"] == pytest.approx(doc["cost"])


def test_explain_single_class(tmp_path, capsys):
    ds = LabeledDataset((make_graph("a", {"x": "dog"}), make_graph("b", {"x": "cat"})), {"a": "k", "b": "k"})
    code = main(["explain", *data_args(write_files(tmp_path, ds)), "--query", "a"])
    assert code == 1 and "eligibility" in capsys.readouterr().err


def test_split_random(toy_files, tmp_path):
    out_g, out_l = tmp_path / "s.json", tmp_path / "s.csv"
    assert main(["split", *data_args(toy_files)[:4], "--mode", "random", "--n", "5",
                 "--out-graphs", str(out_g), "--out-labels", str(out_l)]) == 0
    assert len(load_dataset(out_g, out_l, require_classes=1)) == 5


def _pipeline(files, out, *extra):
    return main(["pipeline", *data_args(files), "--kernels", "WL,SP", "--wl-embedding", "--embed-dim", "512",
                 "--workers", "1", "--out-dir", str(out), *extra])


def test_pipeline_outputs(tmp_path, toy_files, capsys):
    out = tmp_path / "run"
    assert _pipeline(toy_files, out) == 0
    names = sorted(p.name for p in out.iterdir())
    for expected in ("ged_exact.csv", "ged_approx.csv", "ranks_ground_truth.json", "gram_WL.csv",
                     "ranks_kernel-WL.json", "ranks_embedding-wl.json", "metrics_topk.csv",
                     "metrics_binary.csv", "manifest.json"):
        assert expected in names
    for mode in ("topk", "binary"):
        for row in csv.DictReader((out / f"metrics_{mode}.csv").open()):
            assert all(0.0 <= float(v) <= 1.0 for k, v in row.items() if k != "backend")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["params"]["ks"] == [1, 2, 4]
    capsys.readouterr()


def test_pipeline_ground_truth_backend_is_perfect(tmp_path, toy_files, capsys):
    out = tmp_path / "run"
    assert _pipeline(toy_files, out, "--backend-method", "exact") == 0
    rows = list(csv.DictReader((out / "metrics_topk.csv").open()))
    assert rows[0]["backend"] == "ged-exact"
    assert all(float(v) == 1.0 for k, v in rows[0].items() if k != "backend")
    capsys.readouterr()


def test_pipeline_deterministic_and_manifest_replay(tmp_path, toy_files, capsys):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert _pipeline(toy_files, a) == 0 and _pipeline(toy_files, b) == 0
    for p in a.iterdir():
        assert p.read_bytes() == (b / p.name).read_bytes(), p.name
    assert main(["pipeline", "--from-manifest", str(a / "manifest.json"), "--out-dir", str(c)]) == 0
    assert (a / "metrics_topk.csv").read_bytes() == (c / "metrics_topk.csv").read_bytes()
    capsys.readouterr()


def test_pipeline_failure_cleans_up(tmp_path, capsys):
    ds = toy_dataset(n=6)
    files = write_files(tmp_path, ds, TOY_EDGES)  # lacks most concepts used by the graphs
    out = tmp_path / "run"
    assert _pipeline(files, out) == 1
    err = capsys.readouterr().err
    assert "stage 'ground-truth' failed" in err
    assert not out.exists()


def test_pipeline_manifest_detects_changed_input(tmp_path, toy_files, capsys):
    a = tmp_path / "a"
    assert _pipeline(toy_files, a) == 0
    toy_files[1].write_text(toy_files[1].read_text() + "\n", encoding="utf-8")
    code = main(["pipeline", "--from-manifest", str(a / "manifest.json"), "--out-dir", str(tmp_path / "b")])
    assert code == 1 and "changed" in capsys.readouterr().err
