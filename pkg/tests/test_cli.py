import hashlib
import json

import pandas as pd
import pytest

from strainscope.cli import RunConfig, THREADS_ENV, main, run

REPORT_FILES = ("spread.csv", "blockheights.csv", "behaviors.csv", "profiles.csv", "distances.csv", "pca.csv",
                "clusters.json")


@pytest.fixture
def fixture_dir(tmp_path):
    out = tmp_path / "fixture"
    assert main(["-q", "synth", "--out", str(out), "--families", "4", "--filler", "20", "--padding", "5"]) == 0
    return out


def _inputs(fixture_dir, out):
    return ["--ledger", str(fixture_dir / "transactions.jsonl"), "--seeds", str(fixture_dir / "seeds.csv"),
            "--out", str(out)]


def test_report_writes_every_file(fixture_dir, tmp_path):
    out = tmp_path / "report"
    assert main(["-q", "report"] + _inputs(fixture_dir, out)) == 0
    for name in REPORT_FILES + ("cluster_table.csv", "pattern_shares.csv", "manifest.json"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    for key, name in (("ledger", "transactions.jsonl"), ("seeds", "seeds.csv")):
        digest = hashlib.sha256((fixture_dir / name).read_bytes()).hexdigest()
        assert manifest["inputs"][key]["sha256"] == digest
    assert manifest["config"]["steps"] == 2
    assert manifest["config"]["degree_scope"] == "ledger"
    assert manifest["families"] == ["family00", "family01", "family02", "family03"]
    assert manifest["failures"] == {}
    spread = pd.read_csv(out / "spread.csv")
    truth = json.loads((fixture_dir / "ground_truth.json").read_text(encoding="utf-8"))
    for row in spread.itertuples(index=False):
        expected = truth["families"][row.family]
        assert row.distinct_addresses == expected["expected_distinct_addresses"]
        assert row.pattern == expected["expected_pattern"]
        assert row.post_count == expected["expected_post_count"]
    with open(out / "pca.csv", encoding="utf-8") as f:
        assert f.readline().startswith("# explained_variance,")
    clusters = json.loads((out / "clusters.json").read_text(encoding="utf-8"))
    assert [c["lambda_pct"] for c in clusters] == [1, 2, 3, 4, 5, 10]
    assert all(isinstance(c["lambda_pct"], float) for c in clusters)
    assert "\"lambda_pct\": 1.0," in (out / "clusters.json").read_text(encoding="utf-8")


def test_report_is_deterministic_across_threads(fixture_dir, tmp_path):
    one, four = tmp_path / "one", tmp_path / "four"
    assert main(["-q", "report", "--threads", "1", "--export-graph"] + _inputs(fixture_dir, one)) == 0
    assert main(["-q", "report", "--threads", "4", "--export-graph"] + _inputs(fixture_dir, four)) == 0
    names = sorted(p.name for p in one.iterdir())
    assert names == sorted(p.name for p in four.iterdir())
    assert "nodes.csv" in names and "edges.csv" in names
    for name in names:
        assert (one / name).read_bytes() == (four / name).read_bytes()


def test_cluster_subcommand(fixture_dir, tmp_path):
    out = tmp_path / "cluster"
    assert main(["-q", "cluster", "--lambda-pct", "5", "--lambda-pct", "50"] + _inputs(fixture_dir, out)) == 0
    clusters = json.loads((out / "clusters.json").read_text(encoding="utf-8"))
    assert [c["lambda_pct"] for c in clusters] == [5.0, 50.0]
    table = pd.read_csv(out / "cluster_table.csv")
    assert list(table["lambda_pct"]) == [5.0, 50.0]
    assert not (out / "spread.csv").exists()


@pytest.mark.parametrize("command, files", [
    ("ingest-check", ("ledger_summary.json",)),
    ("build-graph", ("nodes.csv", "edges.csv")),
    ("spread", ("spread.csv", "blockheights.csv", "pattern_shares.csv")),
    ("behaviors", ("behaviors.csv",)),
    ("profile", ("profiles.csv",)),
    ("distances", ("distances.csv",)),
    ("pca", ("pca.csv",)),
])
def test_subcommands(fixture_dir, tmp_path, command, files):
    out = tmp_path / command
    assert main(["-q", command] + _inputs(fixture_dir, out)) == 0
    assert sorted(p.name for p in out.iterdir()) == sorted(files)


def test_ingest_summary(fixture_dir, tmp_path):
    out = tmp_path / "summary"
    assert main(["-q", "ingest-check"] + _inputs(fixture_dir, out)) == 0
    summary = json.loads((out / "ledger_summary.json").read_text(encoding="utf-8"))
    assert summary["families"] == 4
    assert summary["seeds"] == 8
    assert summary["missing_seeds"] == []
    assert summary["census"] == [{"year": 2020, "num_seeds": 2,
                                  "families": "family00, family01, family02, family03"}]


def test_malformed_ledger_exit_code(tmp_path, capsys):
    ledger = tmp_path / "transactions.jsonl"
    ledger.write_text('{"txid": "a", "block": 1, "time": 1, "inputs": [], "outputs": [{"addr": "A", "value": 1}]}\n'
                      '{"txid": "a", "block": 2, "time": 2, "inputs": [], "outputs": [{"addr": "B", "value": 1}]}\n',
                      encoding="utf-8")
    seeds = tmp_path / "seeds.csv"
    seeds.write_text("family,address,year\nX,A,2016\n", encoding="utf-8")
    code = main(["-q", "report", "--ledger", str(ledger), "--seeds", str(seeds), "--out", str(tmp_path / "o")])
    assert code == 2
    assert str(ledger) + ":2:" in capsys.readouterr().err


def test_oversized_value_exit_code(tmp_path, capsys):
    ledger = tmp_path / "transactions.jsonl"
    ledger.write_text('{"txid": "a", "block": 1, "time": 1, "inputs": [], "outputs": [{"addr": "A", "value": '
                      + str(2 ** 70) + '}]}\n', encoding="utf-8")
    seeds = tmp_path / "seeds.csv"
    seeds.write_text("family,address,year\nX,A,2016\n", encoding="utf-8")
    code = main(["-q", "ingest-check", "--ledger", str(ledger), "--seeds", str(seeds), "--out", str(tmp_path / "o")])
    assert code == 2
    assert str(ledger) + ":1:" in capsys.readouterr().err


def test_missing_input_exit_code(tmp_path):
    assert main(["-q", "spread", "--ledger", str(tmp_path / "none.jsonl"), "--seeds", str(tmp_path / "none.csv"),
                 "--out", str(tmp_path / "o")]) == 2


def test_single_family_report_records_failure(tmp_path):
    fixture = tmp_path / "fixture"
    assert main(["-q", "synth", "--out", str(fixture), "--families", "1"]) == 0
    out = tmp_path / "report"
    assert main(["-q", "report"] + _inputs(fixture, out)) == 0
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert "*" in manifest["failures"]
    assert (out / "profiles.csv").exists()
    assert not (out / "distances.csv").exists()


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert RunConfig("l", "s", "o").threads == 3
    assert RunConfig("l", "s", "o", threads=2).threads == 2
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(ValueError, match=THREADS_ENV):
        RunConfig("l", "s", "o")


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig("l", "s", "o", steps=0, threads=1)
    with pytest.raises(ValueError):
        RunConfig("l", "s", "o", degree_scope="chain", threads=1)
    with pytest.raises(ValueError):
        RunConfig("l", "s", "o", lambda_pcts=(5, 150), threads=1)
    assert RunConfig("l", "s", "o", degree_scope="full-ledger", threads=1).degree_scope == "ledger"


def test_run_with_config(fixture_dir, tmp_path):
    config = RunConfig(str(fixture_dir / "transactions.jsonl"), str(fixture_dir / "seeds.csv"), str(tmp_path / "o"),
                       degree_scope="in-graph", threads=2)
    assert run("behaviors", config) == 0
    behaviors = pd.read_csv(tmp_path / "o" / "behaviors.csv", keep_default_na=False)
    assert set(behaviors["scope"]) == {"graph"}
    assert list(behaviors.columns) == ["family", "address", "a_label", "b_label", "N", "M", "scope"]
    with pytest.raises(ValueError):
        run("plot", config)
