import json

import numpy as np
import pytest

from wsd_fixtures import make_key, make_xml, run_cli, write_store
from senseknn.embedstore import read_embeddings_path


@pytest.fixture
def tiny_dataset(tmp_path):
    train_xml = tmp_path / "train.xml"
    train_xml.write_bytes(
        make_xml(
            [
                ("bank.n", "b1", ["s1"], "the <head>bank</head> of the river"),
                ("bank.n", "b2", ["s1"], "steep <head>bank</head> erosion"),
                ("bank.n", "b3", ["s2"], "the <head>bank</head> closed early"),
            ]
        )
    )
    test_xml = tmp_path / "test.xml"
    test_xml.write_bytes(
        make_xml([("bank.n", "q1", None, "a grassy <head>bank</head> nearby")])
    )
    test_key = tmp_path / "test.key"
    test_key.write_bytes(make_key([("bank.n", "q1", ["s1"])]))
    return train_xml, test_xml, test_key


def test_stats_json_counts(tiny_dataset):
    train_xml, test_xml, test_key = tiny_dataset
    result = run_cli(
        "stats",
        "--train-xml", str(train_xml),
        "--test-xml", str(test_xml),
        "--test-key", str(test_key),
        "--json",
    )
    assert result.returncode == 0, result.stderr
    payload = json.loads(result.stdout)
    train_row = payload["rows"][0]
    assert train_row["dataset"] == "train"
    assert train_row["sentences"] == 3
    assert train_row["sense_embeddings"] == 3
    assert train_row["senses"] == 2
    assert train_row["nouns"] == 3
    test_row = payload["rows"][1]
    assert test_row["sentences"] == 1 and test_row["senses"] == 1


def test_stats_table_output(tiny_dataset):
    train_xml, _, _ = tiny_dataset
    result = run_cli("stats", "--train-xml", str(train_xml))
    assert result.returncode == 0
    assert result.stdout.splitlines()[0].startswith("dataset")


def test_missing_file_exits_2_and_names_path(tmp_path):
    missing = tmp_path / "nope.xml"
    result = run_cli("stats", "--train-xml", str(missing))
    assert result.returncode == 2
    assert "nope.xml" in result.stderr


def test_malformed_xml_exits_2(tmp_path):
    bad = tmp_path / "bad.xml"
    bad.write_bytes(b"<corpus><lexelt item='a.n'><instance id='x'></corpus>")
    result = run_cli("stats", "--train-xml", str(bad))
    assert result.returncode == 2
    assert "line" in result.stderr


def test_unknown_flag_exits_4():
    result = run_cli("stats", "--frobnicate")
    assert result.returncode == 4


def test_evaluate_separable_end_to_end(separable, tmp_path):
    out = tmp_path / "artifacts"
    args = [
        "evaluate",
        "--train-xml", str(separable.train_xml),
        "--train-key", str(separable.train_key),
        "--test-xml", str(separable.test_xml),
        "--test-key", str(separable.test_key),
        "--train-emb", str(separable.train_emb),
        "--test-emb", str(separable.test_emb),
        "--dataset", "separable",
        "--out", str(out),
        "--json",
    ]
    result = run_cli(*args)
    assert result.returncode == 0, result.stderr
    payload = json.loads(result.stdout)
    assert [row["f1"] for row in payload["rows"]] == [100.0] * 6
    assert payload["model_tag"] == "fixture"

    report = json.loads((out / "report_fixture.json").read_text())
    assert report == payload
    assert (out / "report_fixture.csv").read_text().startswith("k,precision")
    assert (out / "f1_vs_k_fixture.svg").stat().st_size > 0
    answers = (out / "answers_fixture_k1.txt").read_text().splitlines()
    assert len(answers) == 18
    lexelt, inst_id, sense = answers[0].split()
    assert separable.gold[inst_id] == sense

    # rerun: artifacts are byte-identical
    before = {p.name: p.read_bytes() for p in out.iterdir()}
    rerun = run_cli(*args)
    assert rerun.returncode == 0
    after = {p.name: p.read_bytes() for p in out.iterdir()}
    assert before == after


def test_evaluate_mfs_only(separable):
    result = run_cli(
        "evaluate",
        "--train-xml", str(separable.train_xml),
        "--train-key", str(separable.train_key),
        "--test-xml", str(separable.test_xml),
        "--test-key", str(separable.test_key),
        "--mfs-only",
        "--json",
    )
    assert result.returncode == 0, result.stderr
    payload = json.loads(result.stdout)
    # two balanced senses per lexelt: the lexicographically smaller one wins,
    # matching half of the test instances
    assert payload["mfs_f1"] == 50.0


def test_mfs_subcommand_matches_mfs_only(separable):
    result = run_cli(
        "mfs",
        "--train-xml", str(separable.train_xml),
        "--train-key", str(separable.train_key),
        "--test-xml", str(separable.test_xml),
        "--test-key", str(separable.test_key),
        "--json",
    )
    assert result.returncode == 0
    assert json.loads(result.stdout)["mfs_f1"] == 50.0


def test_evaluate_requires_embeddings_unless_mfs_only(separable):
    result = run_cli(
        "evaluate",
        "--train-xml", str(separable.train_xml),
        "--train-key", str(separable.train_key),
        "--test-xml", str(separable.test_xml),
        "--test-key", str(separable.test_key),
    )
    assert result.returncode == 4


def test_dim_mismatch_exits_3(separable, tmp_path):
    other = tmp_path / "wrongdim.cwe"
    write_store(other, {"q": np.ones(4, dtype=np.float32)})
    result = run_cli(
        "evaluate",
        "--train-xml", str(separable.train_xml),
        "--train-key", str(separable.train_key),
        "--test-xml", str(separable.test_xml),
        "--test-key", str(separable.test_key),
        "--train-emb", str(separable.train_emb),
        "--test-emb", str(other),
    )
    assert result.returncode == 3
    assert "dim" in result.stderr


def test_coverage_warning_still_scores(separable, tmp_path):
    _, store = read_embeddings_path(separable.test_emb)
    partial = dict(list(store.items())[:-3])
    partial_path = tmp_path / "partial.cwe"
    write_store(partial_path, partial)
    result = run_cli(
        "evaluate",
        "--train-xml", str(separable.train_xml),
        "--train-key", str(separable.train_key),
        "--test-xml", str(separable.test_xml),
        "--test-key", str(separable.test_key),
        "--train-emb", str(separable.train_emb),
        "--test-emb", str(partial_path),
        "--json",
    )
    assert result.returncode == 0
    assert "no stored vector" in result.stderr
    payload = json.loads(result.stdout)
    row = payload["rows"][0]
    assert row["p"] == 100.0
    assert row["r"] == pytest.approx(100.0 * 15 / 18, abs=0.01)


def test_tsne_writes_plot_pair_and_is_seed_stable(separable, tmp_path):
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    base = [
        "tsne",
        "--train-xml", str(separable.train_xml),
        "--train-key", str(separable.train_key),
        "--train-emb", str(separable.train_emb),
        "--lexelt", "art.n",
        "--min-freq", "3",
        "--seed", "9",
    ]
    first = run_cli(*base, "--out", str(out1))
    assert first.returncode == 0, first.stderr
    second = run_cli(*base, "--out", str(out2))
    assert second.returncode == 0
    assert (out1 / "art.n.svg").read_bytes() == (out2 / "art.n.svg").read_bytes()
    payload = json.loads((out1 / "art.n.json").read_text())
    assert payload["lexelt"] == "art.n"
    assert len(payload["points"]) == 12
    assert {e["sense"] for e in payload["legend"]} == {"art%1", "art%2"}


def test_tsne_min_freq_one_plots_everything(separable, tmp_path):
    out = tmp_path / "o"
    result = run_cli(
        "tsne",
        "--train-xml", str(separable.train_xml),
        "--train-key", str(separable.train_key),
        "--train-emb", str(separable.train_emb),
        "--lexelt", "begin.v",
        "--min-freq", "1",
        "--out", str(out),
    )
    assert result.returncode == 0, result.stderr
    payload = json.loads((out / "begin.v.json").read_text())
    assert len(payload["points"]) == 12


def test_tsne_unknown_lexelt_exits_4_listing_available(separable):
    result = run_cli(
        "tsne",
        "--train-xml", str(separable.train_xml),
        "--train-key", str(separable.train_key),
        "--train-emb", str(separable.train_emb),
        "--lexelt", "ghost.n",
    )
    assert result.returncode == 4
    assert "art.n" in result.stderr and "begin.v" in result.stderr


def test_out_env_var_overrides_flag(separable, tmp_path):
    flag_dir = tmp_path / "flagged"
    env_dir = tmp_path / "enved"
    result = run_cli(
        "stats",
        "--train-xml", str(separable.train_xml),
        "--train-key", str(separable.train_key),
        "--out", str(flag_dir),
        env={"SENSEKNN_OUT": str(env_dir)},
    )
    assert result.returncode == 0
    assert (env_dir / "stats.json").exists()
    assert not flag_dir.exists()


def test_inspect_embeddings(separable):
    result = run_cli("inspect-embeddings", str(separable.train_emb), "--json")
    assert result.returncode == 0
    payload = json.loads(result.stdout)
    assert payload["dim"] == 16
    assert payload["count"] == 36
    assert payload["model_tag"] == "fixture"
    assert payload["layer_policy"] == "final_layer"


def test_inspect_corrupted_file_exits_3(separable, tmp_path):
    corrupted = tmp_path / "bad.cwe"
    corrupted.write_bytes(separable.train_emb.read_bytes()[:-7])
    result = run_cli("inspect-embeddings", str(corrupted))
    assert result.returncode == 3
    assert "offset" in result.stderr
