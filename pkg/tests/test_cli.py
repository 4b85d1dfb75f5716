import json

import pytest

from endef.cli import main
from endef.corpus import entity_bias_table, export_bias_table, load_corpus
from endef.synthetic import BiasSpec, generate


def bias_spec_payload(**overrides):
    payload = {
        "n_entities": 6,
        "vocab_size": 60,
        "n_train": 120,
        "n_val": 30,
        "n_test": 30,
        "train_corr": [0.05, 0.95] * 3,
        "test_corr": [0.7, 0.3] * 3,
        "content_signal_strength": 0.3,
        "min_tokens": 8,
        "max_tokens": 14,
        "seed": 21,
    }
    payload.update(overrides)
    return payload


@pytest.fixture
def spec_file(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(bias_spec_payload()), encoding="utf-8")
    return path


def run_cli(*args):
    return main([str(a) for a in args])


def test_unknown_subcommand_exits_2(capsys):
    assert run_cli("frobnicate") == 2
    capsys.readouterr()


def test_missing_required_flag_exits_2(capsys):
    assert run_cli("synthesize") == 2
    capsys.readouterr()


def test_module_error_exits_1(tmp_path, capsys):
    missing = tmp_path / "nope.jsonl"
    assert run_cli("split", "--corpus", missing, "--out-dir", tmp_path / "out") == 1
    assert "error:" in capsys.readouterr().err


def test_synthesize_writes_corpus_ledger_spec_provenance(spec_file, tmp_path, capsys):
    out = tmp_path / "synth"
    assert run_cli("synthesize", "--spec", spec_file, "--out-dir", out) == 0
    capsys.readouterr()
    for name in ("corpus.jsonl", "ledger.tsv", "bias_spec.json", "provenance.json"):
        assert (out / name).exists()
    corpus = load_corpus(out / "corpus.jsonl")
    assert len(corpus) == 180
    prov = json.loads((out / "provenance.json").read_text())
    assert prov["command"] == "synthesize"
    assert prov["seed"] == 21
    assert "endef" in prov["versions"]


def test_cli_is_thin_shell_over_library(spec_file, tmp_path, capsys):
    # bias-report output must equal calling the module operations directly
    out = tmp_path / "synth"
    run_cli("synthesize", "--spec", spec_file, "--out-dir", out)
    report_dir = tmp_path / "bias"
    assert run_cli(
        "bias-report", "--corpus", out / "corpus.jsonl", "--boundary", 1_000_000, "--out-dir", report_dir
    ) == 0
    capsys.readouterr()
    spec = BiasSpec.from_payload(bias_spec_payload())
    corpus, _ = generate(spec)
    rows = entity_bias_table(corpus, 1_000_000)
    direct = tmp_path / "direct.tsv"
    export_bias_table(rows, direct)
    assert (report_dir / "bias_table.tsv").read_bytes() == direct.read_bytes()


def test_split_command(spec_file, tmp_path, capsys):
    out = tmp_path / "synth"
    run_cli("synthesize", "--spec", spec_file, "--out-dir", out)
    split_dir = tmp_path / "split"
    code = run_cli(
        "split",
        "--corpus",
        out / "corpus.jsonl",
        "--train-ratio",
        120 / 180,
        "--val-ratio",
        30 / 180,
        "--seed",
        3,
        "--out-dir",
        split_dir,
    )
    assert code == 0
    capsys.readouterr()
    assert len(load_corpus(split_dir / "train.jsonl")) == 120
    assert len(load_corpus(split_dir / "val.jsonl")) == 30
    assert len(load_corpus(split_dir / "test.jsonl")) == 30


def test_recognize_command(tmp_path, capsys):
    corpus_path = tmp_path / "raw.jsonl"
    with corpus_path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"id": "a", "tokens": ["Donald", "Trump", "spoke"], "label": 0, "timestamp": 1}) + "\n")
    gaz_path = tmp_path / "gaz.tsv"
    gaz_path.write_text("Donald Trump\tPERSON\n", encoding="utf-8")
    out = tmp_path / "rec"
    assert run_cli("recognize", "--corpus", corpus_path, "--gazetteer", gaz_path, "--out-dir", out) == 0
    capsys.readouterr()
    recognized = load_corpus(out / "recognized.jsonl")
    assert recognized.pieces[0].entities == ("Donald Trump",)


def test_evaluate_perfect_predictions_gives_all_ones(tmp_path, capsys):
    pred_path = tmp_path / "preds.jsonl"
    with pred_path.open("w", encoding="utf-8") as fh:
        for score, label in ((0.99, 1), (0.98, 1), (0.01, 0), (0.02, 0)):
            fh.write(json.dumps({"score": score, "label": label}) + "\n")
    out = tmp_path / "eval"
    assert run_cli("evaluate", "--predictions", pred_path, "--out-dir", out) == 0
    shown = capsys.readouterr().out
    assert shown.splitlines()[-1].split() == ["1.0000"] * 6
    report = json.loads((out / "report.json").read_text())
    assert report["macf1"] == 1.0 and report["spauc"] == 1.0
    table = (out / "report.txt").read_text().splitlines()
    assert table[0].split() == ["macF1", "Acc", "AUC", "spAUC", "F1_real", "F1_fake"]


def test_evaluate_requires_inputs(tmp_path, capsys):
    assert run_cli("evaluate", "--out-dir", tmp_path / "x") == 1
    capsys.readouterr()


def _write_config(path, max_epochs=2):
    payload = {
        "detector": {"kind": "bag_of_embeddings_mlp", "embed_dim": 8, "hidden_dim": 12},
        "entity_model": {"kind": "bag_of_embeddings_mlp", "embed_dim": 6, "hidden_dim": 8},
        "train": {"lr": 5e-3, "batch_size": 32, "max_epochs": max_epochs, "patience": 2, "seed": 0},
    }
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def prepare_split_dir(tmp_path, spec_file):
    out = tmp_path / "synth"
    run_cli("synthesize", "--spec", spec_file, "--out-dir", out)
    split_dir = tmp_path / "split"
    run_cli(
        "split",
        "--corpus", out / "corpus.jsonl",
        "--train-ratio", 120 / 180,
        "--val-ratio", 30 / 180,
        "--seed", 3,
        "--out-dir", split_dir,
    )
    return split_dir


def test_train_evaluate_case_report_end_to_end(spec_file, tmp_path, capsys):
    split_dir = prepare_split_dir(tmp_path, spec_file)
    config = _write_config(tmp_path / "config.json")
    run_dir = tmp_path / "run"
    code = run_cli(
        "train",
        "--train", split_dir / "train.jsonl",
        "--val", split_dir / "val.jsonl",
        "--test", split_dir / "test.jsonl",
        "--config", config,
        "--mode", "endef",
        "--out-dir", run_dir,
    )
    assert code == 0
    capsys.readouterr()
    assert (run_dir / "checkpoint.json").exists()
    history = [json.loads(line) for line in (run_dir / "history.jsonl").read_text().splitlines()]
    assert history and history[0]["epoch"] == 1
    assert (run_dir / "report.json").exists()

    eval_dir = tmp_path / "eval"
    code = run_cli(
        "evaluate",
        "--checkpoint", run_dir / "checkpoint.json",
        "--corpus", split_dir / "test.jsonl",
        "--out-dir", eval_dir,
    )
    assert code == 0
    capsys.readouterr()
    direct = json.loads((run_dir / "report.json").read_text())
    rerun = json.loads((eval_dir / "report.json").read_text())
    assert rerun == direct

    case_dir = tmp_path / "cases"
    code = run_cli(
        "case-report",
        "--checkpoint", run_dir / "checkpoint.json",
        "--corpus", split_dir / "test.jsonl",
        "--out-dir", case_dir,
    )
    assert code == 0
    capsys.readouterr()
    rows = [json.loads(line) for line in (case_dir / "cases.jsonl").read_text().splitlines()]
    assert len(rows) == 30
    assert set(rows[0]) == {"id", "p_entity", "p_detector", "p_fused", "p_debiased", "label"}


def test_train_baseline_and_entity_only_modes(spec_file, tmp_path, capsys):
    split_dir = prepare_split_dir(tmp_path, spec_file)
    config = _write_config(tmp_path / "config.json")
    for mode in ("baseline", "entity-only"):
        run_dir = tmp_path / f"run-{mode}"
        code = run_cli(
            "train",
            "--train", split_dir / "train.jsonl",
            "--val", split_dir / "val.jsonl",
            "--test", split_dir / "test.jsonl",
            "--config", config,
            "--mode", mode,
            "--out-dir", run_dir,
        )
        assert code == 0
        capsys.readouterr()
        assert (run_dir / "checkpoint.json").exists()


def test_train_multi_runs_aggregate(spec_file, tmp_path, capsys):
    split_dir = prepare_split_dir(tmp_path, spec_file)
    config = _write_config(tmp_path / "config.json", max_epochs=1)
    run_dir = tmp_path / "runs"
    code = run_cli(
        "train",
        "--train", split_dir / "train.jsonl",
        "--val", split_dir / "val.jsonl",
        "--test", split_dir / "test.jsonl",
        "--config", config,
        "--runs", 2,
        "--out-dir", run_dir,
    )
    assert code == 0
    capsys.readouterr()
    agg = json.loads((run_dir / "aggregate.json").read_text())
    assert "macf1" in agg and "mean" in agg["macf1"] and "std" in agg["macf1"]
    assert (run_dir / "run-00" / "checkpoint.json").exists()
    assert (run_dir / "run-01" / "checkpoint.json").exists()


def test_cli_flag_overrides_config(spec_file, tmp_path, capsys):
    split_dir = prepare_split_dir(tmp_path, spec_file)
    config = _write_config(tmp_path / "config.json", max_epochs=5)
    run_dir = tmp_path / "run"
    code = run_cli(
        "train",
        "--train", split_dir / "train.jsonl",
        "--val", split_dir / "val.jsonl",
        "--config", config,
        "--max-epochs", 1,
        "--out-dir", run_dir,
    )
    assert code == 0
    capsys.readouterr()
    history = (run_dir / "history.jsonl").read_text().splitlines()
    assert len(history) == 1
    prov = json.loads((run_dir / "provenance.json").read_text())
    assert prov["config"]["train"]["max_epochs"] == 1


def test_grid_alpha_command(spec_file, tmp_path, capsys):
    split_dir = prepare_split_dir(tmp_path, spec_file)
    config = _write_config(tmp_path / "config.json", max_epochs=1)
    out = tmp_path / "grid"
    code = run_cli(
        "grid-alpha",
        "--train", split_dir / "train.jsonl",
        "--val", split_dir / "val.jsonl",
        "--config", config,
        "--lr", 1e-12,
        "--out-dir", out,
    )
    assert code == 0
    capsys.readouterr()
    lines = (out / "alpha_grid.tsv").read_text().splitlines()
    assert lines[0] == "alpha\tval_macf1\tbest_epoch"
    assert len(lines) == 12
    best = json.loads((out / "best_alpha.json").read_text())
    assert best["alpha"] == 1.0
