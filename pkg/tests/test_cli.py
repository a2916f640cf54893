"""End-to-end command-line behavior, driven in process through main()."""

import json
import subprocess
import sys

import pytest

from sessionrec.cli import DATA_DIR_ENV, RunConfig, build_parser, main, resolve_config
from sessionrec.corpus import load_corpus
from sessionrec.errors import ConfigError
from sessionrec.synthetic import chain_events, write_events_csv


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch):
    monkeypatch.delenv(DATA_DIR_ENV, raising=False)


@pytest.fixture(scope="module")
def events_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("events") / "clicks.csv"
    write_events_csv(chain_events(n_sessions=40, n_chains=2, chain_len=6, seed=5), path)
    return path


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory, events_csv):
    out = tmp_path_factory.mktemp("corpus")
    code = main([
        "preprocess",
        "--input", str(events_csv),
        "--output", str(out),
        "--min-support", "2",
        "--test-window", "200",
    ])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def train_dir(tmp_path_factory, corpus_dir):
    out = tmp_path_factory.mktemp("run")
    code = main([
        "train",
        "--corpus", str(corpus_dir),
        "--out", str(out),
        "--epochs", "1",
        "--dim", "8",
        "--heads", "2",
        "--gat-layers", "1",
        "--patience", "0",
        "--threshold", "0.1",
    ])
    assert code == 0
    return out


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out)


# ---------------------------------------------------------------------------
# exit codes and usage errors


def test_help_exits_zero():
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0


def test_module_invocation_help():
    proc = subprocess.run(
        [sys.executable, "-m", "sessionrec.cli", "--help"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "preprocess" in proc.stdout and "recommend" in proc.stdout


def test_no_command_fails(capsys):
    assert main([]) == 1


def test_unknown_command_fails(capsys):
    assert main(["frobnicate"]) == 1
    assert "usage error" in capsys.readouterr().err


def test_train_without_corpus_names_the_flag(tmp_path, capsys):
    assert main(["train", "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "--corpus" in err


def test_missing_required_flag_is_a_usage_error(capsys):
    assert main(["preprocess", "--input", "x.csv"]) == 1
    assert "--output" in capsys.readouterr().err


def test_runtime_failures_exit_two(tmp_path, capsys):
    assert main(["neighbors", "--corpus", str(tmp_path / "nope"), "--session", "a"]) == 2
    assert "error" in capsys.readouterr().err


def test_evaluate_needs_a_subject(corpus_dir, capsys):
    assert main(["evaluate", "--corpus", str(corpus_dir)]) == 1
    assert "--checkpoint or --baseline" in capsys.readouterr().err


def test_bad_cutoffs_are_usage_errors(corpus_dir, capsys):
    code = main([
        "evaluate", "--corpus", str(corpus_dir), "--baseline", "pop", "--at", "0,5",
    ])
    assert code == 1


# ---------------------------------------------------------------------------
# config resolution


def parse(argv):
    return build_parser().parse_args(argv)


def test_flags_beat_config_file_beats_defaults(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"k": 7, "threshold": 0.25}))

    defaults = resolve_config(parse(["neighbors", "--session", "a"]))
    assert defaults.k == RunConfig().k == 120

    from_file = resolve_config(
        parse(["neighbors", "--session", "a", "--config", str(cfg_file)])
    )
    assert from_file.k == 7
    assert from_file.threshold == 0.25

    overridden = resolve_config(
        parse(["neighbors", "--session", "a", "--config", str(cfg_file), "--k", "9"])
    )
    assert overridden.k == 9
    assert overridden.threshold == 0.25


def test_config_file_rejects_unknown_keys(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"velocity": 11}))
    with pytest.raises(ConfigError, match="velocity"):
        resolve_config(parse(["neighbors", "--session", "a", "--config", str(cfg_file)]))


def test_config_accepts_a_written_run_config(corpus_dir):
    # run_config.json wraps settings under "config"; feeding it back must work
    cfg = resolve_config(
        parse(["neighbors", "--session", "a",
               "--config", str(corpus_dir / "run_config.json")])
    )
    assert cfg.min_support == 2
    assert cfg.test_window == 200


# ---------------------------------------------------------------------------
# subcommands against a real corpus


def test_preprocess_outputs_and_summary(corpus_dir, events_csv, capsys):
    assert (corpus_dir / "corpus.bin").exists()
    assert (corpus_dir / "vocab.json").exists()
    assert (corpus_dir / "run_config.json").exists()
    corpus = load_corpus(corpus_dir)
    assert corpus.train_count < len(corpus.sessions)

    # re-run to a fresh directory and check the JSON summary
    out2 = corpus_dir.parent / "again"
    code, doc = run_json(capsys, [
        "preprocess", "--input", str(events_csv), "--output", str(out2),
        "--min-support", "2", "--test-window", "200",
    ])
    assert code == 0
    assert doc["sessions"] == len(corpus.sessions)
    assert doc["train_sessions"] == corpus.train_count
    assert doc["items"] == len(corpus.vocab)


def test_neighbors_command_lists_similar_sessions(corpus_dir, capsys):
    corpus = load_corpus(corpus_dir)
    session_arg = ",".join(corpus.vocab.key(i) for i in corpus.sessions[0].items[:2])
    code, doc = run_json(capsys, [
        "neighbors", "--corpus", str(corpus_dir),
        "--session", session_arg, "--threshold", "0.1",
    ])
    assert code == 0
    assert doc, "expected at least one neighbor in a chain corpus"
    sims = [row["similarity"] for row in doc]
    assert sims == sorted(sims, reverse=True)
    assert all(set(row) == {"session", "similarity"} for row in doc)


def test_neighbors_reads_corpus_from_environment(corpus_dir, capsys, monkeypatch):
    monkeypatch.setenv(DATA_DIR_ENV, str(corpus_dir))
    corpus = load_corpus(corpus_dir)
    code = main(["neighbors", "--session", corpus.vocab.key(0), "--threshold", "0"])
    assert code == 0


def test_graph_command_without_corpus(capsys):
    code, doc = run_json(capsys, ["graph", "--session", "a,b,a"])
    assert code == 0
    assert doc["intra"]["nodes"] == ["a", "b"]
    assert doc["intra"]["alias"] == [0, 1, 0]
    assert doc["intra"]["a_out"] == [[0.0, 1.0], [1.0, 0.0]]
    assert doc["inter"]["adjacency"] == [[0, 1], [0, 1]]
    assert doc["inter"]["session_slots"] == [0, 1, 0]


def test_graph_command_with_neighbors(corpus_dir, capsys):
    corpus = load_corpus(corpus_dir)
    keys = [corpus.vocab.key(i) for i in corpus.sessions[0].items[:2]]
    code, doc = run_json(capsys, [
        "graph", "--corpus", str(corpus_dir), "--session", ",".join(keys),
        "--with-neighbors", "--threshold", "0.1",
    ])
    assert code == 0
    assert set(keys) <= set(doc["inter"]["nodes"])
    assert len(doc["inter"]["nodes"]) > len(set(keys))


def test_unknown_item_key_is_a_runtime_error(corpus_dir, capsys):
    code = main([
        "neighbors", "--corpus", str(corpus_dir), "--session", "no-such-item",
    ])
    assert code == 2
    assert "no-such-item" in capsys.readouterr().err


def test_train_writes_checkpoints_and_summary(train_dir, capsys):
    assert (train_dir / "epoch_0.ckpt").exists()
    assert (train_dir / "log.jsonl").exists()
    assert (train_dir / "run_config.json").exists()
    entry = json.loads((train_dir / "log.jsonl").read_text().splitlines()[0])
    assert entry["epoch"] == 0 and entry["loss"] > 0


def test_evaluate_checkpoint_report(train_dir, corpus_dir, tmp_path, capsys):
    report_dir = tmp_path / "report"
    code, doc = run_json(capsys, [
        "evaluate", "--corpus", str(corpus_dir),
        "--checkpoint", str(train_dir / "epoch_0.ckpt"),
        "--out", str(report_dir),
    ])
    assert code == 0
    assert set(doc) == {"cases", "recall", "mrr"}
    assert set(doc["recall"]) == {"5", "10"}
    assert doc["cases"] > 0
    on_disk = json.loads((report_dir / "report.json").read_text())
    assert on_disk == doc


def test_evaluate_baseline_report(corpus_dir, capsys):
    code, doc = run_json(capsys, [
        "evaluate", "--corpus", str(corpus_dir), "--baseline", "pop", "--at", "1,5",
    ])
    assert code == 0
    assert set(doc["recall"]) == {"1", "5"}
    assert 0.0 <= doc["recall"]["5"] <= 1.0


def test_recommend_ranks_items(train_dir, corpus_dir, capsys):
    corpus = load_corpus(corpus_dir)
    code, doc = run_json(capsys, [
        "recommend", "--checkpoint", str(train_dir / "epoch_0.ckpt"),
        "--corpus", str(corpus_dir),
        "--session", corpus.vocab.key(0), "--top", "3",
    ])
    assert code == 0
    assert len(doc) == 3
    scores = [row["score"] for row in doc]
    assert scores == sorted(scores, reverse=True)
    known = set(corpus.vocab.keys)
    assert all(row["item"] in known for row in doc)


def test_recommend_finds_corpus_from_run_config(train_dir, capsys):
    # the train run recorded its corpus path; recommend should pick it up
    corpus = load_corpus(json.loads(
        (train_dir / "run_config.json").read_text()
    )["paths"]["corpus"])
    code, doc = run_json(capsys, [
        "recommend", "--checkpoint", str(train_dir / "epoch_0.ckpt"),
        "--session", corpus.vocab.key(0),
    ])
    assert code == 0
    assert len(doc) == 10  # default --top
