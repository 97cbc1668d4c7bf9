import json
import shutil
import subprocess
import sys

import pytest

from psyling import lda
from psyling.cli import main
from psyling.synthetic import bundled_fixture


@pytest.fixture
def fx(tmp_path):
    return shutil.copytree(bundled_fixture(), tmp_path / "fx")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    summary = json.loads(out.strip().splitlines()[-1]) if code == 0 else None
    return code, summary, err


def test_experiment_smoke(fx, capsys):
    code, summary, _ = run(capsys, "experiment", "--config", fx / "config.toml")
    assert code == 0 and summary["status"] == "ok" and summary["rows"] == 9
    assert (fx / "out" / "report.csv").exists()
    assert (fx / "out" / "rmse_vs_k.csv").exists()


def test_experiment_output_dir_and_seed_override(fx, tmp_path, capsys):
    code, _, _ = run(capsys, "experiment", "--config", fx / "config.toml", "--seed", 3, "--output-dir", tmp_path / "o")
    assert code == 0
    meta = json.loads((tmp_path / "o" / "metadata.json").read_text())
    assert meta["seed"] == 3


def test_stepwise_workflow(fx, tmp_path, capsys):
    corpus, liwc, model, theta, inferred = (tmp_path / n for n in
                                            ("c.jsonl", "liwc.csv", "m.json", "theta.csv", "inf.csv"))
    code, s, _ = run(capsys, "ingest", "--messages", fx / "messages.jsonl", "--scores", fx / "scores.csv",
                     "--min-bytes", 0, "--out", corpus)
    assert code == 0 and s["users"] == 60

    code, s, _ = run(capsys, "features", "liwc", "--corpus", corpus, "--lexicon", fx / "lexicon.dic", "--out", liwc)
    assert code == 0 and s["categories"] == 4

    code, s, _ = run(capsys, "topics", "train", "--corpus", corpus, "--k", 3, "--iterations", 50,
                     "--out-model", model, "--out-theta", theta, "--seed", 1)
    assert code == 0 and s["K"] == 3

    code, s, _ = run(capsys, "topics", "infer", "--model", model, "--corpus", corpus, "--iterations", 20,
                     "--burn-in", 5, "--out", inferred)
    assert code == 0 and s["docs"] == 60

    code, s, _ = run(capsys, "evaluate", "--features", liwc, theta, "--scores", fx / "scores.csv",
                     "--cv-folds", 5, "--out-dir", tmp_path / "ev")
    assert code == 0 and s["mean_rmse"] > 0
    dump = json.loads((tmp_path / "ev" / "model.json").read_text())
    assert dump["selected_features"] == s["selected"]


def test_topics_train_single_topic(fx, tmp_path, capsys):
    corpus = tmp_path / "c.jsonl"
    run(capsys, "ingest", "--messages", fx / "messages.jsonl", "--min-bytes", 0, "--out", corpus)
    code, s, _ = run(capsys, "topics", "train", "--corpus", corpus, "--k", 1, "--iterations", 5,
                     "--out-model", tmp_path / "m.json")
    assert code == 0
    model = lda.load_model(tmp_path / "m.json")
    assert model.K == 1 and model.n_kw.sum() == model.n_k[0]


def test_missing_score_file_names_path(fx, tmp_path, capsys):
    missing = tmp_path / "no_such_scores.csv"
    code, _, err = run(capsys, "evaluate", "--features", fx / "lexicon.dic", "--scores", missing,
                       "--out-dir", tmp_path / "ev")
    assert code != 0
    assert str(missing) in err and len(err.strip().splitlines()) == 1


def test_experiment_missing_score_file(fx, capsys):
    (fx / "scores.csv").unlink()
    code, _, err = run(capsys, "experiment", "--config", fx / "config.toml")
    assert code == 1 and "scores.csv" in err


def test_bad_config_key(tmp_path, capsys):
    (tmp_path / "c.toml").write_text("[topics]\nkk = 1\n", encoding="utf-8")
    code, _, err = run(capsys, "experiment", "--config", tmp_path / "c.toml")
    assert code == 1 and err.startswith("psyling experiment: error:") and "kk" in err


def test_report_regenerates_tables(fx, capsys):
    run(capsys, "experiment", "--config", fx / "config.toml")
    (fx / "out" / "max_r_vs_k.csv").unlink()
    code, s, _ = run(capsys, "report", "--config", fx / "config.toml")
    assert code == 0 and s["rows"] == 9
    assert (fx / "out" / "max_r_vs_k.csv").exists()


def test_every_subcommand_accepts_seed_and_config():
    from psyling.cli import build_parser
    parser = build_parser()
    for argv in (["ingest", "--out", "x"], ["features", "liwc", "--corpus", "c", "--out", "x"],
                 ["topics", "train", "--corpus", "c", "--out-model", "m"],
                 ["topics", "infer", "--model", "m", "--corpus", "c", "--out", "x"],
                 ["evaluate", "--features", "f", "--out-dir", "d"], ["experiment"], ["report"]):
        args = parser.parse_args(argv + ["--seed", "5", "--config", "cfg.toml"])
        assert args.seed == 5 and args.config == "cfg.toml"


def test_console_entry_point(fx):
    proc = subprocess.run([sys.executable, "-m", "psyling.cli", "experiment", "--config", str(fx / "config.toml")],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout.strip().splitlines()[-1])["command"] == "experiment"
