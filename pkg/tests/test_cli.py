import json
import shutil

import pytest

from moonvol.cli import main, render_report

from conftest import GOLDEN

GOLDEN_FILES = ("features.csv", "r2.csv", "correlations.csv", "plotdata_GME.csv", "drops.log")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def pipeline_out(tmp_path_factory, fixture_dir):
    out = tmp_path_factory.mktemp("pipeline")
    assert main(["pipeline", "--inputs", str(fixture_dir), "--coefficients", "--out", str(out)]) == 0
    return out


@pytest.mark.parametrize("name", GOLDEN_FILES)
def test_pipeline_matches_golden(pipeline_out, name):
    assert (pipeline_out / name).read_bytes() == (GOLDEN / name).read_bytes()


def test_pipeline_manifest_and_coefficients(pipeline_out):
    manifest = json.loads((pipeline_out / "manifest.json").read_text())
    assert manifest["command"] == "pipeline"
    assert all(len(h) == 64 for h in manifest["inputs"].values())
    coef = json.loads((pipeline_out / "coefficients.json").read_text())
    assert set(coef["GME"]) == {f"M{i}" for i in range(1, 9)}
    assert "MOON1_lag" in coef["GME"]["M5"]["coefficients"]


def test_ingest(capsys, tmp_path, fixture_dir):
    code, out, _ = run(capsys, "ingest", "--inputs", fixture_dir, "--out", tmp_path / "norm")
    assert code == 0 and "tweets=" in out
    assert (tmp_path / "norm" / "ohlc.csv").read_bytes() == (fixture_dir / "ohlc.csv").read_bytes()
    assert (tmp_path / "norm" / "calendar.txt").exists()


def test_score_and_vol(capsys, tmp_path, fixture_dir):
    code, out, _ = run(capsys, "score", "--tweets", fixture_dir / "tweets.jsonl")
    assert code == 0 and out.splitlines()[0] == "id,compound,ternary"
    code, out, _ = run(capsys, "vol", "--ohlc", fixture_dir / "ohlc.csv", "--rs-form", "paper-minus",
                       "--out", tmp_path / "vol.csv")
    lines = (tmp_path / "vol.csv").read_text().splitlines()
    assert code == 0 and lines[0] == "date,parkinson,gk,rs,composite,log_vol" and len(lines) == 121


def test_features_fit_report(capsys, tmp_path, fixture_dir):
    assert run(capsys, "features", "--inputs", fixture_dir, "--out", tmp_path / "f")[0] == 0
    assert (tmp_path / "f" / "features.csv").read_bytes() == (GOLDEN / "features.csv").read_bytes()
    code, out, _ = run(capsys, "fit", "--features", f"GME={tmp_path / 'f' / 'features.csv'}", "--out", tmp_path / "fit")
    assert code == 0 and out.startswith("GME: M1=")
    assert (tmp_path / "fit" / "r2.csv").read_bytes() == (GOLDEN / "r2.csv").read_bytes()
    code, out, _ = run(capsys, "report", "--r2", tmp_path / "fit" / "r2.csv",
                       "--correlations", tmp_path / "fit" / "correlations.csv")
    assert code == 0 and "best: M8" in out and "Pearson correlations (GME)" in out


def test_features_flags_change_output(capsys, tmp_path, fixture_dir):
    code, _, _ = run(capsys, "features", "--inputs", fixture_dir, "--log-base", "10", "--merge-forward",
                     "--aggregator", "mean", "--include-overnight", "--out", tmp_path / "f")
    assert code == 0
    assert (tmp_path / "f" / "features.csv").read_bytes() != (GOLDEN / "features.csv").read_bytes()


def test_simulate(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--preset", "gme", "--seed", 1, "--n-days", 20, "--out", tmp_path / "s")
    assert code == 0 and out.startswith("days=20")
    assert {p.name for p in (tmp_path / "s").iterdir()} >= {"ohlc.csv", "tweets.jsonl", "scenario.json", "manifest.json"}
    cfg = tmp_path / "s" / "scenario.json"
    assert run(capsys, "simulate", "--config", cfg, "--out", tmp_path / "t")[0] == 0
    assert (tmp_path / "t" / "tweets.jsonl").read_bytes() == (tmp_path / "s" / "tweets.jsonl").read_bytes()


def test_missing_lexicon(capsys, tmp_path, fixture_dir):
    code, _, err = run(capsys, "pipeline", "--inputs", fixture_dir, "--lexicon", tmp_path / "nope.tsv",
                       "--out", tmp_path / "o")
    assert code == 1 and "lexicon not found" in err
    assert not (tmp_path / "o").exists()


def test_empty_tweets(capsys, tmp_path, fixture_dir):
    inputs = tmp_path / "in"
    shutil.copytree(fixture_dir, inputs)
    (inputs / "tweets.jsonl").write_text("")
    code, _, err = run(capsys, "pipeline", "--inputs", inputs, "--out", tmp_path / "o")
    assert code == 1 and "pipeline: features:" in err
    assert not (tmp_path / "o").exists()


def test_bad_ohlc_reports_line(capsys, tmp_path):
    bad = tmp_path / "ohlc.csv"
    bad.write_text("date,open,high,low,close\n2021-01-27,95,90,100,95\n")
    code, _, err = run(capsys, "vol", "--ohlc", bad)
    assert code == 1 and "line 2" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "report", "--r2", tmp_path / "r2.csv", "--correlations", tmp_path / "c.csv")
    assert code == 1 and "report" in err


R2 = "symbol,M1,M2,M7,M8\nGME,0.2,0.25,{m7},{m8}\n"


def test_report_best_and_tie():
    assert "best: M8\n" in render_report(R2.format(m7=0.3, m8=0.4))
    tied = render_report(R2.format(m7=0.31249, m8=0.3121))
    assert "best: M7, M8 (tie)" in tied
    assert tied.count("*") == 2 + 1  # two flagged cells plus the legend


def test_report_empty(capsys, tmp_path):
    (tmp_path / "r2.csv").write_text("symbol,M1\n")
    (tmp_path / "c.csv").write_text("")
    code, _, err = run(capsys, "report", "--r2", tmp_path / "r2.csv", "--correlations", tmp_path / "c.csv")
    assert code == 1 and "no model rows" in err
