import json
import subprocess
import sys
from pathlib import Path

import pytest

from kdcorpus.cli import main
from kdcorpus.synthetic import make_fixture, write_fixture

SMOKE = str(Path(__file__).resolve().parents[1] / "configs" / "smoke.yaml")


@pytest.fixture
def data(tmp_path):
    fx = make_fixture(vocab_size=12, n_train=40, n_test=10, n_mono_src=10, n_mono_tgt=10, seed=4)
    write_fixture(fx, tmp_path)
    return tmp_path


def test_score_identical(tmp_path, capsys):
    f = tmp_path / "r.txt"
    f.write_text("the cat sat on the mat\na quick brown fox jumps\n", encoding="utf-8")
    assert main(["score", "--metric", "bleu", "--hyp", str(f), "--ref", str(f)]) == 0
    assert capsys.readouterr().out.strip() == "100.0"
    assert main(["score", "--hyp", str(f), "--ref", str(f), "--json"]) == 0
    rows = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert [r["metric"] for r in rows] == ["bleu", "chrf", "ter"]


def test_split_origlang(sgml_fixture, capsys):
    src, ref = sgml_fixture
    assert main(["split-origlang", str(src), "--ref", str(ref), "--src-lang", "tr", "--tgt-lang", "en"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[-1] == "buckets 4/2/2"
    assert out[:3] == ["src\t4", "tgt\t2", "other\t2"]


def test_split_origlang_needs_langs(sgml_fixture):
    assert main(["split-origlang", str(sgml_fixture[0])]) == 2


def test_ftbt_identity_sidecars(tmp_path, capsys):
    (tmp_path / "mono.en").write_text("one two three\nfour five six\n", encoding="utf-8")
    prefix = tmp_path / "rt"
    rc = main(["ftbt", "--rev", "identity", "--fwd", "identity", "--in", str(tmp_path / "mono.en"),
               "--out", str(prefix), "--src-lang", "de", "--tgt-lang", "en"])
    assert rc == 0
    src = (tmp_path / "rt.de").read_text().splitlines()
    tgt = (tmp_path / "rt.en").read_text().splitlines()
    assert src == tgt == ["one two three", "four five six"]
    src_meta = [json.loads(x) for x in (tmp_path / "rt.de.meta.jsonl").read_text().splitlines()]
    tgt_meta = [json.loads(x) for x in (tmp_path / "rt.en.meta.jsonl").read_text().splitlines()]
    assert src_meta[0]["provenance"]["depth"] == 1 and tgt_meta[0]["provenance"]["depth"] == 2
    assert tgt_meta[0]["provenance"]["producer"] == "fwd" and tgt_meta[0]["origin_lang"] == "en"


def test_bt_and_ft(tmp_path):
    (tmp_path / "m.en").write_text("a b c\n", encoding="utf-8")
    assert main(["bt", "--rev", "identity", "--in", str(tmp_path / "m.en"), "--out", str(tmp_path / "bt"),
                 "--src-lang", "de", "--tgt-lang", "en"]) == 0
    assert main(["ft", "--fwd", "identity", "--in", str(tmp_path / "m.en"), "--out", str(tmp_path / "ft"),
                 "--src-lang", "en", "--tgt-lang", "de"]) == 0
    assert (tmp_path / "bt.de").read_text() == (tmp_path / "ft.de").read_text() == "a b c\n"
    assert main(["ft", "--fwd", "identity", "--out", str(tmp_path / "x")]) == 2


def test_translate_with_command(tmp_path):
    (tmp_path / "in.txt").write_text("hello\nworld\n", encoding="utf-8")
    cmd = f"{sys.executable} -c \"import sys; [print(l.strip().upper()) for l in sys.stdin]\""
    assert main(["translate", "--backend", cmd, "--in", str(tmp_path / "in.txt"), "--out", str(tmp_path / "o.txt"),
                 "--batch-size", "1"]) == 0
    assert (tmp_path / "o.txt").read_text() == "HELLO\nWORLD\n"


def test_clean(tmp_path):
    (tmp_path / "s").write_text("a b c\na\nd e f\n", encoding="utf-8")
    (tmp_path / "t").write_text("x y z\nx\nu v\n", encoding="utf-8")
    rc = main(["clean", "--src", str(tmp_path / "s"), "--tgt", str(tmp_path / "t"), "--out", str(tmp_path / "c"),
               "--src-lang", "de", "--tgt-lang", "en", "--min-words", "2"])
    assert rc == 0
    assert (tmp_path / "c.de").read_text() == "a b c\nd e f\n"


def test_toy_model_commands(data, capsys):
    model = data / "m.tsv"
    assert main(["train-toy", "--src", str(data / "train.xx"), "--tgt", str(data / "train.yy"),
                 "--src-lang", "xx", "--tgt-lang", "yy", "--iterations", "3", "--out", str(model)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("iteration 1\tlog-likelihood")
    assert main(["prune", "--model", str(model), "--top-k", "1", "--out", str(data / "p.tsv"),
                 "--src-lang", "xx", "--tgt-lang", "yy"]) == 0
    capsys.readouterr()
    assert main(["quantize", "--model", str(model), "--mode", "log", "--bits", "4", "--out", str(data / "q.tsv"),
                 "--src-lang", "xx", "--tgt-lang", "yy"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["config"] == "log4" and rep["distinct_values"] <= 16
    assert rep["after"]["packed_bytes"] < rep["before"]["packed_bytes"]
    assert main(["translate", "--backend", f"toy:{model}", "--in", str(data / "mono.xx"),
                 "--out", str(data / "o.yy"), "--src-lang", "xx", "--tgt-lang", "yy"]) == 0


def test_ttr_and_bootstrap(data, capsys):
    ref = data / "ref.txt"
    ref.write_text("a b c d\ne f g h\ni j k l\n", encoding="utf-8")
    assert main(["ttr", "--in", str(ref)]) == 0
    assert json.loads(capsys.readouterr().out)["ratio"] == 1.0
    assert main(["bootstrap", "--hyp-a", str(ref), "--hyp-b", str(ref), "--ref", str(ref), "--seed", "1",
                 "--n-resamples", "50"]) == 0
    assert json.loads(capsys.readouterr().out)["p_value"] == 1.0


def test_ttr_by_origin(sgml_fixture, tmp_path, capsys):
    src, ref = sgml_fixture
    hyp = tmp_path / "h.txt"
    hyp.write_text("a b\n" * 8, encoding="utf-8")
    assert main(["ttr", "--in", str(hyp), "--testset", str(src), "--ref", str(ref)]) == 0
    rows = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert [r["grouping"] for r in rows] == ["tr", "en", "cs"]


def test_exit_codes(tmp_path, data):
    assert main(["score", "--hyp", str(tmp_path / "nope"), "--ref", str(tmp_path / "nope")]) == 3
    with pytest.raises(SystemExit) as e:
        main(["score", "--bogus"])
    assert e.value.code == 2
    assert main(["probe", "--backend", "http://127.0.0.1:9/x"]) == 4
    assert main(["probe", "--backend", "identity"]) == 0
    cfg = tmp_path / "c.yaml"
    cfg.write_text("schema_version: 1\nseed: 1\n", encoding="utf-8")
    assert main(["run", str(cfg)]) == 2
    assert main(["compose", "--config", SMOKE, "--student", "ghost", "--out", str(tmp_path)]) == 2


def test_compose_smoke(tmp_path, capsys):
    assert main(["compose", "--config", SMOKE, "--student", "ft_all", "--out", str(tmp_path)]) == 0
    assert "composed" in capsys.readouterr().out
    assert (tmp_path / "manifest.jsonl").exists()


def test_console_script_version():
    out = subprocess.run([sys.executable, "-m", "kdcorpus", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("kdcorpus ")
