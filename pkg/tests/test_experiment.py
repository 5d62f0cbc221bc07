import json
import sys

import pytest
import yaml

from kdcorpus.errors import BackendError, ConfigError
from kdcorpus.experiment import StageError, derive_seed, load_config, run
from kdcorpus.synthetic import make_fixture, write_fixture


def base_config(data_dir):
    return {
        "schema_version": 1,
        "seed": 5,
        "langs": {"src": "xx", "tgt": "yy"},
        "corpora": {
            "para": {"type": "parallel", "src": f"{data_dir}/train.xx", "tgt": f"{data_dir}/train.yy"},
            "mono_src": {"type": "mono", "path": f"{data_dir}/mono.xx", "lang": "xx"},
            "mono_tgt": {"type": "mono", "path": f"{data_dir}/mono.yy", "lang": "yy"},
        },
        "backends": {
            "rev": {"direction": ["yy", "xx"], "toy": {"recipe": [{"kind": "P", "source": "para"}], "iterations": 5}},
            "teacher": {
                "direction": ["xx", "yy"],
                "toy": {"recipe": [{"kind": "P", "source": "para"}, {"kind": "BT", "source": "mono_tgt"}],
                        "rev": "rev", "iterations": 5},
            },
        },
        "teacher": "teacher",
        "reverse": "rev",
        "students": [
            {"name": "s1", "recipe": [{"kind": "FT_P", "source": "para"}, {"kind": "FT_BT", "source": "mono_tgt", "budget": 20}],
             "iterations": 5, "quantize": [{"mode": "log", "bits": 4}]},
        ],
        "evaluation": {
            "testset": {"src": f"{data_dir}/test.xx.sgm", "ref": f"{data_dir}/test.yy.sgm"},
            "bootstrap": {"n_resamples": 100},
        },
    }


@pytest.fixture
def workspace(tmp_path):
    fx = make_fixture(vocab_size=15, n_train=60, n_test=15, n_mono_src=30, n_mono_tgt=30, seed=2)
    write_fixture(fx, tmp_path / "data")
    return tmp_path


def write(tmp_path, cfg, name="exp.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return p


def test_derive_seed():
    assert derive_seed(1, "a") == derive_seed(1, "a")
    assert derive_seed(1, "a") != derive_seed(1, "b") != derive_seed(2, "b")
    assert 0 <= derive_seed(7, "bootstrap") < 2 ** 32


def test_run_end_to_end(workspace):
    out = workspace / "out"
    report = run(write(workspace, base_config("data")), out)
    for name in ("manifest.jsonl", "report.jsonl", "report.txt", "config.sha256", "VERSION"):
        assert (out / name).exists()
    assert [r.system for r in report.scores] == ["teacher", "s1", "s1+log4"]
    rows = [json.loads(x) for x in (out / "report.jsonl").read_text().splitlines()]
    assert rows[0]["kind"] == "header" and rows[0]["config_digest"] == report.config_digest
    assert {r["kind"] for r in rows} >= {"score", "bootstrap", "ttr", "size", "metric_config"}
    manifest = [json.loads(x) for x in (out / "manifest.jsonl").read_text().splitlines()]
    stages = [m["stage"] for m in manifest]
    assert stages[0] == "load"
    last_train = len(stages) - 1 - stages[::-1].index("train")
    assert last_train < stages.index("evaluate")
    compose = [m for m in manifest if m["stage"] == "compose" and m["recipe"] == "student:s1"]
    assert [(m["kind"], m["count"]) for m in compose] == [("FT_P", 60), ("FT_BT", 20)]
    assert (out / "data" / "bt.mono_tgt.rev.xx").exists()
    assert (out / "hyps" / "s1.yy").exists()
    assert "BLEU by original language" in (out / "report.txt").read_text()


def test_missing_corpus_fails_before_work(workspace):
    cfg = base_config("data")
    cfg["students"][0]["recipe"].append({"kind": "FT_MONO", "source": "nope"})
    with pytest.raises(ConfigError, match="nope"):
        run(write(workspace, cfg), workspace / "out")
    assert not (workspace / "out").exists()


@pytest.mark.parametrize("mutate,match", [
    (lambda c: c.update(schema_version=2), "schema_version"),
    (lambda c: c.update(teacher="ghost"), "ghost"),
    (lambda c: c["backends"]["rev"]["toy"].update(rev="teacher"), "cycle"),
    (lambda c: c["corpora"]["para"].update(src="data/missing.xx"), "not found"),
    (lambda c: c.update(reverse="teacher"), "reverse"),
    (lambda c: c["students"][0]["quantize"].append({"mode": "log", "bits": 12}), "bits"),
    (lambda c: c["evaluation"].update(metrics=["meteor"]), "meteor"),
    (lambda c: c.pop("seed"), "seed"),
])
def test_validation_errors(workspace, mutate, match):
    cfg = base_config("data")
    mutate(cfg)
    with pytest.raises(ConfigError, match=match):
        load_config(write(workspace, cfg))


def test_http_url_env_override(workspace, monkeypatch):
    cfg = base_config("data")
    cfg["backends"]["svc"] = {"direction": ["xx", "yy"], "http": "http://example.invalid/x"}
    monkeypatch.setenv("KDCORPUS_BACKEND_SVC_URL", "http://127.0.0.1:9/override")
    assert load_config(write(workspace, cfg)).backends["svc"].url == "http://127.0.0.1:9/override"


def test_backend_failure_reports_stage(workspace):
    cfg = base_config("data")
    cfg["backends"]["teacher"] = {
        "direction": ["xx", "yy"],
        "command": [sys.executable, "-c", "import sys; sys.exit(1)"],
    }
    with pytest.raises(StageError) as info:
        run(write(workspace, cfg), workspace / "out")
    err = info.value
    assert err.stage == "backends" and err.completed == ["load"]
    assert isinstance(err.cause, BackendError) and err.exit_code == 4
    manifest = (workspace / "out" / "manifest.jsonl").read_text()
    assert '"status": "failed"' in manifest


def test_command_teacher(workspace):
    cfg = base_config("data")
    cfg["backends"]["teacher"] = {"direction": ["xx", "yy"], "command": ["cat"], "batch_size": 7}
    cfg["students"][0]["quantize"] = []
    report = run(write(workspace, cfg), workspace / "out")
    usage = [m for m in report.manifest if m["stage"] == "backend_usage" and m["backend"] == "teacher"]
    assert usage[0]["lines"] > 0


def test_rerun_is_bitwise_identical(workspace):
    p = write(workspace, base_config("data"))
    run(p, workspace / "a")
    run(p, workspace / "b")
    for name in ("report.jsonl", "report.txt", "manifest.jsonl", "models/s1.tsv", "data/student.s1.yy.meta.jsonl"):
        assert (workspace / "a" / name).read_bytes() == (workspace / "b" / name).read_bytes()


def test_oversample_corpus(workspace):
    cfg = base_config("data")
    cfg["corpora"]["mono_tgt"]["oversample"] = 100
    cfg["students"][0]["recipe"][1]["budget"] = 90
    report = run(write(workspace, cfg), workspace / "out")
    load = next(m for m in report.manifest if m["stage"] == "load" and m["corpus"] == "mono_tgt")
    assert load["size"] == 100 and load["oversample_seed"] == derive_seed(5, "oversample", "mono_tgt")
