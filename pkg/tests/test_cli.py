import copy
import csv
import json
import os
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from cmgauge.cli import EXIT_CHECK, EXIT_COLLISION, EXIT_CONFIG, EXIT_OK, OUTPUT_ENV, main
from cmgauge.verify import load_corpus


@pytest.fixture(autouse=True)
def _isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(OUTPUT_ENV, raising=False)


def _system(name):
    return next(copy.deepcopy(e.raw["system"]) for e in load_corpus() if e.name == name)


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def _free_doc(fmt="csv"):
    return {
        "schema_version": 1,
        "system": {"variant": {"type": "rational", "S0": [[[0, 0], [0, 0]], [[0, 0], [0, 0]]]},
                   "g": 1.0, "q0": [[-1.0, 0], [1.0, 0]], "p0": [[0.5, 0], [0.25, 0]]},
        "solver": "exact",
        "output": {"t_max": 2.0, "dt_out": 0.5, "format": fmt, "path": f"out/free.{fmt}"},
    }


def _collision_doc():
    doc = _free_doc("jsonl")
    doc["system"]["variant"]["S0"] = [[[0, 0], [-0.5, 0]], [[0.5, 0], [0, 0]]]
    doc["system"]["q0"] = [[-0.5, 0], [0.5, 0]]
    doc["system"]["p0"] = [[0, 0], [0, 0]]
    doc["output"] = {"t_max": 3.0, "dt_out": 0.1, "format": "jsonl", "path": "out/hit.jsonl"}
    return doc


def _read_csv(path):
    lines = path.read_text().splitlines()
    header = [ln for ln in lines if ln.startswith("# ")]
    body = list(csv.reader([ln for ln in lines if not ln.startswith("# ")]))
    return header, body[0], np.array(body[1:], dtype=float)


class TestRun:
    def test_free_particles_csv(self, tmp_path):
        assert main(["run", _write(tmp_path / "c.json", _free_doc())]) == EXIT_OK
        header, cols, data = _read_csv(tmp_path / "out" / "free.csv")
        assert any(h.startswith("# config_sha256: ") for h in header)
        assert cols[:3] == ["t", "q1_re", "q1_im"]
        t = data[:, cols.index("t")]
        np.testing.assert_allclose(t, [0, 0.5, 1, 1.5, 2])
        np.testing.assert_allclose(data[:, cols.index("q1_re")], -1.0 + 0.5 * t, atol=1e-13)
        np.testing.assert_allclose(data[:, cols.index("q2_re")], 1.0 + 0.25 * t, atol=1e-13)
        np.testing.assert_allclose(data[:, cols.index("energy_re")], 0.5 * (0.25 + 0.0625))

    def test_jsonl(self, tmp_path):
        assert main(["run", _write(tmp_path / "c.json", _free_doc("jsonl"))]) == EXIT_OK
        lines = (tmp_path / "out" / "free.jsonl").read_text().splitlines()
        head = json.loads(lines[0])
        assert head["schema_version"] == 1 and head["source"] == "exact"
        recs = [json.loads(ln) for ln in lines[1:]]
        assert [r["t"] for r in recs] == [0.0, 0.5, 1.0, 1.5, 2.0]
        assert recs[-1]["q"][0] == pytest.approx([0.0, 0.0], abs=1e-13)

    def test_both_writes_three_files(self, tmp_path):
        doc = {"schema_version": 1, "system": _system("trig_N2_real"), "solver": "both",
               "output": {"times": [0.0, 0.5, 1.0], "path": "cmp.csv"}}
        assert main(["run", _write(tmp_path / "c.json", doc)]) == EXIT_OK
        for name in ("cmp.exact.csv", "cmp.oracle.csv", "cmp.compare.json"):
            assert (tmp_path / name).exists()
        rep = json.loads((tmp_path / "cmp.compare.json").read_text())["report"]
        assert rep["passed"] and rep["check"] == "crosscheck"

    def test_malformed_config_writes_nothing(self, tmp_path):
        doc = _free_doc()
        doc["system"]["mass"] = 2.0
        assert main(["run", _write(tmp_path / "c.json", doc)]) == EXIT_CONFIG
        assert not (tmp_path / "out").exists()
        assert main(["run", str(tmp_path / "missing.json")]) == EXIT_CONFIG
        doc = _free_doc()
        doc["system"]["q0"] = [[0, 0], [0, 0]]
        assert main(["run", _write(tmp_path / "c.json", doc)]) == EXIT_CONFIG
        assert not (tmp_path / "out").exists()

    def test_collision_keeps_partial_output(self, tmp_path):
        assert main(["run", _write(tmp_path / "c.json", _collision_doc())]) == EXIT_COLLISION
        lines = (tmp_path / "out" / "hit.jsonl").read_text().splitlines()
        head = json.loads(lines[0])
        assert any(h.startswith("status: collision") for h in head["header"])
        ts = [json.loads(ln)["t"] for ln in lines[1:]]
        assert 0 < len(ts) < 31 and ts[0] == 0.0

    def test_output_dir_precedence(self, tmp_path, monkeypatch):
        cfg = _write(tmp_path / "c.json", _free_doc())
        monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
        assert main(["run", cfg]) == EXIT_OK
        assert (tmp_path / "env" / "free.csv").exists()
        assert main(["run", cfg, "--output-dir", str(tmp_path / "flag")]) == EXIT_OK
        assert (tmp_path / "flag" / "free.csv").exists()

    def test_byte_identical_reruns(self, tmp_path):
        doc = {"schema_version": 1, "system": _system("delta_N2_m1"), "solver": "exact",
               "output": {"t_max": 1.0, "dt_out": 0.25, "path": "a.csv"}}
        cfg = _write(tmp_path / "c.json", doc)
        main(["run", cfg])
        first = (tmp_path / "a.csv").read_bytes()
        main(["run", cfg])
        assert (tmp_path / "a.csv").read_bytes() == first


class TestVerify:
    def test_suite_report(self, tmp_path, capsys):
        assert main(["verify", "lax", "--output-dir", str(tmp_path / "r")]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.count("PASS lax") >= 4
        body = json.loads((tmp_path / "r" / "verify-lax.json").read_text())
        assert body["passed"] and body["suite"] == "lax"

    def test_deterministic_report(self, tmp_path):
        main(["verify", "gauss", "--output-dir", "a"])
        main(["verify", "gauss", "--output-dir", "b"])
        assert (tmp_path / "a" / "verify-gauss.json").read_bytes() == \
            (tmp_path / "b" / "verify-gauss.json").read_bytes()

    def test_corrupted_corpus_names_instance(self, tmp_path, capsys):
        doc = json.loads(json.dumps({"schema_version": 1,
                                     "instances": [copy.deepcopy(e.raw) for e in load_corpus()]}))
        victim = doc["instances"][2]
        victim["bounds"]["q"] = 1e-30
        path = _write(tmp_path / "corpus.json", doc)
        assert main(["verify", "crosscheck", "--corpus", path]) == EXIT_CHECK
        err = capsys.readouterr().err
        assert f"[{victim['name']}]" in err

    def test_unknown_suite_is_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["verify", "everything"])
        assert info.value.code == EXIT_CONFIG

    def test_unreadable_corpus(self, tmp_path):
        assert main(["verify", "gauss", "--corpus", str(tmp_path / "nope.json")]) == EXIT_CONFIG


class TestIdentities:
    def test_fast_and_passing(self, tmp_path):
        t0 = time.perf_counter()
        assert main(["identities", "--output-dir", str(tmp_path)]) == EXIT_OK
        assert time.perf_counter() - t0 < 10.0
        body = json.loads((tmp_path / "identities.json").read_text())
        assert body["passed"] and body["samples"] == 100


@pytest.mark.skipif(shutil.which("cmgauge") is None, reason="console script not installed")
def test_console_script(tmp_path):
    env = dict(os.environ, **{OUTPUT_ENV: str(tmp_path)})
    res = subprocess.run(["cmgauge", "identities", "--samples", "10"], env=env,
                         capture_output=True, text=True, timeout=60)
    assert res.returncode == 0, res.stderr
    assert res.stdout.startswith("PASS identities")
    res = subprocess.run([sys.executable, "-m", "cmgauge.cli", "--version"],
                         capture_output=True, text=True, timeout=60)
    assert res.stdout.strip() == "cmgauge 0.1.0"
