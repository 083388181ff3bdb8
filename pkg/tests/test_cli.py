"""End-to-end CLI runs: artifacts, manifests, determinism, failure modes."""

import json
import hashlib
import os

import numpy as np

from fklab.cli import main


def write_config(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run_cli(*argv):
    return main(list(argv))


def test_relations_kind(tmp_path):
    cfg = write_config(
        tmp_path, "rel.json", {"kind": "relations", "xi1": "1/8", "iota": "1/2"}
    )
    rc = run_cli("run", "--config", cfg, "--out", str(tmp_path / "out"))
    assert rc == 0
    table = json.loads((tmp_path / "out" / "rel" / "relations.json").read_text())
    assert table["nu"] == "2/3"
    assert table["beta"] == "1/12"
    assert table["gamma"] == "7/6"
    assert table["alpha"] == "2/3"
    assert table["eta"] == "1/4"
    assert table["volume_tail"] == "1/15"


def test_bundle_run_is_deterministic(tmp_path):
    cfg = {
        "kind": "bundle",
        "name": "tiny",
        "N": 8,
        "bc": "free",
        "seed": 5,
        "n_chains": 2,
        "n_samples": 12,
        "burn_in": 8,
        "thin": 1,
        "measurements": [
            {"type": "pi1", "r": 1, "R": 4},
            {"type": "two_point", "x": [2.0, 0.0]},
        ],
    }
    path = write_config(tmp_path, "tiny.json", cfg)
    out1, out2 = str(tmp_path / "o1"), str(tmp_path / "o2")
    assert run_cli("run", "--config", path, "--out", out1) == 0
    assert run_cli("run", "--config", path, "--out", out2) == 0
    a = (tmp_path / "o1" / "tiny" / "estimates.csv").read_bytes()
    b = (tmp_path / "o2" / "tiny" / "estimates.csv").read_bytes()
    assert a == b

    manifest = (tmp_path / "o1" / "tiny" / "MANIFEST.txt").read_text()
    for line in manifest.strip().splitlines():
        digest, size, rel = line.split()
        blob = (tmp_path / "o1" / "tiny" / rel).read_bytes()
        assert hashlib.sha256(blob).hexdigest() == digest
        assert int(size) == len(blob)


def test_invalid_config_exit_code(tmp_path, capsys):
    path = write_config(tmp_path, "bad.json", {"kind": "warp-drive"})
    rc = run_cli("run", "--config", path, "--out", str(tmp_path / "out"))
    assert rc == 2
    err = capsys.readouterr().err
    assert err.startswith("error: ")
    assert not (tmp_path / "out" / "bad").exists()  # no partial artifacts


def test_missing_output_dir_created(tmp_path):
    cfg = write_config(
        tmp_path, "rel.json", {"kind": "relations", "xi1": "1/8", "iota": "1/2"}
    )
    deep = str(tmp_path / "a" / "b")
    os.makedirs(os.path.dirname(deep), exist_ok=True)
    assert run_cli("run", "--config", cfg, "--out", deep) == 0
    assert (tmp_path / "a" / "b" / "rel" / "relations.json").exists()


def test_sample_kind_dump_parses(tmp_path):
    from fklab.sampler import load_samples

    cfg = write_config(
        tmp_path,
        "rle.json",
        {"kind": "sample", "name": "dump", "N": 2, "bc": "free", "seed": 3,
         "n_samples": 6, "burn_in": 4, "thin": 1},
    )
    out = str(tmp_path / "out")
    assert run_cli("run", "--config", cfg, "--out", out) == 0
    records = list(load_samples(os.path.join(out, "dump", "samples.rle")))
    assert len(records) == 6
    assert all(bits.shape == (40,) for _, bits in records)


def test_heights_kind(tmp_path):
    cfg = write_config(
        tmp_path,
        "h.json",
        {"kind": "heights", "name": "h", "N": 4, "bc": "free", "seed": 2,
         "burn_in": 16, "thin": 1},
    )
    out = str(tmp_path / "out")
    assert run_cli("run", "--config", cfg, "--out", out) == 0
    lines = (tmp_path / "out" / "h" / "heights.txt").read_text().splitlines()
    mat = np.array([[int(v) for v in row.split()] for row in lines[2:]])
    assert mat.shape == (17, 17)
    loops_text = (tmp_path / "out" / "h" / "loops.txt").read_text()
    assert loops_text.count("loop ") >= 1


def test_arms_and_fit_pipeline(tmp_path):
    arms = {
        "kind": "arms",
        "name": "arms",
        "N": 16,
        "bc": "free",
        "seed": 11,
        "n_chains": 2,
        "n_samples": 60,
        "burn_in": 24,
        "thin": 1,
        "R": 8,
        "r_ladder": [1, 2, 3, 4],
    }
    path = write_config(tmp_path, "arms.json", arms)
    out = str(tmp_path / "out")
    assert run_cli("run", "--config", path, "--out", out) == 0
    est = json.loads((tmp_path / "out" / "arms" / "estimates.json").read_text())
    assert "pi1_1_8" in est and "pi2_4_8" in est

    fit_cfg = {
        "kind": "fit",
        "name": "fit",
        "seed": 0,
        "observable": "pi1",
        "R": 8,
        "r_ladder": [1, 2, 3, 4],
        "N": 16,
        "drop_largest": 0,
        "input": os.path.join(out, "arms", "series.npz"),
    }
    path2 = write_config(tmp_path, "fit.json", fit_cfg)
    assert run_cli("run", "--config", path2, "--out", out) == 0
    fit = json.loads((tmp_path / "out" / "fit" / "fit.json").read_text())
    assert "slope" in fit and len(fit["points"]) == 4


def test_mformula_kind(tmp_path):
    cfg = {
        "kind": "mformula",
        "name": "mf",
        "N": 16,
        "bc": "free",
        "seed": 4,
        "n_chains": 1,
        "n_samples": 40,
        "burn_in": 24,
        "thin": 1,
        "patterns": [
            {"centers": [[0.0, 0.0], [6.0, 0.0]], "charges": [1, -1], "eps": 1.5}
        ],
    }
    path = write_config(tmp_path, "mf.json", cfg)
    out = str(tmp_path / "out")
    assert run_cli("run", "--config", path, "--out", out) == 0
    text = (tmp_path / "out" / "mf" / "mformula.csv").read_text()
    header = text.splitlines()[0]
    assert header.endswith("gff_prediction,relative_error")


def test_report_collects_experiments(tmp_path, capsys):
    cfg = write_config(
        tmp_path, "rel.json", {"kind": "relations", "xi1": "1/8", "iota": "1/2"}
    )
    out = str(tmp_path / "res")
    run_cli("run", "--config", cfg, "--out", out)
    assert run_cli("report", "--results", out) == 0
    report = json.loads((tmp_path / "res" / "report.json").read_text())
    assert isinstance(report, dict)


def test_verify_reports_failure(monkeypatch, capsys):
    import fklab.verify as V

    monkeypatch.setattr(
        V, "SUITES", [("broken-golden", lambda: (False, "golden mismatch"))]
    )
    assert V.run_all() == 1
    out = capsys.readouterr().out
    assert "FAIL  broken-golden" in out
