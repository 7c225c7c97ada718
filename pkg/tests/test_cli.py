import json
import subprocess
import sys

import numpy as np
import pytest

from torsionlab.cli import COMMANDS, main
from torsionlab.complexes import GradedMetricComplex
from torsionlab.io import emit
from torsionlab.spectral import FilteredMetricComplex


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return [line.split("\t") for line in text.splitlines()]


def test_default_instances_pass(capsys):
    for cmd in ("validate", "cohomology", "torsion", "spectral", "geomcx", "wang", "gysin", "ledger"):
        code, out, _ = run(capsys, cmd, "--seed", "5")
        assert code == 0, out
        header, *body = rows(out)
        assert header == ["check", "status", "residual", "tolerance", "invariant"]
        assert body[-1][:3] == ["summary", cmd, "PASS"]


def test_output_is_deterministic(capsys):
    for cmd in ("torsion", "spectral", "gysin", "generate"):
        extra = ["--kind", "filtered"] if cmd == "generate" else []
        first = run(capsys, cmd, "--seed", "9", *extra)[1]
        assert run(capsys, cmd, "--seed", "9", *extra)[1] == first


def test_trivial_complex_torsion_is_zero(capsys, tmp_path):
    path = tmp_path / "id.json"
    emit(GradedMetricComplex.from_matrices([np.eye(2), np.eye(2)], [np.eye(2)]), path)
    code, out, _ = run(capsys, "torsion", str(path), "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["status"] == "PASS"
    assert doc["checks"][0]["quantities"]["log_t"] == 0.0


def test_spectral_on_trivial_filtration(capsys, tmp_path):
    c = GradedMetricComplex.from_matrices([[[1.0]], [[1.0]]], [[[2.0]]])
    path = tmp_path / "f.json"
    emit(FilteredMetricComplex.trivial(c), path)
    code, out, _ = run(capsys, "spectral", str(path), "--format", "json")
    assert code == 0
    q = json.loads(out)["checks"][0]["quantities"]
    assert q["rho"] == [0.0]
    assert q["log_t_gc"] == pytest.approx(np.log(2.0))


def test_invariant_violation_exits_one(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"schema_version": "1.0", "kind": "complex",
                                "payload": {"q_min": 0, "dims": [1, 1, 1], "grams": [[[1]], [[1]], [[1]]],
                                            "differentials": [[[1]], [[1]]]}}))
    code, out, _ = run(capsys, "validate", str(path))
    assert code == 1
    assert rows(out)[1][:2] == ["ingest", "FAIL"]
    assert rows(out)[1][4] == "d_squared_zero"
    assert rows(out)[-1][2] == "FAIL"


def test_tight_tolerance_fails_with_exit_one(capsys):
    code, out, _ = run(capsys, "torsion", "--seed", "3", "--tolerance", "1e-30")
    assert code == 1
    assert any(r[1] == "FAIL" for r in rows(out)[1:])


def test_usage_errors_exit_two(capsys, tmp_path):
    assert run(capsys, "nonsense")[0] == 2
    assert run(capsys, "torsion", str(tmp_path / "missing.json"))[0] == 2
    assert run(capsys, "torsion", "--tolerance", "-1")[0] == 2
    assert run(capsys, "generate")[0] == 2
    bad = tmp_path / "broken.json"
    bad.write_text("{ not json")
    code, _, err = run(capsys, "torsion", str(bad))
    assert code == 2 and "line 1" in err
    assert run(capsys, "wang", str(_write_complex(tmp_path)))[0] == 2


def _write_complex(tmp_path):
    path = tmp_path / "c.json"
    emit(GradedMetricComplex.from_matrices([np.eye(1)], []), path)
    return path


def test_generate_then_check(capsys, tmp_path):
    for kind in ("complex", "filtered", "morse_bott", "bundle", "wang", "gysin"):
        path = tmp_path / f"{kind}.json"
        assert main(["generate", "--kind", kind, "--seed", "4", "--out", str(path)]) == 0
        assert json.loads(path.read_text())["kind"] == kind
        assert run(capsys, "validate", str(path))[0] == 0


def test_figures(capsys, tmp_path):
    code, _, _ = run(capsys, "spectral", "--seed", "2", "--figures", str(tmp_path / "f"))
    assert code == 0
    assert (tmp_path / "f" / "pages.png").stat().st_size > 0
    code, out, _ = run(capsys, "suite", "--seeds", "2", "--figures", str(tmp_path / "s"))
    assert code == 0, out
    assert (tmp_path / "s" / "residuals.png").stat().st_size > 0


def test_suite_json_lists_every_check(capsys):
    code, out, _ = run(capsys, "suite", "--seeds", "3", "--format", "json")
    assert code == 0
    names = {c["name"] for c in json.loads(out)["checks"]}
    assert {"torsion_formulas", "ses_multiplicativity", "maumary", "wang", "gysin", "mapping_torus",
            "lst_ledger", "plumbing", "page_dims"} <= names


def test_console_script_entry_point():
    out = subprocess.run([sys.executable, "-m", "torsionlab.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in COMMANDS:
        assert cmd in out.stdout
