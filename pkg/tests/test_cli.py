import json
import subprocess
import sys
from importlib import resources

import numpy as np
import pytest

from torsionlab.cli import main, parse_complex_arg, parse_coeuler
from torsionlab.errors import ValidationError
from torsionlab.problem_io import SCHEMA

CORPUS = resources.files("torsionlab") / "corpus"


def run_json(capsys, *argv):
    status = main(list(argv) + ["--json"])
    lines = [json.loads(line) for line in capsys.readouterr().out.splitlines() if line.strip()]
    return status, lines


def scalar(pair):
    return complex(pair[0], pair[1])


def sidecar_checks():
    out = []
    for path in sorted(CORPUS.iterdir()):
        if path.name.endswith(".expected.json"):
            spec = json.loads(path.read_text())
            for i, chk in enumerate(spec["checks"]):
                out.append(pytest.param(spec["problem"], chk, id=f"{spec['problem']}-{i}-{chk['command']}"))
    return out


@pytest.mark.parametrize("problem,check", sidecar_checks())
def test_corpus_expected_values(capsys, problem, check):
    assert check["provenance"] in {"closed-form", "derived"}
    status, recs = run_json(capsys, check["command"], str(CORPUS / problem), *check["args"])
    assert status == 0
    got = scalar(recs[0]["value"][check["field"]])
    expected = scalar(check["expected"])
    assert abs(got - expected) <= check["rtol"] * abs(expected)


def test_relative_record_fields(capsys):
    status, (rec,) = run_json(capsys, "relative", str(CORPUS / "circle_c03.json"))
    assert status == 0 and rec["status"] == "ok"
    assert set(rec["value"]) >= {"S", "abs_S_minus_1", "S_minus_1"}
    assert rec["input_digest"].startswith("sha256:")
    assert rec["tolerances"] == {"tol": 1e-8}


def test_zeta_with_z_flag(capsys):
    status, (rec,) = run_json(capsys, "zeta", str(CORPUS / "torus_anosov.json"), "--z", "0.5")
    assert status == 0
    assert abs(scalar(rec["value"]["zeta"]) + 1) <= 1e-10
    assert abs(scalar(rec["value"]["torsion"]) - 1) <= 1e-10


def test_torsion_direct_ex34(capsys):
    status, (rec,) = run_json(capsys, "torsion-direct", str(CORPUS / "ex34_z3.json"))
    assert status == 0 and abs(scalar(rec["value"]["torsion"]) + 9) <= 1e-9
    assert rec["value"]["basis"] == "canonical-unit"


def test_determinism(capsys):
    outputs = []
    for _ in range(2):
        _, recs = run_json(capsys, "analytic", str(CORPUS / "circle_winding1.json"), "--coeuler", "canonical")
        for r in recs:
            r.pop("timestamp")
        outputs.append(json.dumps(recs, sort_keys=True))
    assert outputs[0] == outputs[1]


def test_human_output(capsys):
    assert main(["zeta", str(CORPUS / "torus_anosov.json")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("zeta  [ok]") and "torsion" in out


def test_out_file(tmp_path, capsys):
    out = tmp_path / "records.jsonl"
    assert main(["zeta", str(CORPUS / "point_fiber.json"), "--out", str(out)]) == 0
    assert main(["zeta", str(CORPUS / "point_fiber.json"), "--z=2,0", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2
    assert abs(scalar(json.loads(lines[1])["value"]["zeta"]) + 1) <= 1e-12


def _write(tmp_path, doc, name="p.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_exit_codes(tmp_path, capsys):
    bad_complex = {"schema": SCHEMA, "kind": "complex",
                   "payload": {"dims": [1, 1, 1], "differentials": [[[1]], [[1]]]}}
    status, (rec,) = run_json(capsys, "torsion-direct", _write(tmp_path, bad_complex))
    assert status == 2 and rec["error"]["code"] == "VALIDATION_ERROR"
    assert "d_squared_nonzero at degree 0" in rec["error"]["message"]
    status, (rec,) = run_json(capsys, "torsion-direct", _write(tmp_path, "not json", "x.json"))
    assert status == 4 and rec["error"]["code"] == "PARSE_ERROR"
    trivial = {"schema": SCHEMA, "kind": "circle", "payload": {"rank": 1, "a": {"0": 0}}}
    status, (rec,) = run_json(capsys, "analytic", _write(tmp_path, trivial))
    assert status == 3 and rec["error"]["code"] == "NOT_ACYCLIC"
    status, (rec,) = run_json(capsys, "torsion-spectral", str(CORPUS / "ex32_a2_q0.json"), "--radius", "4")
    assert status == 3 and rec["error"]["code"] == "CONTOUR_ON_SPECTRUM"
    status, (rec,) = run_json(capsys, "zeta", str(CORPUS / "circle_c03.json"))
    assert status == 2 and "command_kind_mismatch" in rec["error"]["message"]


def test_non_acyclic_requires_basis(tmp_path, capsys):
    doc = {"schema": SCHEMA, "kind": "complex", "payload": {"dims": [1, 1], "differentials": [[[0]]]}}
    path = _write(tmp_path, doc)
    status, (rec,) = run_json(capsys, "torsion-direct", path)
    assert status == 3 and rec["error"]["code"] == "NOT_ACYCLIC"
    basis = _write(tmp_path, {"cohomology_basis": [[[2]], [[1]]]}, "basis.json")
    status, (rec,) = run_json(capsys, "torsion-direct", path, "--basis", basis)
    # form on det H evaluated at (2 e0) (x) (e1)^*: 2^2 / 1^2
    assert status == 0 and abs(scalar(rec["value"]["torsion"]) - 4) <= 1e-12
    assert rec["value"]["basis"] != "canonical-unit"


def test_spectral_default_radius(capsys):
    status, (rec,) = run_json(capsys, "torsion-spectral", str(CORPUS / "ex34_z1p1i.json"))
    assert status == 0 and abs(scalar(rec["value"]["torsion"]) + 2j) <= 1e-9


def test_combinatorial_euler_offset(capsys):
    status, (rec,) = run_json(capsys, "combinatorial", str(CORPUS / "circle_c03.json"), "--euler-offset", "1")
    A = np.exp(0.6 * np.pi)
    assert status == 0 and abs(scalar(rec["value"]["torsion"]) / (A ** 2 / (A - 1) ** 2) - 1) <= 1e-8


def test_analytic_coeuler_offset(capsys):
    status, (rec,) = run_json(capsys, "analytic", str(CORPUS / "circle_c03.json"), "--coeuler", "offset", "1,0.5")
    A = np.exp(0.6 * np.pi)
    expected = np.exp(2 * (1 + 0.5j) * 0.6 * np.pi) / (A - 1) ** 2
    assert status == 0 and abs(scalar(rec["value"]["torsion"]) / expected - 1) <= 1e-8


def test_spectrum_commands(capsys):
    status, (rec,) = run_json(capsys, "spectrum", str(CORPUS / "circle_c03.json"), "--truncation", "8")
    assert status == 0
    spectra = rec["value"]["spectra"]
    assert [s["degree"] for s in spectra] == [0, 1]
    assert all(len(s["eigenvalues"]) == 17 for s in spectra)
    status, (rec,) = run_json(capsys, "spectrum", str(CORPUS / "ex34_z3.json"))
    assert [len(l["clusters"]) for l in rec["value"]["laplacians"]] == [1, 1, 1]
    assert rec["value"]["laplacians"][1]["clusters"][0]["multiplicity"] == 2


def test_verify_all_corpus_files(capsys):
    for path in sorted(CORPUS.iterdir()):
        if path.name.endswith(".expected.json"):
            continue
        status, recs = run_json(capsys, "verify", str(path))
        assert status == 0, [r for r in recs if r["status"] != "ok"]
        assert all(r["value"]["passed"] for r in recs)


def test_verify_sweep_concurrent_records_ordered(capsys):
    status, recs = run_json(capsys, "verify", str(CORPUS / "circle_winding1.json"), "--sweep", "3")
    assert status == 0
    ts = [r["operation"]["params"]["t"] for r in recs]
    assert ts == sorted(ts) and set(ts) == {1 / 3, 2 / 3, 1.0}


def test_verify_reports_failure(tmp_path, capsys):
    # non-acyclic complex without a basis: verify reports instead of crashing
    doc = {"schema": SCHEMA, "kind": "complex", "payload": {"dims": [1, 1], "differentials": [[[0]]]}}
    status, recs = run_json(capsys, "verify", _write(tmp_path, doc))
    assert status == 1 and any(not r["value"]["passed"] for r in recs)


def test_tolerance_env(monkeypatch, capsys):
    monkeypatch.setenv("TORSION_TOL", "1e-9")
    _, (rec,) = run_json(capsys, "zeta", str(CORPUS / "torus_anosov.json"))
    assert rec["tolerances"] == {"tol": 1e-9}
    _, (rec,) = run_json(capsys, "zeta", str(CORPUS / "torus_anosov.json"), "--tol", "1e-7")
    assert rec["tolerances"] == {"tol": 1e-7}


def test_flag_parsers():
    assert parse_complex_arg("0.5") == 0.5
    assert parse_complex_arg("1,-2") == 1 - 2j
    assert parse_coeuler(["canonical"]).canonical
    assert parse_coeuler(["offset", "0.5,0"]).canonical
    assert parse_coeuler(None).offset == 0
    with pytest.raises(ValidationError):
        parse_coeuler(["sideways"])


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "torsionlab.cli", "zeta", str(CORPUS / "torus_anosov.json"),
                          "--json"], capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["value"]["torsion"] == [1.0, 0.0] or \
        abs(scalar(json.loads(out.stdout)["value"]["torsion"]) - 1) <= 1e-12
