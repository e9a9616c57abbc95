import json
import subprocess
import sys

import pytest

from afree import linalg
from afree import witness as wt
from afree.cli import EXIT_FAILED, EXIT_NOT_FOUND, EXIT_OK, EXIT_USAGE, main
from afree.operator import OperatorSpec


def _write_op(path, mats):
    path.write_text(json.dumps(OperatorSpec.from_matrices([linalg.exact(m) for m in mats]).to_json()))
    return str(path)


@pytest.fixture
def div2(tmp_path):
    return _write_op(tmp_path / "div2.json", [[[1, 0], [0, 1]]])


def _run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_op_check(capsys, tmp_path, div2):
    other = _write_op(tmp_path / "other.json", [[[2, 0], [0, 2]]])
    code, out, _ = _run(capsys, ["op", "check", div2, "--f", "[[1, 0], [3, -2]]", "--other", other])
    assert code == EXIT_OK
    rep = json.loads(out)
    assert rep["equivalent"] is True
    assert [c["wave_cone"] for c in rep["wave_cone"]] == [True, True]
    assert "wall_time" not in rep


def test_rank_one_is_not_balanceable(capsys, tmp_path):
    path = _write_op(tmp_path / "r1.json", [[[1, 2], [2, 4]]])
    code, out, _ = _run(capsys, ["op", "check", path])
    assert code == EXIT_OK and json.loads(out)["balanceable"] is False


def test_malformed_json_reports_position(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"d": 2,\n  "m": }')
    code, _, err = _run(capsys, ["op", "check", str(bad)])
    assert code == EXIT_USAGE
    assert "line 2 column" in err


def test_usage_errors_exit_64(capsys):
    with pytest.raises(SystemExit) as info:
        main(["tree", "emit", "--h", "1"])
    assert info.value.code == EXIT_USAGE
    code, _, err = _run(capsys, ["tree", "emit", "--h", "5", "--L", "20"])
    assert code == EXIT_USAGE and "GiB" in err


def test_tree_emit_writes_schema_csv(capsys, tmp_path):
    code, out, _ = _run(capsys, ["tree", "emit", "--h", "1", "--L", "3", "--out", str(tmp_path / "t")])
    assert code == EXIT_OK
    seg = (tmp_path / "t" / "tree_segments.csv").read_text().splitlines()
    assert seg[0] == "# schema=1"
    rows = [line for line in seg if not line.startswith("#")][1:]
    assert len(rows) == 2 + 4 + 8
    assert json.loads(out)["passed"] is True


def test_balance_cube_is_deterministic(capsys, tmp_path, div2):
    argv = ["balance", "cube", "--A", div2, "--j", "1", "--k", "1", "--L", "6", "--count", "4"]
    runs = []
    # the report echoes argv, so both runs write to the same path
    for _ in range(2):
        code, out, _ = _run(capsys, argv + ["--out", str(tmp_path / "sigma.json")])
        assert code == EXIT_OK
        runs.append((out, (tmp_path / "sigma.json").read_bytes()))
    assert runs[0] == runs[1]


def test_balance_cube_rank_violation(capsys, tmp_path):
    path = _write_op(tmp_path / "r1.json", [[[1, 0], [0, 0]]])
    code, _, err = _run(capsys, ["balance", "cube", "--A", path, "--j", "1", "--k", "1"])
    assert code == EXIT_USAGE and "rank-1" in err


def test_witness_construct_verify_and_sphere(capsys, tmp_path):
    out_path = tmp_path / "w.json"
    code, _, _ = _run(capsys, ["witness", "construct", "--fixture", "two-matrix", "--out", str(out_path)])
    assert code == EXIT_OK
    w, op = wt.witness_from_json(json.loads(out_path.read_text()))
    assert wt.verify_witness(op, w, 0).passed
    code, out, _ = _run(capsys, ["witness", "verify", str(out_path)])
    assert code == EXIT_OK and json.loads(out)["passed"]
    code, out, _ = _run(capsys, ["sphere", "check", str(out_path), "--samples", "20", "--count", "4"])
    assert code == EXIT_OK, out


def test_failed_verification_exits_2(capsys, tmp_path):
    op, w = wt.two_matrix_witness()
    obj = wt.witness_to_json(w, op)
    obj["fragments"][0]["p"] = 1
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(obj))
    code, out, _ = _run(capsys, ["witness", "verify", str(path)])
    assert code == EXIT_FAILED and json.loads(out)["passed"] is False


def test_searches_without_result_exit_3(capsys, tmp_path):
    path = tmp_path / "symdiv.json"
    path.write_text(json.dumps(wt.symmetric_divergence_2d().to_json()))
    code, out, _ = _run(capsys, ["witness", "construct", "--op", str(path), "--trials", "100"])
    assert code == EXIT_NOT_FOUND
    assert json.loads(out)["reason"] == "budget"
    r1 = _write_op(tmp_path / "r1.json", [[[1, 2], [2, 4]]])
    code, _, _ = _run(capsys, ["witness", "construct", "--op", r1])
    assert code == EXIT_NOT_FOUND


def test_forms_commands(capsys):
    code, out, _ = _run(capsys, ["forms", "build", "--d", "4", "--q", "2"])
    assert code == EXIT_OK and json.loads(out)["passed"]
    code, out, _ = _run(capsys, ["forms", "witness", "--d", "4", "--q", "2", "--index", "3,4", "--timing"])
    rep = json.loads(out)
    assert code == EXIT_OK and "wall_time" in rep


def test_lusin_run_small(capsys, tmp_path):
    wpath = tmp_path / "w.json"
    A = linalg.eye(2)
    wpath.write_text(json.dumps(wt.witness_to_json(wt.scalar_witness(A), OperatorSpec.from_matrices([A]))))
    cov = tmp_path / "cov.json"
    code, out, _ = _run(capsys, ["lusin", "run", str(wpath), "--field", "x1f1", "--eps", "0.3", "--eta", "0.1",
                                 "--resolution", "128", "--out-covering", str(cov)])
    assert code == EXIT_OK, out
    assert json.loads(cov.read_text())["balls"]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "afree.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "lusin" in proc.stdout
