import json
import subprocess
import sys

import pytest

from relaxctl.cli import RunConfig, main, run
from relaxctl.errors import InputError


def write(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def call(tmp_path, command, cfg, *extra):
    out = tmp_path / "out"
    code, report = run([command, "--config", write(tmp_path, cfg), "--out", str(out), *extra])
    return code, report, out


def test_certify_example1(tmp_path):
    code, rep, out = call(tmp_path, "certify", {"builtin": "example1"})
    assert code == 0 and rep["normality"] is True
    passing = [c for c in rep["candidates"] if c["passed"]]
    assert len(passing) == 1 and passing[0]["normalized"]
    assert set(passing[0]["conditions"]) >= {"adjoint", "transversality", "slackness", "max_condition"}
    assert (out / "certify.json").exists() and (out / "adjoint.csv").exists()


def test_certify_perturbed(tmp_path):
    cfg = {"builtin": "example1", "params": {"perturbation": 0.1}, "tolerances": {"tol_cert": 1e-4, "tol_max": 1e-4}}
    code, rep, _ = call(tmp_path, "certify", cfg)
    assert code == 1 and rep["normality"] == "no_certificate"


def test_decreasing_Ns_is_input_error(tmp_path):
    code, rep, _ = call(tmp_path, "certify", {"builtin": "example1", "Ns": [16, 4]})
    assert code == 2 and "strictly increasing" in rep["error"]


@pytest.mark.parametrize(
    "cfg",
    [
        {"builtin": "nope"},
        {"builtin": "example1", "grid": 5},
        {"builtin": "example1", "tolerances": {"tol_cert": 0}},
        {"builtin": "example1", "params": {"f": "identity"}},
        {"builtin": "example1", "params": {"f": "unknown"}},
    ],
)
def test_malformed_configs(tmp_path, cfg):
    assert call(tmp_path, "certify", cfg)[0] == 2


def test_unreadable_config(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert run(["certify", "--config", str(p)])[0] == 2


def test_chatter_example1(tmp_path):
    code, rep, out = call(tmp_path, "chatter", {"builtin": "example1", "Ns": [4, 16, 64]})
    assert code == 0 and rep["J_star"] == 1.0
    assert (out / "chatter.csv").read_text().startswith("N,sup_dev,cost,gap")


def test_chatter_single_vertex(tmp_path):
    code, rep, _ = call(tmp_path, "chatter", {"builtin": "quadratic_cv", "Ns": [2, 4, 8]})
    assert code == 0


def test_chatter_zero_bound(tmp_path):
    cfg = {"builtin": "example1", "Ns": [4, 16], "options": {"gap_bound": {"coef": 0, "power": 2}}}
    assert call(tmp_path, "chatter", cfg, "--override-normality")[0] == 1


def test_chatter_abnormal_gate(tmp_path):
    cfg = {"builtin": "example1", "grid": 200, "params": {"perturbation": 0.1}, "Ns": [4]}
    code, rep, _ = call(tmp_path, "chatter", cfg)
    assert code == 1 and "normal" in rep["error"]


def test_calcvar_cases(tmp_path):
    code, rep, _ = call(tmp_path, "calcvar", {"builtin": "example2", "params": {"L": "x_udot_sq"}})
    f = rep["checks"]["falsifier"]
    assert code == 1 and (f["u1"], f["u2"], f["residual"]) == (-1.0, 1.0, 2.0)
    assert call(tmp_path, "calcvar", {"builtin": "quadratic_cv"})[0] == 0
    assert call(tmp_path, "calcvar", {"builtin": "example2", "params": {"L": "x_udot"}})[0] == 0


def test_calcvar_vertices(tmp_path):
    cfg = {"builtin": "example2", "params": {"L": "x_udot_sq"}, "options": {"vertices": [-1.0, 1.0]}, "grid": 50}
    code, rep, _ = call(tmp_path, "calcvar", cfg)
    assert code == 1 and not rep["checks"]["euler"]["pass"]


def test_calcvar_from_csv(tmp_path):
    call(tmp_path, "calcvar", {"builtin": "quadratic_cv", "grid": 40})
    cfg = {
        "builtin": "quadratic_cv",
        "trajectory_csv": str(tmp_path / "out" / "trajectory.csv"),
        "relaxed_control_csv": str(tmp_path / "out" / "relaxed_control.csv"),
    }
    assert call(tmp_path, "calcvar", cfg)[0] == 0


def test_calcvar_rejects_control_problem(tmp_path):
    assert call(tmp_path, "calcvar", {"builtin": "example1"})[0] == 2


def test_gradcheck(tmp_path):
    for b in ("example1", "example2", "quadratic_cv"):
        code, rep, _ = call(tmp_path, "gradcheck", {"builtin": b}, "--seed", "3")
        assert code == 0, rep


def test_report_is_deterministic(tmp_path):
    cfg = write(tmp_path, {"builtin": "example1", "grid": 200})
    texts = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        run(["certify", "--config", cfg, "--out", str(out), "--seed", "7"])
        texts.append((out / "certify.json").read_bytes())
    assert texts[0] == texts[1]
    rep = json.loads(texts[0])
    assert rep["grid"] == 200 and len(rep["config_hash"]) == 64 and "tol_cert" in rep["tolerances"]


def test_grid_flag_overrides(tmp_path):
    code, rep, _ = call(tmp_path, "certify", {"builtin": "example1"}, "--grid", "100")
    assert rep["grid"] == 100


def test_config_validation_direct():
    with pytest.raises(InputError):
        RunConfig.from_dict({"builtin": "example1", "Ns": []})


def test_main_prints_json(tmp_path, capsys):
    assert main(["gradcheck", "--config", write(tmp_path, {"builtin": "example1"})]) == 0
    assert json.loads(capsys.readouterr().out)["command"] == "gradcheck"


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, {"builtin": "example2", "params": {"L": "x_udot"}})
    proc = subprocess.run([sys.executable, "-m", "relaxctl", "calcvar", "--config", cfg], capture_output=True)
    assert proc.returncode == 0
