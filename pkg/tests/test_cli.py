import io
import json
import random
import subprocess
import sys

from gerbrace.cli import run
from gerbrace.convolution_linfty import random_invariant
from gerbrace.polyvector_hochschild import AffineContext, random_cochain


def _run(argv, env=None):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, env=env or {}, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_ger_basis_single_line():
    code, out, _ = _run(["ger-basis", "1"])
    assert code == 0 and out == "b1\n"


def test_ger_basis_formats():
    code, out, _ = _run(["ger-basis", "2"])
    assert out.splitlines() == ["b1b2", "{b1,b2}"]
    code, out, _ = _run(["ger-basis", "3", "--format", "json"])
    assert json.loads(out)["size"] == 6
    code, out, _ = _run(["ger-basis", "2", "--format", "csv"])
    assert out.splitlines()[0] == "monomial,degree"


def test_braces_audit_passes():
    code, out, _ = _run(["braces-audit", "2", "--neutral-cap", "2"])
    assert code == 0
    assert json.loads(out)["violations"] == []


def test_argument_errors_exit_2(tmp_path):
    assert _run(["ger-basis"])[0] == 2
    assert _run(["ger-basis", "zero"])[0] == 2
    assert _run(["ger-basis", "0"])[0] == 2
    assert _run(["no-such-command"])[0] == 2
    assert _run(["rigidity", "2", "--dims", "2", "--t-degrees", "0"])[0] == 2
    assert _run(["cyl-audit", "2", "2", "--degcap", "0"])[0] == 2
    assert _run(["brace-eval", "1{2", str(tmp_path / "missing.json")])[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{\"terms\": [")
    code, _, err = _run(["mc-adjust", str(bad), str(bad)])
    assert code == 2 and "bad.json:1" in err
    assert _run(["replay", str(bad)])[0] == 2


def test_seed_required_in_ci_mode():
    assert _run(["cyl-audit", "2", "2"], env={"GERBRACE_CI": "1"})[0] == 2
    assert _run(["cyl-audit", "2", "2", "--seed", "4"], env={"GERBRACE_CI": "1"})[0] == 0


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\nformat = json\nneutral-cap = 1\n")
    code, out, _ = _run(["braces-audit", "2", "--config", str(cfg)])
    assert code == 0 and json.loads(out)["max_neutral"] == 1
    code, out, _ = _run(["braces-audit", "2", "--config", str(cfg), "--neutral-cap", "2"])
    assert json.loads(out)["max_neutral"] == 2
    cfg.write_text(json.dumps({"format": "text", "bogus": 1}))
    assert _run(["braces-audit", "2", "--config", str(cfg)])[0] == 2


def test_output_directory_from_environment(tmp_path):
    code, out, _ = _run(["cyl-audit", "3", "2"], env={"GERBRACE_OUT_DIR": str(tmp_path)})
    assert code == 0
    assert (tmp_path / "cyl-audit.csv").read_text() == out


def test_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert _run(["linfty-relations", "--seed", "3", "--samples", "2", "--format", "json", "--out", str(d)])[0] == 0
        assert _run(["rigidity", "2", "--out", str(d)])[0] == 0
    for name in ("linfty-relations.json", "rigidity.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_rigidity_certificate_and_replay(tmp_path):
    code, out, _ = _run(["rigidity", "2", "--dims", "1", "--degcap", "2", "--out", str(tmp_path)])
    assert code == 0
    cert = json.loads(out)
    assert cert["failures"] == 0
    featured = cert["featured"]
    assert featured["method"] == "de-rham-homotopy"
    # the primitive is θ ∂/∂θ ⊗ b1
    assert featured["primitive"]["terms"] == [
        {"arity": 1, "coef": "1", "derivs": [[0, 1]], "ger": [["b", [1]]], "mono": [0, 1]}]
    path = tmp_path / "rigidity.json"
    assert _run(["replay", str(path)])[0] == 0
    # a tampered primitive is caught
    cert["featured"]["primitive"]["terms"][0]["coef"] = "2"
    path.write_text(json.dumps(cert))
    code, _, err = _run(["replay", str(path)])
    assert code == 1 and "first counterexample" in err


def test_brace_eval_command(tmp_path):
    ctx = AffineContext(1)
    rng = random.Random(2)
    P, Q = random_cochain(ctx, rng, 1), random_cochain(ctx, rng, 2)
    ops = tmp_path / "ops.json"
    ops.write_text(json.dumps([P.to_json(), Q.to_json()]))
    code, out, _ = _run(["brace-eval", "1{2}", str(ops)])
    assert code == 0
    from gerbrace.brace_operad import parse_tree
    from gerbrace.polyvector_hochschild import brace_eval
    assert json.loads(out)["value"] == brace_eval(parse_tree("1{2}"), [P, Q]).to_json()
    tree = tmp_path / "tree.json"
    tree.write_text(json.dumps({"kind": "root", "children": [
        {"kind": "nu", "children": [{"kind": "lab", "label": 1, "children": []},
                                    {"kind": "lab", "label": 2, "children": []}]}]}))
    code, out, _ = _run(["brace-eval", str(tree), str(ops), "--format", "text"])
    assert code == 0 and out.strip()
    assert _run(["brace-eval", "1{2}", str(ops), "--format", "csv"])[0] == 2


def test_mc_adjust_command(tmp_path):
    ctx = AffineContext(1)
    rng = random.Random(6)
    xi = random_invariant(ctx.va_ring, rng, 1, degree=-1, terms=3, order_cap=2)
    state, xfile = tmp_path / "state.json", tmp_path / "xi.json"
    state.write_text(json.dumps({"arity_cap": 3}))
    data = xi.to_json()
    data["n"] = 1
    xfile.write_text(json.dumps(data))
    code, out, _ = _run(["mc-adjust", str(state), str(xfile)])
    assert code == 0
    res = json.loads(out)
    assert res["one_cell"]["ok"] and res["first_order"]
    # a starting point that is not Maurer-Cartan is an invariant violation
    from gerbrace.convolution_linfty import identity_element
    bad = identity_element(ctx.va_ring) + random_invariant(ctx.va_ring, rng, 2, degree=0, terms=2)
    state.write_text(json.dumps({"arity_cap": 3, "alpha": bad.to_json()}))
    code, _, err = _run(["mc-adjust", str(state), str(xfile)])
    assert code == 1 and "Maurer" in err


def test_failing_audit_exits_1(monkeypatch):
    from gerbrace import cyl_audit

    original = cyl_audit.corolla_degree

    def broken(kind, arity):
        return original(kind, arity) + (1 if kind == "m" else 0)
    monkeypatch.setattr(cyl_audit, "corolla_degree", broken)
    monkeypatch.setattr(cyl_audit.degree_identity_check, "__defaults__", (broken,))
    code, _, err = _run(["cyl-audit", "2", "2"])
    assert code == 1 and "m(a(1,2))" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gerbrace", "ger-basis", "1"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == "b1\n"
