import io
import json
import subprocess
import sys

import numpy as np
import pytest

from histweak import __version__, cli
from histweak.netparse import build_model, fig1_builtin
from histweak.report import Report
from histweak.weakvalues import sequential_weak_value


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def results(text):
    return {r["name"]: r["value"] for r in json.loads(text)["results"]}


def cplx(v):
    return complex(v["re"], v["im"])


def test_fig1_weak_x3():
    code, out, _ = run("fig1", "--bn", "4", "--weak", "x3")
    assert code == 0
    assert cplx(results(out)["(x3)_w"]) == pytest.approx(-2, abs=1e-12)


def test_fig1_weak_x4_bn22():
    code, out, _ = run("fig1", "--bn", "22", "--weak", "x4")
    assert code == 0
    assert cplx(results(out)["(x4)_w"]) == pytest.approx(1024, rel=1e-9)


def test_check_unity_reports_seed():
    code, out, _ = run("check", "--suite", "unity", "--dim", "3", "--k", "2", "--seed", "7")
    assert code == 0
    doc = json.loads(out)
    assert doc["inputs"]["seed"] == 7
    assert all(c["pass"] for c in doc["checks"])
    assert results(out)["max_deviation"] < 1e-9


@pytest.mark.parametrize("suite", ["unity", "ratio", "coarse", "continuity", "born", "gswv"])
def test_every_suite_passes(suite):
    code, out, _ = run("check", "--suite", suite, "--dim", "2", "--k", "2", "--seed", "1", "--trials", "3")
    assert code == 0, out


def test_sequential_and_histories():
    code, out, _ = run("fig1", "--seq", "x7,x5,x3", "--seq", "x3,x8,x5")
    r = results(out)
    assert cplx(r["(x7,x5,x3)_w"]) == pytest.approx(1)
    assert cplx(r["(x8,x5,x3)_w"]) == pytest.approx(-1)
    code, out, _ = run("fig1", "--histories")
    r = results(out)
    assert r["histories_total"] == 243 and r["histories_continuous"] == 9
    assert cplx(r["psi[x2,x3,x5,x7,x9]"]) == pytest.approx(0.125)


def test_sum_is_default():
    _, a, _ = run("fig1")
    _, b, _ = run("fig1", "--sum")
    assert a == b
    assert cplx(results(a)["feynman_sum_pruned"]) == pytest.approx(0.125)


def test_net_file(tmp_path):
    path = tmp_path / "tiny.net"
    path.write_text("slice 0: S\nslice 1: a b\nslice 2: D\nstep 0 -> 1: S a 0.6\nstep 0 -> 1: S b 0.8\nstep 1 -> 2: a D 0.8\nstep 1 -> 2: b D -0.6\n")
    code, out, _ = run("net", str(path), "--weak", "a,b")
    assert code == 1  # zero transition amplitude: a computation error, not a crash
    code, out, _ = run("net", str(path), "--histories")
    assert code == 0
    r = results(out)
    assert cplx(r["psi[a]"]) == pytest.approx(0.48) and cplx(r["psi[b]"]) == pytest.approx(-0.48)
    assert r["swv[a]"] is None
    code, out, _ = run("net", str(path))
    assert code == 0
    assert results(out)["swv_complete_sum"] is None
    assert abs(cplx(results(out)["feynman_sum"])) < 1e-15


def test_net_reports_parse_position(tmp_path):
    path = tmp_path / "bad.net"
    path.write_text("slice 0: S\nslice 1: D\nstep 0 -> 1: S E 1\n")
    code, _, err = run("net", str(path))
    assert code == 1
    assert f"{path}:3:16:" in err


def test_csv_format_either_position():
    a = run("--format", "csv", "fig1", "--weak", "x4")[1]
    b = run("fig1", "--weak", "x4", "--format", "csv")[1]
    assert a == b
    assert a.splitlines()[0] == "section,name,re,im,text,pass,deviation"
    assert "result,(x4)_w,2.0000000000000009,0,,," in a


def test_reports_are_byte_identical():
    argv = ("check", "--suite", "gswv", "--seed", "11", "--trials", "4")
    assert run(*argv)[1] == run(*argv)[1]
    argv = ("pointer", "--single", "--seed", "3")
    assert run(*argv)[1] == run(*argv)[1]


def test_floats_round_trip():
    _, out, _ = run("fig1", "--bn", "22", "--weak", "x3")
    model = build_model(fig1_builtin(22))
    t, p = model.resolve("x3")
    exact = sequential_weak_value([(t, p)], model.space.pre_state, model.space.post_state, model.evolution).value
    assert cplx(results(out)["(x3)_w"]) == exact


def test_usage_errors():
    assert run()[0] == 2
    assert run("fig1", "--weak", "x3", "--histories")[0] == 2
    assert run("pointer", "--g", "0.1")[0] == 2
    assert run("check", "--suite", "nope")[0] == 2
    assert run("fig1", "--bn", "four")[0] == 2


def test_computation_errors():
    code, _, err = run("fig1", "--weak", "nowhere")
    assert code == 1 and "nowhere" in err
    assert run("net", "/does/not/exist.net")[0] == 1
    assert run("check", "--suite", "unity", "--trials", "0")[0] == 1
    assert run("pointer", "--single", "--grid", "1000")[0] == 1


def test_failed_check_exits_one(monkeypatch):
    monkeypatch.setattr(cli, "run_suite", lambda *a: iter([(0, "forced", 1.0, 1e-9)]))
    code, out, _ = run("check", "--suite", "unity")
    assert code == 1
    assert json.loads(out)["checks"][0]["pass"] is False


def test_version_and_help():
    code, out, _ = run("version")
    assert code == 0 and out.strip() == f"histweak {__version__}"
    code, out, _ = run("help")
    assert code == 0 and "pointer" in out


def test_pointer_single_builtin():
    code, out, _ = run("pointer", "--single", "--g", "0.02", "--scaling", "0.08,0.04,0.02")
    assert code == 0
    r = results(out)
    target = cplx(r["weak_value"])
    assert target == pytest.approx(0.5 - 0.5j * np.sqrt(3))
    assert abs(cplx(r["estimate"]) - target) < 10 * 0.02**2


def test_pointer_sequential_builtin():
    code, out, _ = run("pointer", "--sequential", "--g", "0.02")
    assert code == 0
    r = results(out)
    assert abs(cplx(r["estimate_correlator"]) - cplx(r["sequential_weak_value"])) < 50 * 0.02


def test_pointer_instance_file(tmp_path):
    inst = {
        "pre": [1, 0],
        "post": [[0.6, 0], [0, 0.8]],
        "observables": [{"time": 1, "matrix": [[1, [0, -1]], [[0, 1], -1]]}],
    }
    path = tmp_path / "inst.json"
    path.write_text(json.dumps(inst))
    code, out, _ = run("pointer", "--single", "--instance", str(path), "--g", "0.01")
    assert code == 0
    r = results(out)
    # <f|A|i>/<f|i> with A = [[1, -i], [i, -1]]: (0.6 + (-0.8i)(i)) / 0.6
    assert cplx(r["weak_value"]) == pytest.approx((0.6 + 0.8) / 0.6)
    assert json.loads(out)["inputs"]["instance"] == str(path)
    assert run("pointer", "--sequential", "--instance", str(path))[0] == 1


def test_pointer_seed_in_report():
    _, out, _ = run("pointer", "--single", "--seed", "5")
    assert json.loads(out)["inputs"]["seed"] == 5


def test_report_serialisation():
    rep = Report("x", {"b": 1, "a": 0.1})
    rep.add("z", 1 + 2j)
    rep.add("nan", float("nan"))
    assert rep.check("ok", 0.5, 1.0) and not rep.check("bad", 2.0, 1.0)
    assert not rep.ok
    text = rep.to_json()
    assert text.index('"a"') < text.index('"b"')
    assert '{"im": 2, "re": 1}' in text
    assert '"value": null' in text
    assert json.loads(text)["inputs"]["a"] == 0.1


def test_entry_points():
    proc = subprocess.run([sys.executable, "-m", "histweak", "version"], capture_output=True, text=True)
    assert proc.returncode == 0 and __version__ in proc.stdout
