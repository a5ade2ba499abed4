import io
import json
import math
import subprocess
import sys

import pytest

from qad.cli import main


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def run_json(*argv):
    code, out, err = call("run", "--json", *argv)
    assert code == 0, err
    return json.loads(out)


def test_run_xcoslog():
    rep = run_json("--expr", "x*cos(log(x))", "--x0", "2", "--int-bits", "8", "--frac-bits", "32")
    exact = math.cos(math.log(2)) - math.sin(math.log(2))
    assert rep["result"]["derivative"] == pytest.approx(0.130278, abs=1e-6)
    assert abs(rep["result"]["derivative"] - exact) <= rep["error_analysis"]["bound_deriv"]
    assert rep["oracle"]["derivative"] == exact
    assert rep["error_analysis"]["cost_bound"]["total"] == 21


def test_run_text_report():
    code, out, _ = call("run", "--expr", "x*cos(log(x))", "--x0", "2")
    assert code == 0
    for word in ("value", "derivative", "oracle", "bound", "gates", "cost"):
        assert word in out


def test_run_identity_defaults():
    rep = run_json("--expr", "x", "--x0", "5")
    assert rep["result"]["value"] == 5 and rep["result"]["derivative"] == 1
    assert rep["request"] == {"expr": "x", "x0": 5.0, "int_bits": 8, "frac_bits": 24,
                              "reset_mode": "hybrid"}


@pytest.mark.parametrize("argv,code,needle", [
    (("run", "--expr", "log(x)", "--x0", "-1"), 2, "log(s_1)"),
    (("run", "--expr", "sin(", "--x0", "1"), 1, "position 4"),
    (("run", "--expr", "exp(x)", "--x0", "5", "--int-bits", "4"), 3, "exp(s_1)"),
    (("run", "--expr", "x", "--x0", "1", "--frac-bits", "60"), 5, ""),
    (("run", "--expr", "x"), 5, "--x0"),
    (("run", "--expr", "x", "--x0", "1", "--reset-mode", "lazy"), 5, "reset-mode"),
])
def test_run_exit_codes(argv, code, needle):
    got, _, err = call(*argv)
    assert got == code
    assert needle in err


def test_json_round_trip():
    from qad.analysis import error_bounds
    from qad.engine import RunConfig, run
    from qad.fixedpoint import FixedPointFormat
    from qad.graphir import build_graph, parse

    rep = run_json("--expr", "exp(sin(x))*x", "--x0", "0.75", "--frac-bits", "20",
                   "--reset-mode", "swap")
    g = build_graph(parse("exp(sin(x))*x"))
    fmt = FixedPointFormat(8, 20)
    res = run(g, RunConfig(0.75, fmt, "swap"))
    assert rep["result"] == json.loads(json.dumps(res.to_json()))
    assert rep["error_analysis"] == json.loads(json.dumps(error_bounds(g, 0.75, fmt).to_json()))


def test_byte_identical_runs(tmp_path):
    outputs, traces = [], []
    for i in range(2):
        path = tmp_path / f"t{i}.jsonl"
        code, out, _ = call("run", "--json", "--expr", "x*cos(log(x))", "--x0", "2",
                            "--frac-bits", "12", "--reset-mode", "swap", "--trace", str(path))
        assert code == 0
        outputs.append(out)
        traces.append(path.read_bytes())
    assert outputs[0] == outputs[1]
    assert traces[0] == traces[1] and traces[0].count(b"\n") > 100


def test_sweep_envelope():
    code, out, _ = call("sweep", "--json", "--expr", "x*cos(log(x))", "--x0", "2",
                        "--sweep-frac-bits", "8,16,24,32")
    assert code == 0
    rows = json.loads(out)
    assert [r["frac_bits"] for r in rows] == [8, 16, 24, 32]
    errs = [r["observed_deriv_error"] for r in rows]
    envelope = [max(errs[i:]) for i in range(len(errs))]
    assert envelope == sorted(envelope, reverse=True)
    assert all(r["observed_deriv_error"] <= r["bound_deriv"] for r in rows)


def test_sweep_singleton_equals_run():
    argv = ("--expr", "x*cos(log(x))", "--x0", "1.5", "--frac-bits", "24")
    rep = run_json(*argv)
    _, out, _ = call("sweep", "--json", *argv, "--sweep-frac-bits", "24")
    (row,) = json.loads(out)
    assert row["value"] == rep["result"]["value"]
    assert row["derivative"] == rep["result"]["derivative"]
    assert row["observed_deriv_error"] == rep["observed_error"]["derivative"]
    assert row["bound_deriv"] == rep["error_analysis"]["bound_deriv"]
    assert row["gates"] == sum(rep["result"]["gate_counts"].values())


def test_sweep_failed_rows_isolated():
    # x0 = 2.83 floors to 2.8125 at b = 4 (square fits Q(4,4)); at b = 16 the square exceeds 8
    code, out, _ = call("sweep", "--json", "--expr", "x*x", "--x0", "2.83", "--int-bits", "4",
                        "--sweep-frac-bits", "4,16,61")
    rows = json.loads(out)
    assert [r["ok"] for r in rows] == [True, False, False]
    assert [r.get("exit_code") for r in rows] == [None, 3, 5]
    assert code == 3
    code, out, _ = call("sweep", "--json", "--expr", "log(x)", "--x0", "0.01",
                        "--sweep-frac-bits", "4,16")
    rows = json.loads(out)
    assert code == 2 and not rows[0]["ok"] and rows[1]["ok"]
    assert "log(s_1)" in rows[0]["error"]


def test_sweep_text_and_usage():
    code, out, _ = call("sweep", "--expr", "x*cos(log(x))", "--x0", "2", "--sweep-frac-bits", "8,12")
    assert code == 0 and len(out.strip().splitlines()) == 3
    assert call("sweep", "--expr", "x", "--x0", "2", "--sweep-frac-bits", ",")[0] == 5
    assert call("sweep", "--expr", "x", "--x0", "2", "--sweep-frac-bits", "a")[0] == 5
    assert call("sweep", "--expr", "x+", "--x0", "2", "--sweep-frac-bits", "8")[0] == 1


def test_graph_command():
    code, out, _ = call("graph", "--expr", "x*cos(log(x))")
    assert code == 0
    edges = sorted(line.strip() for line in out.splitlines() if "->" in line)
    assert edges == ["n0 -> n1;", "n0 -> n3;", "n1 -> n2;", "n2 -> n3;"]
    code, out, _ = call("graph", "--expr", "x")
    assert code == 0 and out.count("label=") == 1
    code, _, err = call("graph", "--expr", "sin(")
    assert code == 1
    assert err.splitlines()[-1] == "      ^"


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qad.cli", "run", "--expr", "x", "--x0", "5", "--json"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["derivative"] == 1
