from __future__ import annotations

import json
import subprocess
import sys

import pytest

from mokkt.cli import dumps, exit_code, main, run, strip_volatile

P1 = {
    "vars": ["x1", "x2"],
    "objectives": ["x1^2+x2^2", "(x1-1)^2+x2^2"],
    "constraints": ["x1+x2-2"],
    "box": [[-2, 2], [-2, 2]],
    "point": [0.5, 0],
}


@pytest.fixture
def p1_file(tmp_path):
    path = tmp_path / "p1.json"
    path.write_text(json.dumps(P1))
    return str(path)


def _run(*argv):
    code, report, lines = run(list(argv))
    return code, report, "\n".join(lines)


class TestCertify:
    def test_kt_certified(self, p1_file):
        code, report, text = _run("certify", p1_file, "--mode", "kt")
        assert code == 0
        assert report["result"]["directions"][1]["lambda"] == pytest.approx([0.5, 0.5])
        assert "sampled directions" in text

    def test_fj_refuted(self, p1_file):
        code, report, _ = _run("certify", p1_file, "--mode", "fj", "--point", "2,0")
        assert code == 1 and report["result"]["witness"]["d"] == [-1.0, 0.0]

    def test_infeasible_point(self, p1_file, capsys):
        assert main(["certify", p1_file, "--point", "2,0.5"]) == 3
        assert "infeasible: g1 = +0.5" in capsys.readouterr().err


class TestCq:
    def test_reverse_norm_separation(self):
        code, report, _ = _run("cq", "catalog:paper-example-1")
        assert code == 1
        assert report["result"]["mfcq"]["verdict"] == "fails"
        assert report["result"]["socq"]["verdict"] == "holds-sampled"

    def test_linear_constraint(self, p1_file):
        assert _run("cq", p1_file, "--point", "2,0")[0] == 0

    def test_no_active_constraints(self, p1_file):
        code, _, text = _run("cq", p1_file)
        assert code == 0 and "vacuous" in text


class TestPareto:
    @pytest.mark.parametrize("point, code", [("0.5,0", 0), ("2,0", 2)])
    def test_classification_exit_codes(self, p1_file, point, code):
        assert _run("pareto", p1_file, "--grid", "0.05", "--point", point)[0] == code

    def test_scalar_minimum(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps({"vars": ["x1"], "objectives": ["x1^2"], "constraints": ["x1-1"], "box": [[-2, 2]], "point": [0]}))
        assert _run("pareto", str(path), "--grid", "0.05")[0] == 0

    def test_component_restriction_flag(self, p1_file):
        code, report, _ = _run("pareto", p1_file, "--kanniappan")
        assert code == 0 and report["result"]["component_restriction"]["verdict"] == "consistent"


class TestProbe:
    def test_cubic_counterexample(self):
        code, report, text = _run("probe", "catalog:cubic-objective", "--property", "two-pseudoconvex", "--fn", "f1")
        assert code == 1
        w = report["result"]["probes"][0]["witness"]
        assert w["x"] == [0.0] and w["y"] == [-1.0]
        assert '"x": [0.0]' in text

    def test_problem_level_none_found(self, p1_file):
        assert _run("probe", p1_file, "--property", "problem-2kt-pseudoconvex", "--trials", "2000")[0] == 0


class TestDeriv:
    def test_exact_curvature(self):
        code, report, _ = _run("deriv", "catalog:paper-example-1", "--fn", "g1", "--at", "0,0", "--dir", "1,0")
        assert code == 0 and report["result"]["second"] == {"value": -2.0, "status": "exact"}

    def test_estimated_curvature(self):
        code, report, text = _run("deriv", "catalog:signed-square", "--fn", "f1", "--at", "0", "--dir", "-1")
        assert code == 0
        assert report["result"]["second"]["value"] == -2.0 and report["result"]["second"]["status"] == "estimated"
        assert "q(t)" in text

    def test_kink_diagnostic(self, tmp_path, capsys):
        path = tmp_path / "a.json"
        path.write_text(json.dumps({"vars": ["x1"], "objectives": ["abs(x1)"], "box": [[-1, 1]]}))
        assert main(["deriv", str(path), "--fn", "f1", "--at", "0", "--dir", "1"]) == 3
        assert "one-sided derivatives disagree" in capsys.readouterr().err


class TestUsage:
    @pytest.mark.parametrize(
        "argv",
        [
            ["certify", "missing.json"],
            ["certify"],
            ["bogus"],
            ["certify", "catalog:nope"],
            ["deriv", "catalog:signed-square", "--fn", "h1", "--dir", "1"],
        ],
    )
    def test_usage_errors_exit_3(self, argv):
        assert main(argv) == 3

    def test_bad_expression(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"vars": ["x1"], "objectives": ["x1 +"], "box": [[-1, 1]], "point": [0]}))
        assert main(["certify", str(path)]) == 3

    def test_catalog_listing(self, capsys):
        assert main(["catalog", "list"]) == 0
        assert "paper-example-1" in capsys.readouterr().out


class TestReports:
    @pytest.mark.parametrize(
        "argv",
        [
            ["certify", "catalog:p1-biobjective-convex", "--mode", "kt"],
            ["certify", "catalog:p1-biobjective-convex", "--point", "2,0"],
            ["cq", "catalog:paper-example-1"],
            ["pareto", "catalog:p1-biobjective-convex", "--point", "2,0", "--grid", "0.05"],
            ["probe", "catalog:cubic-objective", "--property", "pseudoconvex", "--trials", "500"],
            ["deriv", "catalog:signed-square", "--fn", "f1", "--at", "0", "--dir", "1"],
        ],
    )
    def test_json_round_trip_and_exit_code(self, argv):
        code, report, _ = run(argv + ["--json"])
        text = dumps(report)
        parsed = json.loads(text)
        assert dumps(parsed) == text
        assert parsed["schema"] == "mokkt-report/1"
        assert exit_code(parsed) == code == parsed["exit"]

    def test_infinite_values_are_strings(self, p1_file):
        _, report, _ = run(["cq", p1_file, "--json"])
        assert json.loads(dumps(report))["result"]["mfcq"]["margin"] == "inf"

    def test_tolerances_are_echoed(self, p1_file):
        _, report, _ = run(["certify", p1_file, "--tol-curv", "1e-6"])
        assert report["tolerances"]["tol_curv"] == 1e-6

    def test_module_entry_point(self, p1_file):
        out = subprocess.run([sys.executable, "-m", "mokkt", "certify", p1_file, "--json"], capture_output=True, text=True)
        assert out.returncode == 0
        report = json.loads(out.stdout)
        assert strip_volatile(report) == strip_volatile(json.loads(dumps(run(["certify", p1_file, "--json"])[1])))
