from __future__ import annotations

import numpy as np
import pytest

from mokkt.calculus import gradient
from mokkt.catalog import load_all
from mokkt.expr import evaluate, parse
from mokkt.gconvex import (
    check_problem_pair,
    probe_2pseudoconvex,
    probe_function,
    probe_problem_2kt_pseudoconvex,
    probe_pseudoconvex,
    probe_quasiconvex,
    probe_semistrict_quasiconvex,
    reverify,
)
from mokkt.problem import Problem

X1 = ["x1"]
BOX = [[-2, 2]]


def f1(text: str):
    return parse(text, X1)


class TestQuasiconvex:
    def test_cubic_passes(self):
        r = probe_quasiconvex(f1("x1^3"), BOX, 100_000, seed=0)
        assert r.outcome == "none-found" and r.trials == 100_000

    def test_negative_square_fails(self):
        e = f1("-x1^2")
        r = probe_quasiconvex(e, BOX, 1000)
        w = r.witness
        z = (1 - w["t"]) * np.array(w["x"]) + w["t"] * np.array(w["y"])
        assert evaluate(e, z) > max(evaluate(e, w["x"]), evaluate(e, w["y"])) + 1e-9
        assert reverify(r, e)

    @pytest.mark.parametrize("box", [[[-1, 1], [-1, 1]], [[0, 5], [-3, 0.5]]])
    def test_convex_passes(self, box):
        r = probe_quasiconvex(parse("x1^2 + x2^2", ["x1", "x2"]), box, 20_000)
        assert r.outcome == "none-found"

    def test_domain_errors_are_skipped_and_counted(self):
        r = probe_quasiconvex(f1("log(x1)"), BOX, 2000)
        assert r.outcome == "none-found" and r.skipped["domain"] > 0


class TestPseudoconvex:
    def test_cubic_fails_at_the_origin(self):
        r = probe_pseudoconvex(f1("x1^3"), BOX, 10_000)
        assert r.refuted and r.witness["x"] == [0.0] and r.witness["y"] == [-1.0]

    def test_increasing_with_positive_slope_passes(self):
        assert probe_pseudoconvex(f1("x1 + x1^3"), BOX, 50_000).outcome == "none-found"

    def test_linear_passes(self):
        assert probe_pseudoconvex(parse("2*x1 - x2", ["x1", "x2"]), [[-1, 1], [-1, 1]], 20_000).outcome == "none-found"


class TestTwoPseudoconvex:
    def test_cubic_fails_on_the_curvature_branch(self):
        r = probe_2pseudoconvex(f1("x1^3"), BOX, 100_000)
        assert r.witness["x"] == [0.0] and r.witness["y"] == [-1.0]
        assert r.witness["slope"] == 0.0 and r.witness["curvature"] == 0.0

    def test_signed_square_passes(self):
        assert probe_2pseudoconvex(f1("x1*abs(x1)"), BOX, 50_000).outcome == "none-found"

    @pytest.mark.parametrize("seed", range(5))
    def test_pseudoconvex_catalog_functions_pass(self, seed):
        for text in ["x1^2", "exp(x1)", "x1 + x1^3", "x1"]:
            assert probe_2pseudoconvex(f1(text), BOX, 5000, seed).outcome == "none-found"


class TestSemistrict:
    def test_strictly_convex_passes(self):
        assert probe_semistrict_quasiconvex(f1("x1^2"), BOX, 20_000).outcome == "none-found"

    def test_plateau_fails(self):
        e = f1("min2(1, max2(x1, 0))")
        r = probe_semistrict_quasiconvex(e, BOX, 10_000)
        assert r.refuted and reverify(r, e)

    def test_cubic_passes(self):
        assert probe_semistrict_quasiconvex(f1("x1^3"), BOX, 20_000).outcome == "none-found"


class TestProblemProbe:
    def test_convex_problem_passes(self, p1):
        r = probe_problem_2kt_pseudoconvex(p1, 5000)
        assert r.outcome == "none-found" and r.trials == 5000

    def test_cubic_problem_fails_on_the_curvature_branch(self):
        p = Problem.build(["x1"], ["x1^3"], ["x1 - 1"], [[-2, 2]])
        r = probe_problem_2kt_pseudoconvex(p, 10_000)
        assert r.refuted and r.witness["consequent"] == "objective-curvature" and r.witness["x"] == [0.0]
        assert reverify(r, p)

    def test_single_feasible_point(self):
        p = Problem.build(["x1"], ["x1"], ["x1^2"], [[-1, 1]])
        r = probe_problem_2kt_pseudoconvex(p, 100, max_attempts=5000)
        assert r.outcome == "none-found" and r.trials == 0
        assert "no dominated feasible pairs sampled" in r.notes

    def test_pair_check_ignores_non_dominated_pairs(self, p1):
        assert check_problem_pair(p1, [0.5, 0], [0.0, 0.0]) is None


def _catalog_functions():
    out = []
    for entry in load_all():
        p = entry.problem
        for k, e in enumerate(p.objectives):
            out.append(pytest.param(e, p.box, id=f"{entry.id}-f{k + 1}"))
        for k, e in enumerate(p.constraints):
            out.append(pytest.param(e, p.box, id=f"{entry.id}-g{k + 1}"))
    return out


class TestInclusions:
    @pytest.mark.parametrize("e, box", _catalog_functions())
    def test_pseudoconvex_implies_two_pseudoconvex(self, e, box):
        # both probes draw the same pairs for the same seed and trial count
        if probe_pseudoconvex(e, box, 5000, seed=1).outcome == "none-found":
            assert probe_2pseudoconvex(e, box, 5000, seed=1).outcome == "none-found"

    @pytest.mark.parametrize("e, box", _catalog_functions())
    def test_two_pseudoconvex_implies_semistrict(self, e, box):
        if probe_2pseudoconvex(e, box, 5000, seed=2).outcome == "none-found":
            assert probe_semistrict_quasiconvex(e, box, 5000, seed=2).outcome == "none-found"

    @pytest.mark.parametrize("e, box", _catalog_functions())
    def test_quasiconvex_gradient_inequality(self, e, box):
        if probe_quasiconvex(e, box, 5000, seed=3).refuted:
            pytest.skip("not quasiconvex on the sampled box")
        rng = np.random.default_rng(3)
        lo, hi = np.array(box, float).T
        for _ in range(500):
            x, y = rng.uniform(lo, hi), rng.uniform(lo, hi)
            if evaluate(e, y) <= evaluate(e, x):
                assert gradient(e, x) @ (y - x) <= 1e-9


class TestReverify:
    @pytest.mark.parametrize(
        "prop, text",
        [
            ("quasiconvex-on", "x1^3 - x1"),
            ("pseudoconvex", "x1^3"),
            ("two-pseudoconvex", "x1^3"),
            ("semistrict-quasiconvex", "min2(1, max2(x1, 0))"),
            ("quasiconvex-on", "sin(3*x1)"),
            ("pseudoconvex", "cos(x1)"),
        ],
    )
    @pytest.mark.parametrize("seed", range(3))
    def test_counterexamples_re_verify(self, prop, text, seed):
        e = f1(text)
        r = probe_function(prop, e, BOX, 20_000, seed)
        assert r.refuted and reverify(r, e)

    def test_tampered_witness_does_not_re_verify(self):
        e = f1("-x1^2")
        r = probe_quasiconvex(e, BOX, 1000)
        r.witness = dict(r.witness, t=0.0)
        assert not reverify(r, e)

    def test_probes_are_deterministic(self):
        e = f1("sin(3*x1)")
        a = probe_quasiconvex(e, BOX, 5000, seed=4).to_dict()
        assert a == probe_quasiconvex(e, BOX, 5000, seed=4).to_dict()
