"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed at the end of the pytest
run (see conftest.py).  Run just this file with

    pytest tests/test_acceptance.py -v
"""

from __future__ import annotations

import json
import math
import os
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

from mokkt.calculus import second_dir_deriv
from mokkt.catalog import candidate_lattice, load, load_all
from mokkt.cli import dumps, run, strip_volatile
from mokkt.cones import sample_critical_directions
from mokkt.cq import check_mfcq, check_socq, check_socq_direction
from mokkt.expr import parse
from mokkt.gconvex import (
    probe_function,
    probe_problem_2kt_pseudoconvex,
    probe_quasiconvex,
    probe_semistrict_quasiconvex,
    reverify,
)
from mokkt.kkt import certify_point, theorem3_probes, theorem3_verdict
from mokkt.lp import solve
from mokkt.pareto import GridOracle, component_restriction_check, luc_schaible_check
from polygen import random_polynomial
from problems import stationary_problem
from test_lp import random_lp, vertex_oracle

RESULTS: dict[int, str] = {}
ORACLE_STEP = 0.02
CANDIDATE_STEP = 0.125


@contextmanager
def criterion(number: int, title: str):
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        line = f"[FAIL] criterion {number:2d}: {title} ({time.perf_counter() - start:.2f} s): {type(exc).__name__}"
        RESULTS[number] = line
        print(line)
        raise
    line = f"[PASS] criterion {number:2d}: {title} ({time.perf_counter() - start:.2f} s)"
    RESULTS[number] = line
    print(line)


def _candidates(problem):
    level = int(round(math.log2((problem.upper[0] - problem.lower[0]) / CANDIDATE_STEP)))
    return [x for x in candidate_lattice(problem, level) if problem.is_feasible(x, 1e-12)]


def test_criterion_01_reverse_norm_example():
    with criterion(1, "reverse-norm example: MFCQ fails, second-order CQ holds, cq exits 1"):
        start = time.perf_counter()
        p = load("paper-example-1").problem
        mf = check_mfcq(p, [0, 0])
        assert not mf.holds and mf.margin <= 1e-9
        dirs = [c.d for c in sample_critical_directions(p, [0, 0], 64, objectives=False)]
        assert len(dirs) >= 64
        report = check_socq(p, [0, 0], dirs)
        assert report.verdict == "holds-sampled"
        for r in report.socq:
            assert r.holds and abs(r.margin - 2 * float(r.d @ r.d)) <= 1e-6
        elapsed = time.perf_counter() - start
        assert run(["cq", "catalog:paper-example-1"])[0] == 1
        assert elapsed < 1.0, elapsed


def test_criterion_02_first_order_cq_implies_second_order():
    with criterion(2, "MFCQ implies the second-order CQ with no smaller margin (200 problems)"):
        start = time.perf_counter()
        rng = np.random.default_rng(2)
        problems = violations = directions = 0
        while problems < 200:
            p = stationary_problem(rng)
            mf = check_mfcq(p, p.point)
            if not mf.holds:
                continue
            problems += 1
            for c in sample_critical_directions(p, p.point, 16, seed=problems, objectives=False):
                directions += 1
                r = check_socq_direction(p, p.point, c.d)
                if not (r.holds and r.margin >= mf.margin - 1e-9):
                    violations += 1
        assert violations == 0, f"{violations} violations over {directions} directions"
        assert time.perf_counter() - start < 30.0


def test_criterion_03_necessity():
    with criterion(3, "necessity: every oracle-Pareto lattice point admits FJ (and KT under the CQ) multipliers"):
        start = time.perf_counter()
        violations = []
        points = 0
        for entry in load_all():
            p = entry.problem
            oracle = GridOracle(p, ORACLE_STEP)
            assert oracle.grid_step <= ORACLE_STEP
            for x in _candidates(p):
                if oracle.classify(x).classification != "pareto":
                    continue
                points += 1
                fj = certify_point(p, x, "fj", direction_budget=200)
                if fj.status != "certified" or any(o.status != "certified" for o in fj.outcomes):
                    violations.append((entry.id, x.tolist(), "fj", fj.status))
                kt = certify_point(p, x, "kt", direction_budget=200)
                if kt.socq.verdict == "holds-sampled" and kt.status != "certified":
                    violations.append((entry.id, x.tolist(), "kt", kt.status))
        assert points >= 20
        assert not violations, violations
        assert time.perf_counter() - start < 60.0


def test_criterion_04_sufficiency():
    with criterion(4, "sufficiency: KT-certified points are oracle-Pareto when the problem-level probe passes"):
        violations = []
        certified = passing = 0
        for entry in load_all():
            p = entry.problem
            probe = probe_problem_2kt_pseudoconvex(p, 10_000, seed=0, anchors=[p.point])
            if probe.refuted or probe.trials < 10_000:
                continue
            passing += 1
            oracle = GridOracle(p, ORACLE_STEP)
            for x in _candidates(p):
                v = certify_point(p, x, "kt", direction_budget=200, stop_at_refutation=True)
                if v.status != "certified":
                    continue
                certified += 1
                cls = oracle.classify(x).classification
                if cls != "pareto":
                    violations.append((entry.id, x.tolist(), cls))
        assert passing >= 3 and certified > 0
        assert not violations, violations


def test_criterion_05_weak_efficiency_equivalence():
    with criterion(5, "weak-efficiency equivalence on the 21-point sweep of the biobjective problem"):
        p = load("p1-biobjective-convex").problem
        probes = theorem3_probes(p, trials=10_000)
        assert not any(r.refuted for r in probes.values())
        oracle = GridOracle(p, ORACLE_STEP)
        mismatches = []
        for x1 in np.round(np.linspace(-0.5, 1.5, 21), 12):
            x = [float(x1), 0.0]
            kt = certify_point(p, x, "kt", direction_budget=200)
            assert kt.socq.verdict == "holds-sampled"
            verdict = theorem3_verdict(p, x, probes, kt)
            weak = oracle.classify(x).weak_pareto
            if (kt.status == "certified") != weak or (verdict.status == "weak-pareto-certified") != weak:
                mismatches.append((x, kt.status, verdict.status, weak))
        assert not mismatches, mismatches


def test_criterion_06_second_derivative_paths():
    with criterion(6, "second-order directional derivative: limit estimator matches the Taylor jet"):
        rng = np.random.default_rng(6)
        for _ in range(100):
            s = int(rng.integers(1, 4))
            e = parse(random_polynomial(rng, s), [f"x{k + 1}" for k in range(s)])
            x, d = rng.uniform(-1, 1, s), rng.uniform(-1, 1, s)
            a = second_dir_deriv(e, x, d)
            b = second_dir_deriv(e, x, d, force_limit=True)
            assert a.status == "exact"
            assert abs(a.value - b.value) <= 1e-6 or abs(a.value - b.value) <= 1e-8 * abs(a.value)
        f = load("signed-square").problem.objectives[0]
        for d, want in ((1.0, 2.0), (-1.0, -2.0)):
            r = second_dir_deriv(f, [0.0], [d])
            assert r.status == "estimated" and abs(r.value - want) < 1e-9


def test_criterion_07_lp_against_vertex_enumeration():
    with criterion(7, "simplex agrees with vertex enumeration on 500 random LPs"):
        rng = np.random.default_rng(7)
        for _ in range(500):
            lp = random_lp(rng)
            status, value = vertex_oracle(lp)
            r = solve(lp)
            assert r.status == status
            if status == "optimal":
                assert abs(r.value - value) <= 1e-7 * max(1.0, abs(value))


def test_criterion_08_probe_soundness():
    with criterion(8, "probe counterexamples re-verify; the cubic witness (0, -1) is found on 20 seeds"):
        box = [[-2, 2]]
        subjects = ["x1^3", "-x1^2", "x1^3 - x1", "sin(3*x1)", "min2(1, max2(x1, 0))", "x1*abs(x1)", "cos(x1)"]
        props = ["quasiconvex-on", "pseudoconvex", "two-pseudoconvex", "semistrict-quasiconvex"]
        refuted = 0
        for text in subjects:
            e = parse(text, ["x1"])
            for prop in props:
                for seed in range(3):
                    r = probe_function(prop, e, box, 20_000, seed)
                    if r.refuted:
                        refuted += 1
                        assert reverify(r, e), (text, prop, seed)
        for entry in load_all():
            r = probe_problem_2kt_pseudoconvex(entry.problem, 2000, seed=0)
            if r.refuted:
                refuted += 1
                assert reverify(r, entry.problem)
        assert refuted > 20
        cubic = load("cubic-objective").problem.objectives[0]
        hits = 0
        for seed in range(20):
            r = probe_function("two-pseudoconvex", cubic, box, 100_000, seed)
            hits += r.refuted and r.witness["x"] == [0.0] and r.witness["y"] == [-1.0]
        assert hits / 20 >= 0.99


def test_criterion_09_scalarization_cross_checks():
    with criterion(9, "component-restriction and single-index scalarization checks are consistent"):
        violations = []
        for entry in load_all():
            p = entry.problem
            hyp = all(
                not probe_quasiconvex(f, p.box, 10_000).refuted and not probe_semistrict_quasiconvex(f, p.box, 10_000).refuted
                for f in p.objectives
            )
            oracle = GridOracle(p, ORACLE_STEP)
            named = [p.point] + [f["point"] for f in entry.known_facts if "point" in f]
            lattice = [x for x in candidate_lattice(p, 3) if p.is_feasible(x, 1e-12)]
            for x in [np.asarray(v, float) for v in named] + lattice:
                if not p.is_feasible(x, 1e-12):
                    continue
                a = component_restriction_check(p, x, ORACLE_STEP, oracle=oracle)
                b = luc_schaible_check(p, x, ORACLE_STEP, hypotheses_verified=hyp, oracle=oracle)
                if not a.consistent:
                    violations.append((entry.id, x.tolist(), "component-restriction"))
                if not b.consistent:
                    violations.append((entry.id, x.tolist(), "single-index", hyp))
        assert not violations, violations


CLI_COMMANDS = [
    ["certify", "catalog:p1-biobjective-convex", "--mode", "kt"],
    ["certify", "catalog:paper-example-1", "--mode", "fj", "--directions", "100"],
    ["cq", "catalog:paper-example-1"],
    ["pareto", "catalog:p1-biobjective-convex", "--point", "2,0", "--kanniappan"],
    ["probe", "catalog:cubic-objective", "--property", "two-pseudoconvex", "--trials", "20000"],
    ["probe", "catalog:p1-biobjective-convex", "--property", "problem-2kt-pseudoconvex", "--trials", "2000"],
    ["deriv", "catalog:signed-square", "--fn", "f1", "--at", "0", "--dir", "-1"],
    ["catalog", "export", "cubic-objective"],
]


def _cli_json(argv, hash_seed: str) -> dict:
    env = dict(os.environ, PYTHONHASHSEED=hash_seed)
    out = subprocess.run([sys.executable, "-m", "mokkt", *argv, "--json", "--seed", "5"], capture_output=True, text=True, env=env)
    assert out.returncode in (0, 1, 2), out.stderr
    return json.loads(out.stdout)


def test_criterion_10_cli_determinism():
    with criterion(10, "CLI reports are identical across runs with the same seed"):
        for argv in CLI_COMMANDS:
            a = strip_volatile(_cli_json(argv, "1"))
            b = strip_volatile(_cli_json(argv, "2"))
            assert dumps(a) == dumps(b), argv
            c = strip_volatile(json.loads(dumps(run(argv + ["--json", "--seed", "5"])[1])))
            assert dumps(a) == dumps(c), argv


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
