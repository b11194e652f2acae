"""Built-in worked problems with known analytic structure, and a checker for their facts."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .calculus import second_dir_deriv
from .cones import CriticalDirection, is_critical, sample_critical_directions
from .cq import check_mfcq, check_socq
from .gconvex import probe_function, probe_problem_2kt_pseudoconvex
from .kkt import certify_point, find_multipliers
from .pareto import GridOracle
from .problem import Problem

__all__ = ["CatalogEntry", "UnknownEntry", "list_ids", "load", "load_all", "check_fact", "FACT_KINDS"]

FACT_KINDS = (
    "mfcq",
    "socq",
    "certify",
    "multipliers",
    "pareto-class",
    "pareto-set",
    "probe",
    "problem-probe",
    "second-derivative",
)
ORACLE_STEP = 0.02
CANDIDATE_LEVEL = 4


class UnknownEntry(KeyError):
    pass


@dataclass
class CatalogEntry:
    id: str
    problem: Problem
    known_facts: list[dict] = field(default_factory=list)
    description: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    def facts(self, kind: str) -> list[dict]:
        return [f for f in self.known_facts if f["kind"] == kind]


def _files():
    return resources.files("mokkt") / "data" / "catalog"


def list_ids() -> list[str]:
    return sorted(p.name[: -len(".json")] for p in _files().iterdir() if p.name.endswith(".json"))


def load(entry_id: str) -> CatalogEntry:
    path = _files() / f"{entry_id}.json"
    if not path.is_file():
        raise UnknownEntry(f"unknown catalog entry {entry_id!r}; available: {', '.join(list_ids())}")
    raw = json.loads(path.read_text())
    problem = Problem.from_dict(raw | {"name": raw.get("name", entry_id)})
    return CatalogEntry(raw["id"], problem, raw.get("known_facts", []), raw.get("description", ""), raw)


def load_all() -> list[CatalogEntry]:
    return [load(i) for i in list_ids()]


def _expr(problem: Problem, label: str):
    group = problem.objectives if label[0] == "f" else problem.constraints
    return group[int(label[1:]) - 1]


def candidate_lattice(problem: Problem, level: int = CANDIDATE_LEVEL) -> np.ndarray:
    """Points of the dyadic lattice with 2^level cells per coordinate."""
    axes = [np.linspace(lo, hi, 2**level + 1) for lo, hi in problem.box]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, problem.dim)


def _on_set(x: np.ndarray, spec: dict) -> bool:
    if "points" in spec:
        return any(np.max(np.abs(x - np.asarray(p, float))) <= 1e-9 for p in spec["points"])
    a, b = (np.asarray(p, float) for p in spec["segment"])
    t = np.clip((x - a) @ (b - a) / ((b - a) @ (b - a)), 0.0, 1.0)
    return bool(np.max(np.abs(a + t * (b - a) - x)) <= 1e-9)


def check_fact(entry: CatalogEntry, fact: dict, seed: int = 0) -> tuple[bool, str]:
    """Re-derive one known fact with the library; returns (reproduced, observed)."""
    p = entry.problem
    kind = fact["kind"]
    if kind == "mfcq":
        got = "holds" if check_mfcq(p, fact["point"]).holds else "fails"
    elif kind == "socq":
        dirs = sample_critical_directions(p, fact["point"], 64, seed, objectives=False)
        got = check_socq(p, fact["point"], [c.d for c in dirs]).verdict
    elif kind == "certify":
        got = certify_point(p, fact["point"], fact["mode"], seed=seed).status
    elif kind == "multipliers":
        d = np.asarray(fact["direction"], float)
        ok, I, J = is_critical(p, fact["point"], d)
        cert = find_multipliers(p, fact["point"], CriticalDirection(d, I, J), fact["mode"]) if ok else None
        if cert is None:
            return False, "no certificate"
        same = np.allclose(cert.lam, fact["lambda"], atol=1e-9)
        return same, f"lambda={cert.lam.tolist()}"
    elif kind == "pareto-class":
        got = GridOracle(p, ORACLE_STEP).classify(fact["point"]).classification
    elif kind == "pareto-set":
        oracle = GridOracle(p, ORACLE_STEP)
        wrong = []
        for x in candidate_lattice(p):
            if not p.is_feasible(x, 1e-12):
                continue
            is_pareto = oracle.classify(x).classification == "pareto"
            if is_pareto != _on_set(x, fact["value"]):
                wrong.append(x.tolist())
        return not wrong, f"mismatches={wrong[:5]}"
    elif kind == "probe":
        fn = fact["function"]
        r = probe_function(fact["property"], _expr(p, fn), p.box, fact.get("trials", 10_000), seed, fn)
        got = r.outcome
        if "witness" in fact and r.refuted:
            same = all(np.allclose(r.witness[k], fact["witness"][k]) for k in fact["witness"])
            return got == fact["value"] and same, f"{got} {r.witness['x']} -> {r.witness['y']}"
    elif kind == "problem-probe":
        anchors = [p.point] if p.point is not None else []
        got = probe_problem_2kt_pseudoconvex(p, fact.get("trials", 10_000), seed, anchors).outcome
    elif kind == "second-derivative":
        sd = second_dir_deriv(_expr(p, fact["function"]), fact["point"], fact["direction"])
        ok = sd.status == fact["status"] and abs(sd.value - fact["value"]) < 1e-9
        return ok, f"{sd.value} ({sd.status})"
    else:
        raise ValueError(f"unknown fact kind {kind!r}")
    return got == fact["value"], str(got)
