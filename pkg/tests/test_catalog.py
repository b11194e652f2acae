from __future__ import annotations

import pytest

from mokkt.catalog import FACT_KINDS, UnknownEntry, check_fact, list_ids, load, load_all
from mokkt.problem import Problem

REQUIRED = {
    "paper-example-1",
    "p1-biobjective-convex",
    "cubic-objective",
    "signed-square",
    "degenerate-equal-gradients",
}


def _facts():
    return [
        pytest.param(e.id, k, id=f"{e.id}-{k}-{f['kind']}")
        for e in load_all()
        for k, f in enumerate(e.known_facts)
    ]


def test_required_entries_present():
    assert REQUIRED <= set(list_ids())


def test_unknown_entry():
    with pytest.raises(UnknownEntry):
        load("no-such-problem")


@pytest.mark.parametrize("entry_id", sorted(REQUIRED))
def test_entries_round_trip_through_problem_files(entry_id):
    p = load(entry_id).problem
    again = Problem.from_dict(p.to_dict())
    assert again.objectives == p.objectives and again.constraints == p.constraints and again.box == p.box


@pytest.mark.parametrize("entry_id", sorted(REQUIRED))
def test_facts_have_known_kinds_and_sources(entry_id):
    for fact in load(entry_id).known_facts:
        assert fact["kind"] in FACT_KINDS
        assert fact["source"] in {"published-example", "derived", "trivial"}


@pytest.mark.parametrize("entry_id, index", _facts())
def test_fact_reproduces(entry_id, index):
    entry = load(entry_id)
    ok, observed = check_fact(entry, entry.known_facts[index])
    assert ok, observed
