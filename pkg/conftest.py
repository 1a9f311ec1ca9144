import json

import pytest

from popmatch.instance_io import parse_instance
from popmatch.oracle import EnumerationBudget


def build_instance(model, agents_a, agents_b, layers=None, sets=None, robust=None, capacities=None):
    """Instance from plain lists, routed through the file parser"""
    capacities = capacities or {}
    data = {
        "model": model,
        "agents_a": [{"id": a} for a in agents_a],
        "agents_b": [{"id": b, **({"capacity": capacities[b]} if b in capacities else {})} for b in agents_b],
    }
    if layers is not None:
        data["scenario"] = {"type": "layers", "profiles": layers}
    elif sets is not None:
        data["scenario"] = {"type": "independent", "sets": sets}
    else:
        k, profile = robust
        data["scenario"] = {"type": "robust", "k": k, "profile": profile}
    return parse_instance(json.dumps(data))


@pytest.fixture
def make_instance():
    return build_instance


@pytest.fixture
def budget():
    return EnumerationBudget(max_matchings=100_000, max_profiles=2_000)


@pytest.fixture
def single_edge(make_instance):
    return make_instance("two-sided", ["a1"], ["b1"], layers=[{"a1": ["b1"], "b1": ["a1"]}])


@pytest.fixture
def two_by_two(make_instance):
    """Both proposers want b1; b1 prefers a2"""
    return make_instance(
        "two-sided",
        ["a1", "a2"],
        ["b1", "b2"],
        layers=[{"a1": ["b1", "b2"], "a2": ["b1", "b2"], "b1": ["a2", "a1"], "b2": ["a1", "a2"]}],
    )


@pytest.fixture
def path_market(make_instance):
    """a2 - b1 - a1 - b2, where (a1, b1) is the mutual first choice"""
    return make_instance(
        "two-sided",
        ["a1", "a2"],
        ["b1", "b2"],
        layers=[{"a1": ["b1", "b2"], "a2": ["b1"], "b1": ["a1", "a2"], "b2": ["a1"]}],
    )


@pytest.fixture
def crowded_house(make_instance):
    """Three agents with one list b1 > b2 over unit houses"""
    lists = {a: ["b1", "b2"] for a in ("a1", "a2", "a3")}
    return make_instance("ha", ["a1", "a2", "a3"], ["b1", "b2"], layers=[lists])
