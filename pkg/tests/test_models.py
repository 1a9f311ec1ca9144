import json

import pytest
from pydantic import ValidationError

from popmatch.errors import InstanceFormatError
from popmatch.instance_io import parse_instance, parse_matching, serialize_instance, serialize_matching
from popmatch.models import UNMATCHED, Matching, PreferenceList, Verdict


def _raw(**overrides):
    data = {
        "model": "two-sided",
        "agents_a": [{"id": "a1"}, {"id": "a2"}],
        "agents_b": [{"id": "b1"}],
        "scenario": {"type": "layers", "profiles": [{"a1": ["b1"], "a2": ["b1"], "b1": ["a2", "a1"]}]},
    }
    data.update(overrides)
    return json.dumps(data)


def test_parse_two_sided_instance():
    instance = parse_instance(_raw())
    assert instance.edges == frozenset({("a1", "b1"), ("a2", "b1")})
    assert instance.neighbors("b1") == ("a1", "a2")
    assert instance.ranking_agents == ("a1", "a2", "b1")
    assert instance.flavor == "layers"
    assert instance.capacity("b1") == 1


def test_house_allocation_defaults_to_unit_capacity(make_instance):
    instance = make_instance("ha", ["a1", "a2"], ["b1", "b2"], layers=[{"a1": ["b2", "b1"], "a2": ["b1"]}])
    assert instance.is_ha
    assert instance.capacities == {"b1": 1, "b2": 1}
    assert instance.neighbors("b1") == ("a1", "a2")
    assert instance.ranking_agents == ("a1", "a2")


@pytest.mark.parametrize(
    "overrides, message",
    [
        ({"model": "three-sided"}, "unknown model"),
        ({"scenario": {"type": "fuzzy"}}, "unknown scenario type"),
        ({"scenario": {"type": "layers", "profiles": [{"a1": ["b1"], "a2": ["b1"], "b1": ["a1"]}]}}, "not mutual"),
        (
            {"scenario": {"type": "layers", "profiles": [{"a1": ["b1", "b1"], "a2": ["b1"], "b1": ["a2", "a1"]}]}},
            "duplicates",
        ),
        ({"scenario": {"type": "layers", "profiles": [{"a1": ["b1"], "b1": ["a1"]}]}}, "no preference list"),
        ({"agents_b": [{"id": "b1", "capacity": 2}]}, "unit capacities"),
        ({"agents_a": [{"id": "a1"}, {"id": "a1"}]}, "unique"),
        ({"scenario": {"type": "robust", "k": "one", "profile": {}}}, "integer 'k'"),
    ],
)
def test_malformed_instances_are_rejected(overrides, message):
    with pytest.raises(InstanceFormatError, match=message):
        parse_instance(_raw(**overrides))


def test_invalid_json_is_a_format_error():
    with pytest.raises(InstanceFormatError, match="not valid JSON"):
        parse_instance("{model: two-sided")


def test_reserved_id_is_rejected():
    with pytest.raises(InstanceFormatError):
        parse_instance(
            _raw(
                agents_b=[{"id": UNMATCHED}],
                scenario={"type": "layers", "profiles": [{"a1": [], "a2": [], UNMATCHED: []}]},
            )
        )


def test_layers_must_rank_the_same_neighbors(make_instance):
    with pytest.raises(InstanceFormatError, match="different neighbor set"):
        make_instance("ha", ["a1"], ["b1", "b2"], layers=[{"a1": ["b1", "b2"]}, {"a1": ["b1"]}])


def test_independent_lists_must_be_permutations(make_instance):
    with pytest.raises(InstanceFormatError, match="permutations"):
        make_instance("ha", ["a1"], ["b1", "b2"], sets={"a1": [["b1", "b2"], ["b2"]]})


def test_house_capacity_must_be_positive(make_instance):
    with pytest.raises(InstanceFormatError, match="positive"):
        make_instance("ha", ["a1"], ["b1"], layers=[{"a1": ["b1"]}], capacities={"b1": 0})


def test_serialization_is_canonical(make_instance):
    sets = {"a2": [["b1"]], "a1": [["b2", "b1"], ["b1", "b2"]]}
    instance = make_instance("ha", ["a2", "a1"], ["b1", "b2"], sets=sets, capacities={"b2": 2})
    text = serialize_instance(instance)
    assert text.endswith("\n")
    assert serialize_instance(parse_instance(text)) == text
    assert json.loads(text)["agents_b"] == [{"capacity": 1, "id": "b1"}, {"capacity": 2, "id": "b2"}]


def test_parse_matching_checks_the_instance(two_by_two):
    matching = parse_matching('[["a1", "b2"], ["a2", "b1"]]', two_by_two)
    assert matching.sorted_pairs() == [("a1", "b2"), ("a2", "b1")]
    assert serialize_matching(matching) == '[\n  [\n    "a1",\n    "b2"\n  ],\n  [\n    "a2",\n    "b1"\n  ]\n]\n'

    with pytest.raises(InstanceFormatError, match="more than once"):
        parse_matching('[["a1", "b1"], ["a1", "b2"]]', two_by_two)
    with pytest.raises(InstanceFormatError, match="capacity"):
        parse_matching('[["a1", "b1"], ["a2", "b1"]]', two_by_two)
    with pytest.raises(InstanceFormatError, match="twice"):
        parse_matching('[["a1", "b1"], ["a1", "b1"]]', two_by_two)
    with pytest.raises(InstanceFormatError, match="pair of ids"):
        parse_matching('[["a1"]]', two_by_two)


def test_parse_matching_rejects_non_edges(path_market):
    with pytest.raises(InstanceFormatError, match="not an edge"):
        parse_matching('[["a2", "b2"]]', path_market)


def test_preference_list_order():
    plist = PreferenceList(owner="a1", ranking=("b2", "b1"))
    assert plist.prefers("b2", "b1")
    assert not plist.prefers("b1", "b2")
    assert plist.prefers("b1", UNMATCHED)
    assert not plist.prefers(UNMATCHED, "b1")
    assert plist.position("b1") == 1
    assert "b3" not in plist
    assert str(plist) == "b2>b1"


def test_matching_lookups():
    matching = Matching.of([("a1", "b2"), ("a2", "b1")])
    assert matching.partner_map() == {"a1": "b2", "b2": "a1", "a2": "b1", "b1": "a2"}
    assert "a3" not in matching.partner_map()
    assert matching.house_of() == {"a1": "b2", "a2": "b1"}
    assert matching.occupants("b1") == ("a2",)
    assert str(matching) == "{(a1,b2), (a2,b1)}"


def test_verdict_carries_witness_only_on_failure():
    assert Verdict.ok().holds
    failed = Verdict.fail(("a1", "b1"), scenario="layer 0", reason="blocks")
    assert failed.witness == ("a1", "b1")
    with pytest.raises(ValidationError):
        Verdict(holds=True, witness=("a1", "b1"))
    with pytest.raises(ValidationError):
        Verdict(holds=False)
