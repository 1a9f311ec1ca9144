"""Instance and matching files: parsing, validation and canonical serialization"""

import json
import logging
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from popmatch.errors import InstanceFormatError
from popmatch.models import (
    Independent,
    Layers,
    MarketInstance,
    MarketModel,
    Matching,
    PreferenceList,
    Robust,
)
from popmatch.utils import canonical_json

logger = logging.getLogger(__name__)


def _load_json(text: str, what: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceFormatError(f"{what} is not valid JSON: {e}") from e


def _ranking(agent: str, raw: Any) -> PreferenceList:
    if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
        raise InstanceFormatError(f"preference list of {agent} must be an array of ids")
    return PreferenceList(owner=agent, ranking=tuple(raw))


def _profile(raw: Any) -> Dict[str, PreferenceList]:
    if not isinstance(raw, dict):
        raise InstanceFormatError("a profile must map agent ids to preference lists")
    return {agent: _ranking(agent, ranking) for agent, ranking in raw.items()}


def _scenario(raw: Any):
    if not isinstance(raw, dict) or "type" not in raw:
        raise InstanceFormatError("scenario must be an object with a 'type'")
    kind = raw["type"]
    if kind == "layers":
        profiles = raw.get("profiles")
        if not isinstance(profiles, list):
            raise InstanceFormatError("layers scenario needs a 'profiles' array")
        return Layers(profiles=tuple(_profile(p) for p in profiles))
    if kind == "independent":
        sets = raw.get("sets")
        if not isinstance(sets, dict):
            raise InstanceFormatError("independent scenario needs a 'sets' object")
        parsed = {}
        for agent, lists in sets.items():
            if not isinstance(lists, list):
                raise InstanceFormatError(f"possible lists of {agent} must be an array")
            parsed[agent] = tuple(_ranking(agent, r) for r in lists)
        return Independent(sets=parsed)
    if kind == "robust":
        k = raw.get("k")
        if not isinstance(k, int) or isinstance(k, bool):
            raise InstanceFormatError("robust scenario needs an integer 'k'")
        return Robust(k=k, profile=_profile(raw.get("profile")))
    raise InstanceFormatError(f"unknown scenario type {kind!r}")


def _agents(raw: Any, side: str, allow_capacity: bool) -> List[Dict[str, Any]]:
    if not isinstance(raw, list):
        raise InstanceFormatError(f"{side} must be an array of {{id, capacity?}} objects")
    for entry in raw:
        if not isinstance(entry, dict) or not isinstance(entry.get("id"), str):
            raise InstanceFormatError(f"every entry of {side} needs a string 'id'")
        if "capacity" in entry:
            if not allow_capacity:
                raise InstanceFormatError(f"{side} entries cannot carry a capacity")
            if not isinstance(entry["capacity"], int) or isinstance(entry["capacity"], bool):
                raise InstanceFormatError(f"capacity of {entry['id']} must be an integer")
    return raw


def parse_instance(text: str) -> MarketInstance:
    """
    Parse and validate an instance file

    Args:
        text: UTF-8 JSON content

    Returns:
        Validated MarketInstance

    Raises:
        InstanceFormatError: on malformed syntax or any model invariant violation
    """
    data = _load_json(text, "instance")
    if not isinstance(data, dict):
        raise InstanceFormatError("instance must be a JSON object")
    missing = [key for key in ("model", "agents_a", "agents_b", "scenario") if key not in data]
    if missing:
        raise InstanceFormatError(f"instance is missing keys {missing}")
    try:
        model = MarketModel(data["model"])
    except ValueError:
        raise InstanceFormatError(f"unknown model {data['model']!r}")

    try:
        agents_a = _agents(data["agents_a"], "agents_a", allow_capacity=False)
        agents_b = _agents(data["agents_b"], "agents_b", allow_capacity=True)
        if model == MarketModel.HA:
            capacities = {entry["id"]: entry.get("capacity", 1) for entry in agents_b}
        else:
            capacities = {entry["id"]: entry["capacity"] for entry in agents_b if "capacity" in entry}
        instance = MarketInstance(
            model=model,
            agents_a=tuple(entry["id"] for entry in agents_a),
            agents_b=tuple(entry["id"] for entry in agents_b),
            capacities=capacities,
            scenario=_scenario(data["scenario"]),
            last_resort=data.get("last_resort"),
        )
    except ValidationError as e:
        # Surface the first pydantic message, which names the broken invariant
        first = e.errors()[0]
        raise InstanceFormatError(f"invalid instance: {first['msg']}") from e
    logger.debug(f"Parsed {model.value} instance with {len(instance.agents_a)}+{len(instance.agents_b)} agents")
    return instance


def _profile_json(profile: Dict[str, PreferenceList]) -> Dict[str, List[str]]:
    return {agent: list(plist.ranking) for agent, plist in profile.items()}


def instance_to_dict(instance: MarketInstance) -> Dict[str, Any]:
    scenario = instance.scenario
    if isinstance(scenario, Layers):
        scenario_json: Dict[str, Any] = {
            "type": "layers",
            "profiles": [_profile_json(p) for p in scenario.profiles],
        }
    elif isinstance(scenario, Independent):
        scenario_json = {
            "type": "independent",
            "sets": {agent: [list(p.ranking) for p in lists] for agent, lists in scenario.sets.items()},
        }
    else:
        scenario_json = {"type": "robust", "k": scenario.k, "profile": _profile_json(scenario.profile)}

    if instance.is_ha:
        agents_b = [{"id": b, "capacity": instance.capacity(b)} for b in instance.agents_b]
    else:
        agents_b = [{"id": b} for b in instance.agents_b]
    data = {
        "model": instance.model.value,
        "agents_a": [{"id": a} for a in instance.agents_a],
        "agents_b": agents_b,
        "scenario": scenario_json,
    }
    if instance.last_resort is not None:
        data["last_resort"] = instance.last_resort
    return data


def serialize_instance(instance: MarketInstance) -> str:
    """Canonical JSON; parse_instance(serialize_instance(x)) rebuilds x"""
    return canonical_json(instance_to_dict(instance))


def parse_matching(text: str, instance: Optional[MarketInstance] = None) -> Matching:
    """
    Parse a matching file (array of [a, b] pairs), optionally checking it against an instance

    Raises:
        InstanceFormatError: if the file is malformed or the pairs violate the instance
    """
    data = _load_json(text, "matching")
    if not isinstance(data, list):
        raise InstanceFormatError("matching must be an array of [a, b] pairs")
    pairs = []
    for pair in data:
        if not isinstance(pair, list) or len(pair) != 2 or not all(isinstance(x, str) for x in pair):
            raise InstanceFormatError(f"matching entry {pair!r} is not an [a, b] pair of ids")
        pairs.append((pair[0], pair[1]))
    if len(set(pairs)) != len(pairs):
        raise InstanceFormatError("matching lists a pair twice")
    matching = Matching.of(pairs)
    if instance is not None:
        try:
            instance.check_matching(matching)
        except ValueError as e:
            raise InstanceFormatError(f"matching does not fit the instance: {e}") from e
    return matching


def serialize_matching(matching: Matching) -> str:
    return canonical_json([list(pair) for pair in matching.sorted_pairs()])
