"""k-robust popular house allocation, built without a last-resort house"""

import logging
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from pydantic import BaseModel, ConfigDict

from popmatch.errors import FlavorError
from popmatch.house_allocation import HACriterion, popular_ha, verify_ha
from popmatch.models import Edge, Layers, MarketInstance, Matching, Robust, Verdict
from popmatch.preferences import with_scenario

logger = logging.getLogger(__name__)


class RobustStructure(BaseModel):
    """
    Single-house agents per house and the one house each flexible agent may hold

    only[b] lists the agents whose sole acceptable house is b. target[a] is set
    for agents with two or more acceptable houses: the house with a free seat
    among single-house agents such that every house a may prefer to it within
    k swaps is already claimed by its single-house agents.
    """

    model_config = ConfigDict(frozen=True)

    k: int
    only: Dict[str, FrozenSet[str]]
    target: Dict[str, Optional[str]]

    def saturated(self, house: str, capacity: int) -> bool:
        return len(self.only.get(house, frozenset())) >= capacity


def _require_robust_ha(instance: MarketInstance) -> Robust:
    if not instance.is_ha or not isinstance(instance.scenario, Robust):
        raise FlavorError("k-robust popular house allocation needs a house allocation robust instance")
    if instance.last_resort is not None:
        raise FlavorError("robust house allocation works on instances without a last-resort house")
    return instance.scenario


def robust_structures(instance: MarketInstance, k: Optional[int] = None) -> RobustStructure:
    """
    Compute O(b) for every house and the target house of every flexible agent

    Args:
        instance: house allocation instance under the robust flavor
        k: swap budget; defaults to the instance's

    Raises:
        FlavorError: for other flavors or a last-resort instance
    """
    scenario = _require_robust_ha(instance)
    k = scenario.k if k is None else k
    only: Dict[str, Set[str]] = {b: set() for b in instance.agents_b}
    for a in instance.agents_a:
        ranking = scenario.profile[a].ranking
        if len(ranking) == 1:
            only[ranking[0]].add(a)

    def saturated(b: str) -> bool:
        return len(only[b]) >= instance.capacity(b)

    target: Dict[str, Optional[str]] = {}
    for a in sorted(instance.agents_a):
        ranking = scenario.profile[a].ranking
        if len(ranking) < 2:
            continue
        candidates = []
        for pos, b in enumerate(ranking):
            if saturated(b):
                continue
            # Houses above b, or at most k places below it, can be swapped over b
            rivals = ranking[:pos] + ranking[pos + 1 : pos + 1 + k]
            if all(saturated(other) for other in rivals):
                candidates.append(b)
        if len(candidates) > 1:
            logger.warning(f"Several target houses for {a}: {candidates}; keeping {candidates[0]}")
        target[a] = candidates[0] if candidates else None
    return RobustStructure(k=k, only={b: frozenset(s) for b, s in only.items()}, target=target)


def _precondition_failure(instance: MarketInstance, structure: RobustStructure) -> Optional[Tuple[str, str]]:
    """(agent, house): a flexible agent with no target and an acceptable house still open to it"""
    scenario = instance.scenario
    for a, house in sorted(structure.target.items()):
        if house is not None:
            continue
        for b in scenario.profile[a].ranking:
            if not structure.saturated(b, instance.capacity(b)):
                return a, b
    return None


def _base_as_layer(instance: MarketInstance) -> MarketInstance:
    return with_scenario(instance, Layers(profiles=(dict(instance.scenario.profile),)))


def k_robust_popular_ha(instance: MarketInstance, k: Optional[int] = None) -> Optional[Matching]:
    """
    Matching popular in every profile within k swaps per agent, or None if there is none

    With k = 0 this is the single-profile popular matching of the base profile.
    """
    scenario = _require_robust_ha(instance)
    k = scenario.k if k is None else k
    if k == 0:
        return popular_ha(_base_as_layer(instance))

    structure = robust_structures(instance, k)
    failure = _precondition_failure(instance, structure)
    if failure:
        agent, house = failure
        logger.info(f"No {k}-robust popular matching: {agent} has no target house but {house} has a free seat")
        return None

    pairs: List[Edge] = []
    for b in sorted(instance.agents_b):
        q = instance.capacity(b)
        owners = sorted(structure.only[b])
        if len(owners) >= q:
            pairs.extend((a, b) for a in owners[:q])
            continue
        seated = owners + sorted(a for a, house in structure.target.items() if house == b)
        if len(seated) > q:
            logger.info(f"No {k}-robust popular matching: {b} is wanted by {len(seated)} agents for {q} seats")
            return None
        pairs.extend((a, b) for a in seated)
    matching = Matching.of(pairs)
    logger.info(f"Found {k}-robust popular matching with {len(matching)} pairs")
    return matching


def verify_k_robust(instance: MarketInstance, matching: Matching, k: Optional[int] = None) -> Verdict:
    """
    Check the three seat conditions of k-robust popularity

    Flexible agents sit at their target house (or stay unmatched without one);
    houses claimed by their single-house agents are filled by them; every
    single-house agent of an unclaimed house is seated there.
    """
    scenario = _require_robust_ha(instance)
    k = scenario.k if k is None else k
    if k == 0:
        return verify_ha(_base_as_layer(instance), matching, HACriterion.POPULAR)

    structure = robust_structures(instance, k)
    failure = _precondition_failure(instance, structure)
    if failure:
        agent, house = failure
        reason = f"{agent} has no target house but {house} has a free seat"
        return Verdict.fail((agent, house), scenario=f"{k} swaps", reason=reason)

    placed = matching.house_of()
    for a, house in sorted(structure.target.items()):
        held = placed.get(a)
        if held != house:
            witness = (a, held) if held else (a, house)
            where = f"{held}" if held else "no house"
            return Verdict.fail(witness, scenario=f"{k} swaps", reason=f"{a} holds {where} instead of {house}")
    for b in sorted(instance.agents_b):
        q = instance.capacity(b)
        owners = structure.only[b]
        seated = set(matching.occupants(b))
        if len(owners) >= q:
            if len(seated) < q or not seated <= owners:
                outsider = sorted(owners - seated)[0]
                reason = f"{b} is not filled by its single-house agents"
                return Verdict.fail((outsider, b), scenario=f"{k} swaps", reason=reason)
        else:
            missing = sorted(owners - seated)
            if missing:
                return Verdict.fail((missing[0], b), scenario=f"{k} swaps", reason=f"{missing[0]} is left out of {b}")
    return Verdict.ok()
