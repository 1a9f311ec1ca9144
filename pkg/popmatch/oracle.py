"""
Exhaustive reference checks

Everything here follows the definitions literally: enumerate every matching and
every realizable profile, count votes, and report the first counterexample in a
fixed lexicographic order. Meant for small instances only.
"""

import itertools
import logging
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field

from popmatch.config import Settings
from popmatch.errors import BudgetExceededError, FlavorError
from popmatch.models import (
    UNMATCHED,
    Independent,
    Layers,
    MarketInstance,
    Matching,
    PreferenceList,
    Profile,
    Robust,
    Verdict,
    describe_profile,
)
from popmatch.preferences import swap_ball, vote_sets

logger = logging.getLogger(__name__)


class Property(str, Enum):
    STABLE = "stable"
    POPULAR = "popular"
    DOMINANT = "dominant"
    CERTAINLY_STABLE = "certainly-stable"
    CERTAINLY_POPULAR = "certainly-popular"
    CERTAINLY_DOMINANT = "certainly-dominant"
    SUM_POPULAR = "sum-popular"
    SUM_DOMINANT = "sum-dominant"
    K_ROBUST_STABLE = "k-robust-stable"
    K_ROBUST_POPULAR = "k-robust-popular"
    K_ROBUST_DOMINANT = "k-robust-dominant"

    @property
    def base(self) -> str:
        """stable, popular or dominant"""
        return self.value.rsplit("-", 1)[-1]


class EnumerationBudget(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_matchings: int = Field(default=1_000_000, gt=0)
    max_profiles: int = Field(default=10_000, gt=0)

    @classmethod
    def from_settings(cls, settings: Settings) -> "EnumerationBudget":
        return cls(max_matchings=settings.budget_matchings, max_profiles=settings.budget_profiles)


def enumerate_matchings(instance: MarketInstance, budget: Optional[EnumerationBudget] = None) -> Iterator[Matching]:
    """
    Every capacity-respecting matching exactly once

    Agents are visited in sorted order, each first left unmatched and then
    given its neighbors in sorted order.

    Raises:
        BudgetExceededError: once more than budget.max_matchings matchings were produced
    """
    budget = budget or EnumerationBudget()
    agents = sorted(instance.agents_a)
    options = [(UNMATCHED,) + instance.neighbors(a) for a in agents]
    load: Dict[str, int] = {b: 0 for b in instance.agents_b}
    chosen: List[Tuple[str, str]] = []
    produced = 0

    def extend(i: int) -> Iterator[Matching]:
        nonlocal produced
        if i == len(agents):
            produced += 1
            if produced > budget.max_matchings:
                raise BudgetExceededError("matching", budget.max_matchings)
            yield Matching.of(chosen)
            return
        for b in options[i]:
            if b == UNMATCHED:
                yield from extend(i + 1)
                continue
            if load[b] >= instance.capacity(b):
                continue
            load[b] += 1
            chosen.append((agents[i], b))
            yield from extend(i + 1)
            chosen.pop()
            load[b] -= 1

    return extend(0)


def _check_profile_budget(count: int, budget: EnumerationBudget) -> None:
    if count > budget.max_profiles:
        raise BudgetExceededError("profile", budget.max_profiles)


def _product(per_agent: Dict[str, Sequence[PreferenceList]], budget: EnumerationBudget) -> List[Profile]:
    agents = sorted(per_agent)
    total = 1
    for a in agents:
        total *= len(per_agent[a])
    _check_profile_budget(total, budget)
    return [dict(zip(agents, combo)) for combo in itertools.product(*(per_agent[a] for a in agents))]


def enumerate_profiles(instance: MarketInstance, budget: Optional[EnumerationBudget] = None) -> List[Profile]:
    """
    Every realizable profile: the layers, the product of the sets, or the product of swap balls

    Raises:
        BudgetExceededError: when there are more than budget.max_profiles profiles
    """
    budget = budget or EnumerationBudget()
    scenario = instance.scenario
    if isinstance(scenario, Layers):
        _check_profile_budget(len(scenario.profiles), budget)
        return [dict(profile) for profile in scenario.profiles]
    if isinstance(scenario, Independent):
        return _product(dict(scenario.sets), budget)
    return _product({a: swap_ball(plist, scenario.k) for a, plist in scenario.profile.items()}, budget)


def _vote(plist: PreferenceList, mine: str, theirs: str) -> int:
    if plist.prefers(mine, theirs):
        return 1
    if plist.prefers(theirs, mine):
        return -1
    return 0


def _partners(instance: MarketInstance, matching: Matching) -> Dict[str, str]:
    return matching.house_of() if instance.is_ha else matching.partner_map()


def delta(instance: MarketInstance, profile: Profile, m: Matching, n: Matching) -> int:
    """Votes for M minus votes for N; both sides vote in two-sided markets, only A in house allocation"""
    mine, theirs = _partners(instance, m), _partners(instance, n)
    return sum(
        _vote(profile[u], mine.get(u, UNMATCHED), theirs.get(u, UNMATCHED)) for u in instance.ranking_agents
    )


def _summed_delta(
    instance: MarketInstance, lists: Dict[str, Sequence[PreferenceList]], m: Matching, n: Matching
) -> int:
    mine, theirs = _partners(instance, m), _partners(instance, n)
    total = 0
    for u in instance.ranking_agents:
        x, y = mine.get(u, UNMATCHED), theirs.get(u, UNMATCHED)
        total += sum(_vote(plist, x, y) for plist in lists[u])
    return total


def is_maximal(instance: MarketInstance, matching: Matching) -> bool:
    """No edge joins an unmatched agent to a house with a free seat"""
    placed = matching.house_of()
    load = {b: len(matching.occupants(b)) for b in instance.agents_b}
    return not any(a not in placed and load[b] < instance.capacity(b) for a, b in instance.edges)


def _blocking_edge(instance: MarketInstance, profile: Profile, matching: Matching) -> Optional[Tuple[str, str]]:
    partner = matching.partner_map()
    for a, b in sorted(instance.edges):
        if (a, b) in matching:
            continue
        if profile[a].prefers(b, partner.get(a, UNMATCHED)) and profile[b].prefers(a, partner.get(b, UNMATCHED)):
            return a, b
    return None


def _scenarios(instance: MarketInstance, prop: Property, budget: EnumerationBudget) -> List[Tuple[str, Profile]]:
    """(description, profile) pairs the property quantifies over"""
    scenario = instance.scenario
    if prop.value.startswith("k-robust") and not isinstance(scenario, Robust):
        raise FlavorError("k-robust properties need the robust flavor")
    if prop in (Property.STABLE, Property.POPULAR, Property.DOMINANT):
        first = {u: instance.lists_of(u)[0] for u in instance.ranking_agents}
        return [("base profile", first)]
    profiles = enumerate_profiles(instance, budget)
    if isinstance(scenario, Layers):
        return [(f"layer {i}", p) for i, p in enumerate(profiles)]
    return [(describe_profile(p), p) for p in profiles]


def brute_check(
    instance: MarketInstance,
    matching: Matching,
    prop: Property,
    budget: Optional[EnumerationBudget] = None,
) -> Verdict:
    """
    Decide a property of a matching by enumeration

    Raises:
        FlavorError: stability on house allocation, k-robust without the robust flavor,
            or summed votes under the robust flavor
        BudgetExceededError: when enumeration exceeds the budget
    """
    budget = budget or EnumerationBudget()
    prop = Property(prop)
    if prop.base == "stable" and instance.is_ha:
        raise FlavorError("stability is defined for two-sided markets only")
    instance.check_matching(matching)

    if prop in (Property.SUM_POPULAR, Property.SUM_DOMINANT):
        lists = vote_sets(instance)
        for other in enumerate_matchings(instance, budget):
            d = _summed_delta(instance, lists, matching, other)
            if d < 0 or (prop == Property.SUM_DOMINANT and d == 0 and len(other) > len(matching)):
                return Verdict.fail(other, scenario="sum over every list", reason=f"summed vote difference {d}")
        return Verdict.ok()

    scenarios = _scenarios(instance, prop, budget)
    if prop.base == "stable":
        for label, profile in scenarios:
            edge = _blocking_edge(instance, profile, matching)
            if edge:
                return Verdict.fail(edge, scenario=label, reason=f"({edge[0]}, {edge[1]}) blocks")
        return Verdict.ok()

    others = list(enumerate_matchings(instance, budget))
    for label, profile in scenarios:
        for other in others:
            d = delta(instance, profile, matching, other)
            if d < 0 or (prop.base == "dominant" and d == 0 and len(other) > len(matching)):
                return Verdict.fail(other, scenario=label, reason=f"vote difference {d}")
    return Verdict.ok()


def brute_exists(
    instance: MarketInstance, prop: Property, budget: Optional[EnumerationBudget] = None
) -> Optional[Matching]:
    """First matching in enumeration order with the property, or None"""
    budget = budget or EnumerationBudget()
    prop = Property(prop)
    for matching in enumerate_matchings(instance, budget):
        if brute_check(instance, matching, prop, budget).holds:
            logger.debug(f"Oracle found {prop.value} matching {matching}")
            return matching
    logger.debug(f"Oracle found no {prop.value} matching")
    return None
