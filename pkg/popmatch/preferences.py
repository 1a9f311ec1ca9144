"""Swap arithmetic and preference queries under each scenario flavor"""

import itertools
import logging
from collections import deque
from typing import Dict, Hashable, List, Optional, Sequence

import numpy as np

from popmatch.errors import FlavorError
from popmatch.models import (
    UNMATCHED,
    Independent,
    Layers,
    MarketInstance,
    PreferenceList,
    Robust,
    ScenarioSet,
)

logger = logging.getLogger(__name__)


def swap_distance(x: PreferenceList, y: PreferenceList) -> int:
    """
    Kendall tau distance: the minimum number of adjacent transpositions turning x into y

    Raises:
        ValueError: if the lists rank different sets
    """
    if set(x.ranking) != set(y.ranking):
        raise ValueError("swap distance needs two permutations of the same set")
    return sum(1 for p, q in itertools.combinations(x.ranking, 2) if y.position(p) > y.position(q))


def swap_up(plist: PreferenceList, v: str, k: int) -> PreferenceList:
    """Move v up min(k, position(v)) places, keeping every other relative order"""
    if k < 0:
        raise ValueError(f"swap budget must be non-negative, got {k}")
    if v not in plist:
        raise ValueError(f"{v} is not in the list of {plist.owner}")
    ranking = list(plist.ranking)
    pos = ranking.index(v)
    target = max(0, pos - k)
    del ranking[pos]
    ranking.insert(target, v)
    return PreferenceList(owner=plist.owner, ranking=tuple(ranking))


def swap_ball(plist: PreferenceList, k: int) -> List[PreferenceList]:
    """Every list within swap distance k, by breadth-first swap closure (distance, then lexicographic)"""
    if k < 0:
        raise ValueError(f"swap budget must be non-negative, got {k}")
    start = plist.ranking
    depth = {start: 0}
    queue = deque([start])
    while queue:
        current = queue.popleft()
        if depth[current] == k:
            continue
        for i in range(len(current) - 1):
            nxt = current[:i] + (current[i + 1], current[i]) + current[i + 2:]
            if nxt not in depth:
                depth[nxt] = depth[current] + 1
                queue.append(nxt)
    ordered = sorted(depth, key=lambda r: (depth[r], r))
    return [PreferenceList(owner=plist.owner, ranking=r) for r in ordered]


def realizable_lists(instance: MarketInstance, agent: str) -> List[PreferenceList]:
    """Distinct lists the agent may hold under the scenario, in a fixed order"""
    scenario = instance.scenario
    if isinstance(scenario, Robust):
        return swap_ball(scenario.profile[agent], scenario.k)
    seen = {}
    for plist in instance.lists_of(agent):
        seen.setdefault(plist.ranking, plist)
    return list(seen.values())


def may_prefer(instance: MarketInstance, agent: str, x: str, y: str) -> bool:
    """True iff some realizable list of agent ranks x strictly above y"""
    if x == y or x == UNMATCHED:
        # Unmatched is never preferred; still reject unknown agents
        instance.lists_of(agent)
        return False
    scenario = instance.scenario
    if isinstance(scenario, Robust):
        base = scenario.profile[agent] if agent in scenario.profile else instance.lists_of(agent)[0]
        if y == UNMATCHED:
            return x in base
        return base.position(x) - base.position(y) <= scenario.k
    return any(plist.prefers(x, y) for plist in instance.lists_of(agent))


def always_prefers(instance: MarketInstance, agent: str, x: str, y: str) -> bool:
    """True iff every realizable list of agent ranks x strictly above y"""
    if x == y:
        instance.lists_of(agent)
        return False
    return not may_prefer(instance, agent, y, x)


class RankTable:
    """
    Rank matrix of one agent's lists over its partners, for vectorised order queries

    A partner y is always above x when pos[l, x] - pos[l, y] > slack for every row l.
    Layers/Independent use every listed ranking with slack 0; Robust uses the base
    ranking with slack k.
    """

    def __init__(self, partners: Sequence[Hashable], rankings: Sequence[Sequence[Hashable]], slack: int = 0):
        self.partners = tuple(partners)
        self.index: Dict[Hashable, int] = {p: i for i, p in enumerate(self.partners)}
        self.slack = slack
        self.positions = np.zeros((max(len(rankings), 1), len(self.partners)), dtype=np.int64)
        for row, ranking in enumerate(rankings):
            cols = np.fromiter((self.index[p] for p in ranking), dtype=np.int64, count=len(ranking))
            self.positions[row, cols] = np.arange(len(ranking))

    @classmethod
    def for_agent(cls, instance: MarketInstance, agent: str, partners: Optional[Sequence[str]] = None) -> "RankTable":
        scenario = instance.scenario
        base = instance.base_list(agent)
        order = tuple(partners) if partners is not None else base.ranking
        if isinstance(scenario, Robust):
            return cls(order, [base.ranking], slack=scenario.k)
        return cls(order, [plist.ranking for plist in instance.lists_of(agent)], slack=0)

    def __len__(self) -> int:
        return len(self.partners)

    def may_prefer(self, x, y) -> bool:
        if x == y or x == UNMATCHED:
            return False
        if y == UNMATCHED:
            return True
        diff = self.positions[:, self.index[x]] - self.positions[:, self.index[y]]
        return bool((diff <= self.slack).any())

    def always_prefers(self, x, y) -> bool:
        return x != y and not self.may_prefer(y, x)

    def may_prefer_mask(self, y) -> np.ndarray:
        """Boolean mask over partners: which may be preferred to y"""
        if y == UNMATCHED:
            return np.ones(len(self.partners), dtype=bool)
        diff = self.positions - self.positions[:, [self.index[y]]]
        mask = (diff <= self.slack).any(axis=0)
        mask[self.index[y]] = False
        return mask

    def maximal(self, remaining: np.ndarray) -> np.ndarray:
        """Indices (from remaining) not always-dominated by another remaining partner"""
        if remaining.size == 0:
            return remaining
        # A dominator always sits earlier in row 0, so a sweep in that order
        # only has to test against maxima already found
        order = np.argsort(self.positions[0, remaining], kind="stable")
        candidates = remaining[order]
        sub = self.positions[:, candidates]
        alive = np.ones(candidates.size, dtype=bool)
        found = []
        for i in range(candidates.size):
            if not alive[i]:
                continue
            found.append(candidates[i])
            alive &= ~((sub - sub[:, [i]]) > self.slack).all(axis=0)
        return np.sort(np.array(found, dtype=remaining.dtype))

    def strictly_above(self, remaining: np.ndarray, x) -> np.ndarray:
        """Mask over remaining: which partners are always above x"""
        col = self.positions[:, [self.index[x]]]
        return ((col - self.positions[:, remaining]) > self.slack).all(axis=0)

    def strictly_below(self, remaining: np.ndarray, x) -> np.ndarray:
        """Mask over remaining: which partners are always below x"""
        col = self.positions[:, [self.index[x]]]
        return ((self.positions[:, remaining] - col) > self.slack).all(axis=0)


def with_scenario(instance: MarketInstance, scenario: ScenarioSet) -> MarketInstance:
    """Rebuild (and revalidate) an instance around a new scenario"""
    return MarketInstance(
        model=instance.model,
        agents_a=instance.agents_a,
        agents_b=instance.agents_b,
        capacities=dict(instance.capacities),
        scenario=scenario,
        last_resort=instance.last_resort,
    )


def layers_to_independent(instance: MarketInstance) -> MarketInstance:
    """P_u = the agent's list in every layer, multiplicity kept; drops cross-agent correlation"""
    if not isinstance(instance.scenario, Layers):
        raise FlavorError(f"expected a layers scenario, got {instance.flavor}")
    sets = {agent: instance.lists_of(agent) for agent in instance.ranking_agents}
    return with_scenario(instance, Independent(sets=sets))


def independent_to_layers(instance: MarketInstance) -> MarketInstance:
    """Layer i holds every agent's i-th possible list; all sets must have one size"""
    scenario = instance.scenario
    if not isinstance(scenario, Independent):
        raise FlavorError(f"expected an independent scenario, got {instance.flavor}")
    sizes = {len(lists) for lists in scenario.sets.values()}
    if len(sizes) > 1:
        raise FlavorError(f"independent sets have different sizes {sorted(sizes)}")
    size = sizes.pop() if sizes else 1
    profiles = tuple({agent: lists[i] for agent, lists in scenario.sets.items()} for i in range(size))
    return with_scenario(instance, Layers(profiles=profiles))


def vote_sets(instance: MarketInstance) -> Dict[str, Sequence[PreferenceList]]:
    """Lists each agent votes with under aggregation: one per layer, or every list of P_u"""
    scenario = instance.scenario
    if isinstance(scenario, Robust):
        raise FlavorError("aggregated voting is not defined for the robust flavor")
    if isinstance(scenario, Independent):
        sizes = {len(lists) for lists in scenario.sets.values()}
        if len(sizes) > 1:
            raise FlavorError("aggregated voting needs every agent to hold the same number of lists")
    return {agent: instance.lists_of(agent) for agent in instance.ranking_agents}
