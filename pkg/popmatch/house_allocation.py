"""
House allocation with one-sided preferences

Popular matchings in a single profile follow the first/pseudo-second house
characterization over the last-resort completion: a matching is popular iff it
is A-perfect, uses only (a, f(a)) and (a, s(a)) edges and saturates every house
with at least as many admirers as seats using admirers only. The certainly
popular solvers apply that characterization to every realizable profile at once.
"""

import logging
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from popmatch.assignment import FORBIDDEN, FillProblem, min_cost_assignment, solve_fill
from popmatch.errors import FlavorError, InstanceFormatError
from popmatch.models import (
    LAST_RESORT,
    UNMATCHED,
    Edge,
    Independent,
    Layers,
    MarketInstance,
    Matching,
    PreferenceList,
    Profile,
    Robust,
    Verdict,
)
from popmatch.preferences import RankTable, realizable_lists, vote_sets, with_scenario

logger = logging.getLogger(__name__)


class HACriterion(str, Enum):
    POPULAR = "popular"
    CERTAINLY_POPULAR = "certainly-popular"
    SUM_POPULAR = "sum-popular"
    K_ROBUST_POPULAR = "k-robust-popular"


class ProfileGraph(BaseModel):
    """First houses, pseudo-second houses and admirers of one profile"""

    model_config = ConfigDict(frozen=True)

    first: Dict[str, str]
    second: Dict[str, str]
    admirers: Dict[str, FrozenSet[str]]
    tight: FrozenSet[str]

    @property
    def edges(self) -> FrozenSet[Edge]:
        return frozenset((a, b) for a, b in self.first.items()) | frozenset(self.second.items())

    def allows(self, a: str, b: str) -> bool:
        return self.first.get(a) == b or self.second.get(a) == b


class AdmirerAnalysis(BaseModel):
    """Certain admirers, possible admirers and possibly-better houses over every realizable list"""

    model_config = ConfigDict(frozen=True)

    certain: Dict[str, FrozenSet[str]]
    possible: Dict[str, FrozenSet[str]]
    better: Dict[Edge, FrozenSet[str]]

    def possibly_better(self, a: str, b: str) -> FrozenSet[str]:
        return self.better.get((a, b), frozenset())


def _require_ha(instance: MarketInstance) -> None:
    if not instance.is_ha:
        raise FlavorError("operation needs a house allocation instance")


def append_last_resort(instance: MarketInstance) -> MarketInstance:
    """
    Add a house of capacity |A| ranked last by every agent in every list

    Returns the instance unchanged when it already carries one.

    Raises:
        FlavorError: for two-sided markets or the robust flavor
    """
    _require_ha(instance)
    if instance.last_resort is not None:
        return instance
    scenario = instance.scenario
    if isinstance(scenario, Robust):
        raise FlavorError("a last-resort house changes the swap ball; not allowed under the robust flavor")

    def extend(plist: PreferenceList) -> PreferenceList:
        return PreferenceList(owner=plist.owner, ranking=plist.ranking + (LAST_RESORT,))

    if isinstance(scenario, Layers):
        new_scenario = Layers(
            profiles=tuple({a: extend(p) for a, p in profile.items()} for profile in scenario.profiles)
        )
    else:
        new_scenario = Independent(sets={a: tuple(extend(p) for p in lists) for a, lists in scenario.sets.items()})
    capacities = dict(instance.capacities)
    capacities[LAST_RESORT] = max(1, len(instance.agents_a))
    return MarketInstance(
        model=instance.model,
        agents_a=instance.agents_a,
        agents_b=instance.agents_b + (LAST_RESORT,),
        capacities=capacities,
        scenario=new_scenario,
        last_resort=LAST_RESORT,
    )


def first_profile(instance: MarketInstance) -> Profile:
    return {a: instance.lists_of(a)[0] for a in instance.ranking_agents}


def _complete_profile(instance: MarketInstance, profile: Profile) -> Profile:
    """Append the last-resort house to lists that lack it"""
    house = instance.last_resort
    completed = {}
    for a, plist in profile.items():
        if plist.ranking and plist.ranking[-1] == house:
            completed[a] = plist
        else:
            completed[a] = PreferenceList(owner=a, ranking=plist.ranking + (house,))
    return completed


def profile_graph(instance: MarketInstance, profile: Profile) -> ProfileGraph:
    """
    Compute f, s, admirers and tight houses of one profile

    s(a) is f(a) when f(a) has no more admirers than seats; otherwise it is the
    best house of a with fewer admirers than seats.

    Raises:
        FlavorError: if the instance has no last-resort house
    """
    _require_ha(instance)
    if instance.last_resort is None:
        raise FlavorError("profile graphs need the last-resort completion")
    first = {a: profile[a].ranking[0] for a in instance.agents_a}
    admirers: Dict[str, Set[str]] = {b: set() for b in instance.agents_b}
    for a, b in first.items():
        admirers[b].add(a)
    count = {b: len(fans) for b, fans in admirers.items()}
    tight = frozenset(b for b in instance.agents_b if count[b] >= instance.capacity(b))

    second = {}
    for a, f in first.items():
        if count[f] <= instance.capacity(f):
            second[a] = f
            continue
        second[a] = next(b for b in profile[a].ranking if count[b] < instance.capacity(b))
    return ProfileGraph(
        first=first,
        second=second,
        admirers={b: frozenset(fans) for b, fans in admirers.items()},
        tight=tight,
    )


def _fill_problem(instance: MarketInstance, edges: Set[Edge], required: Set[str]) -> FillProblem:
    return FillProblem(
        edges=frozenset(edges),
        capacities={b: instance.capacity(b) for b in instance.agents_b},
        required_fill=frozenset(required),
        a_perfect=True,
        agents=instance.agents_a,
    )


def _strip_last_resort(instance: MarketInstance, matching: Matching) -> Matching:
    return matching.without_house(instance.last_resort)


def popular_ha(instance: MarketInstance, profile: Optional[Profile] = None) -> Optional[Matching]:
    """
    Popular matching of one profile, or None if there is none

    Args:
        instance: house allocation market; the last-resort house is added when missing
        profile: the profile to solve; defaults to the first listed one

    Returns:
        Matching over real houses; agents left for the last-resort house stay unmatched
    """
    instance = append_last_resort(instance)
    profile = _complete_profile(instance, profile if profile is not None else first_profile(instance))
    graph = profile_graph(instance, profile)
    edges = {(a, b) for a, b in graph.edges if b not in graph.tight or a in graph.admirers[b]}
    matching = solve_fill(_fill_problem(instance, edges, set(graph.tight)))
    if matching is None:
        logger.info("No popular matching exists")
        return None
    result = _strip_last_resort(instance, matching)
    logger.info(f"Found popular matching with {len(result)} pairs")
    return result


def admirer_analysis(instance: MarketInstance) -> AdmirerAnalysis:
    """
    Certain and possible admirers of every house, and houses possibly better than each edge

    Raises:
        FlavorError: under the robust flavor
    """
    _require_ha(instance)
    if isinstance(instance.scenario, Robust):
        raise FlavorError("admirer analysis covers the layers and independent flavors")
    certain: Dict[str, Set[str]] = {b: set() for b in instance.agents_b}
    possible: Dict[str, Set[str]] = {b: set() for b in instance.agents_b}
    better: Dict[Edge, FrozenSet[str]] = {}
    for a in instance.agents_a:
        lists = realizable_lists(instance, a)
        heads = {plist.ranking[0] for plist in lists if plist.ranking}
        for b in heads:
            possible[b].add(a)
        if len(heads) == 1:
            certain[next(iter(heads))].add(a)
        for b in instance.neighbors(a):
            above: Set[str] = set()
            for plist in lists:
                above.update(plist.ranking[: plist.position(b)])
            better[(a, b)] = frozenset(above)
    return AdmirerAnalysis(
        certain={b: frozenset(s) for b, s in certain.items()},
        possible={b: frozenset(s) for b, s in possible.items()},
        better=better,
    )


def _layer_graphs(instance: MarketInstance) -> List[ProfileGraph]:
    scenario = instance.scenario
    return [profile_graph(instance, profile) for profile in scenario.profiles]


def _in_e_hat(instance: MarketInstance, analysis: AdmirerAnalysis, a: str, b: str) -> bool:
    """b is f(a) or s(a) in every profile, decided list by list from admirer counts"""
    for plist in realizable_lists(instance, a):
        f = plist.ranking[0]
        if f == b:
            continue
        # f must be oversubscribed whatever the others pick
        if len(analysis.certain[f] - {a}) < instance.capacity(f):
            return False
        for between in plist.ranking[1 : plist.position(b)]:
            if len(analysis.certain[between]) < instance.capacity(between):
                return False
        # b must keep a free seat whatever the others pick
        if len(analysis.possible[b] - {a}) >= instance.capacity(b):
            return False
    return True


def edge_in_E_hat(instance: MarketInstance, a: str, b: str) -> bool:
    """
    True iff b is the first or pseudo-second house of a in every realizable profile

    Layers are checked layer by layer; independent lists through admirer counts.
    The last-resort house is added when missing.
    """
    instance = append_last_resort(instance)
    if (a, b) not in instance.edges:
        return False
    if isinstance(instance.scenario, Layers):
        return all(graph.allows(a, b) for graph in _layer_graphs(instance))
    return _in_e_hat(instance, admirer_analysis(instance), a, b)


def _layers_constraints(instance: MarketInstance) -> Tuple[Set[Edge], Set[str]]:
    graphs = _layer_graphs(instance)
    edges = set(instance.edges)
    for graph in graphs:
        edges &= graph.edges
    required: Set[str] = set()
    for graph in graphs:
        required |= graph.tight
        edges = {(a, b) for a, b in edges if b not in graph.tight or a in graph.admirers[b]}
    return edges, required


def _independent_seat_ok(instance: MarketInstance, analysis: AdmirerAnalysis, a: str, b: str) -> bool:
    """Whether a may hold a seat of b when b can be full of admirers in some profile"""
    q = instance.capacity(b)
    if len(analysis.possible[b]) < q:
        return True
    if a in analysis.certain[b]:
        return True
    return a in analysis.possible[b] and len(analysis.possible[b]) == q


def _independent_constraints(instance: MarketInstance) -> Tuple[Set[Edge], Set[str]]:
    analysis = admirer_analysis(instance)
    edges = set()
    for a, b in sorted(instance.edges):
        if not _in_e_hat(instance, analysis, a, b):
            continue
        if not _independent_seat_ok(instance, analysis, a, b):
            continue
        if any(len(analysis.certain[h]) < instance.capacity(h) for h in analysis.possibly_better(a, b)):
            continue
        edges.add((a, b))
    required = {b for b in instance.agents_b if len(analysis.possible[b]) >= instance.capacity(b)}
    return edges, required


def _certainly_popular_constraints(instance: MarketInstance) -> Tuple[MarketInstance, Set[Edge], Set[str]]:
    _require_ha(instance)
    if isinstance(instance.scenario, Robust):
        raise FlavorError("certainly popular house allocation covers layers and independent; use k-robust for robust")
    instance = append_last_resort(instance)
    if isinstance(instance.scenario, Layers):
        edges, required = _layers_constraints(instance)
    else:
        edges, required = _independent_constraints(instance)
    return instance, edges, required


def certainly_popular_ha(instance: MarketInstance) -> Optional[Matching]:
    """
    Matching popular in every realizable profile, or None if there is none

    Raises:
        FlavorError: for two-sided markets or the robust flavor
    """
    instance, edges, required = _certainly_popular_constraints(instance)
    logger.debug(f"Certainly popular search over {len(edges)} edges with {len(required)} houses to fill")
    matching = solve_fill(_fill_problem(instance, edges, required))
    if matching is None:
        logger.info("No certainly popular matching exists")
        return None
    result = _strip_last_resort(instance, matching)
    logger.info(f"Found certainly popular matching with {len(result)} pairs")
    return result


def _completed_matching(instance: MarketInstance, matching: Matching) -> Matching:
    """Send every unmatched agent to the last-resort house"""
    placed = matching.house_of()
    extra = [(a, instance.last_resort) for a in instance.agents_a if a not in placed]
    return Matching.of(list(matching.pairs) + extra)


def _check_constraints(
    instance: MarketInstance, matching: Matching, edges: Set[Edge], required: Set[str]
) -> Optional[Tuple[Edge, str]]:
    """First violated condition as (witness edge, reason), or None"""
    for a, b in matching.sorted_pairs():
        if (a, b) not in edges:
            return (a, b), f"{a} may not hold a seat of {b}"
    for b in sorted(required):
        seats = len(matching.occupants(b))
        if seats < instance.capacity(b):
            waiting = [a for a in instance.neighbors(b) if (a, b) not in matching]
            witness = (waiting[0], b)
            return witness, f"{b} holds {seats} of {instance.capacity(b)} admirers it must seat"
    return None


def _verify_by_constraints(
    instance: MarketInstance, matching: Matching, edges: Set[Edge], required: Set[str], scenario: str
) -> Verdict:
    violation = _check_constraints(instance, _completed_matching(instance, matching), edges, required)
    if violation is None:
        return Verdict.ok()
    return Verdict.fail(violation[0], scenario=scenario, reason=violation[1])


def _single_profile(instance: MarketInstance) -> Profile:
    scenario = instance.scenario
    if isinstance(scenario, Robust):
        if scenario.k:
            raise FlavorError("plain popularity needs one profile; use k-robust-popular")
        return dict(scenario.profile)
    if any(len(realizable_lists(instance, a)) > 1 for a in instance.agents_a):
        raise FlavorError("plain popularity needs one profile; use certainly-popular or sum-popular")
    return first_profile(instance)


def _verify_popular(instance: MarketInstance, matching: Matching) -> Verdict:
    profile = _single_profile(instance)
    if isinstance(instance.scenario, Robust):
        instance = with_scenario(instance, Layers(profiles=(profile,)))
    instance = append_last_resort(instance)
    graph = profile_graph(instance, _complete_profile(instance, profile))
    edges = {(a, b) for a, b in graph.edges if b not in graph.tight or a in graph.admirers[b]}
    return _verify_by_constraints(instance, matching, edges, set(graph.tight), "base profile")


def _verify_certainly_popular(instance: MarketInstance, matching: Matching) -> Verdict:
    scenario = instance.scenario
    if isinstance(scenario, Layers):
        extended = append_last_resort(instance)
        for i, graph in enumerate(_layer_graphs(extended)):
            edges = {(a, b) for a, b in graph.edges if b not in graph.tight or a in graph.admirers[b]}
            verdict = _verify_by_constraints(extended, matching, edges, set(graph.tight), f"layer {i}")
            if not verdict.holds:
                return verdict
        return Verdict.ok()
    extended, edges, required = _certainly_popular_constraints(instance)
    return _verify_by_constraints(extended, matching, edges, required, "independent lists")


def _verify_sum_popular(instance: MarketInstance, matching: Matching) -> Verdict:
    """
    Search for a matching N with negative summed vote

    Rows are agents; columns are one unit seat per house seat plus one
    "unmatched" column per agent. A cell holds the agent's summed vote for
    keeping M(a) over the column's house.
    """
    lists = vote_sets(instance)
    agents = sorted(instance.agents_a)
    houses = sorted(b for b in instance.agents_b if b != instance.last_resort)
    columns: List[str] = [b for b in houses for _ in range(instance.capacity(b))]
    cost = np.full((len(agents), len(columns) + len(agents)), FORBIDDEN, dtype=np.int64)
    current = matching.house_of()
    for i, a in enumerate(agents):
        nbrs = [b for b in instance.neighbors(a) if b != instance.last_resort]
        rankings = [[b for b in plist.ranking if b != instance.last_resort] for plist in lists[a]]
        mine = current.get(a, UNMATCHED)
        if mine == instance.last_resort:
            mine = UNMATCHED
        if nbrs:
            table = RankTable(nbrs, rankings)
            if mine == UNMATCHED:
                votes = -np.full(len(nbrs), len(rankings), dtype=np.int64)
            else:
                votes = np.sign(table.positions - table.positions[:, [table.index[mine]]]).sum(axis=0)
            for j, b in enumerate(columns):
                if b in table.index:
                    cost[i, j] = votes[table.index[b]]
        cost[i, len(columns) :] = 0 if mine == UNMATCHED else len(rankings)
    found = min_cost_assignment(cost)
    if found is None:
        return Verdict.ok()
    pairs, total = found
    if total >= 0:
        return Verdict.ok()
    alternative = Matching.of((agents[i], columns[j]) for i, j in pairs if j < len(columns))
    reason = f"alternative wins the summed vote by {-total}"
    return Verdict.fail(alternative, scenario="sum over every list", reason=reason)


def verify_ha(instance: MarketInstance, matching: Matching, criterion: HACriterion) -> Verdict:
    """
    Check a house allocation matching against a popularity criterion

    Raises:
        FlavorError: when the criterion does not apply to the scenario flavor
        InstanceFormatError: when the matching does not belong to the instance
    """
    _require_ha(instance)
    criterion = HACriterion(criterion)
    try:
        instance.check_matching(matching)
    except ValueError as e:
        raise InstanceFormatError(f"matching does not belong to the instance: {e}") from e
    if criterion == HACriterion.POPULAR:
        return _verify_popular(instance, matching)
    if criterion == HACriterion.CERTAINLY_POPULAR:
        return _verify_certainly_popular(instance, matching)
    if criterion == HACriterion.SUM_POPULAR:
        return _verify_sum_popular(instance, matching)
    # Imported here; the robust module builds on this one
    from popmatch.robust_ha import verify_k_robust

    return verify_k_robust(instance, matching)


class PartialOrderInstance(BaseModel):
    """House allocation where each agent ranks houses by a strict partial order"""

    model_config = ConfigDict(frozen=True)

    agents_a: Tuple[str, ...]
    agents_b: Tuple[str, ...]
    capacities: Dict[str, int]
    acceptable: Dict[str, Tuple[str, ...]]
    above: Dict[str, FrozenSet[Edge]]

    def prefers(self, a: str, x: str, y: str) -> bool:
        """x strictly above y for a; unmatched sits below every acceptable house"""
        if x == y or x == UNMATCHED:
            return False
        if y == UNMATCHED:
            return True
        return (x, y) in self.above[a]

    def to_dict(self) -> dict:
        return {
            "type": "partial-order",
            "agents_a": [{"id": a} for a in self.agents_a],
            "agents_b": [{"id": b, "capacity": self.capacities.get(b, 1)} for b in self.agents_b],
            "acceptable": {a: list(houses) for a, houses in self.acceptable.items()},
            "orders": {a: [list(pair) for pair in sorted(pairs)] for a, pairs in self.above.items()},
        }


def aggregate_to_partial_order(instance: MarketInstance) -> PartialOrderInstance:
    """
    Intersect two layers into one partial order per agent

    Raises:
        FlavorError: unless the instance is a house allocation with exactly two layers
    """
    _require_ha(instance)
    scenario = instance.scenario
    if not isinstance(scenario, Layers) or len(scenario.profiles) != 2:
        raise FlavorError("aggregation into a partial order needs exactly two layers")
    above = {}
    for a in sorted(instance.agents_a):
        first, second = scenario.profiles[0][a], scenario.profiles[1][a]
        above[a] = frozenset(
            (x, y) for x in first.ranking for y in first.ranking if first.prefers(x, y) and second.prefers(x, y)
        )
    return PartialOrderInstance(
        agents_a=tuple(sorted(instance.agents_a)),
        agents_b=tuple(sorted(instance.agents_b)),
        capacities={b: instance.capacity(b) for b in instance.agents_b},
        acceptable={a: tuple(sorted(instance.neighbors(a))) for a in instance.agents_a},
        above=above,
    )


def partial_order_vote(po: PartialOrderInstance, a: str, x: str, y: str) -> int:
    """+1 if a ranks x above y, -1 if below, 0 if equal or incomparable"""
    if po.prefers(a, x, y):
        return 1
    if po.prefers(a, y, x):
        return -1
    return 0
