"""Two-sided markets: stable matchings, popularity/dominance verification and the duplication reduction"""

import logging
from collections import deque
from enum import Enum, IntEnum
from typing import Dict, Iterable, List, Optional, Set, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from popmatch.assignment import FORBIDDEN, WeightMatrix, min_weight_perfect_matching
from popmatch.errors import FlavorError, InstanceFormatError
from popmatch.models import (
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
    describe_profile,
)
from popmatch.preferences import RankTable, may_prefer, swap_up, vote_sets, with_scenario
from popmatch.super_stable import PartialOrderMarket, super_stable

logger = logging.getLogger(__name__)

EdgeCopy = Tuple[str, str, str]


class WorstCaseVote(IntEnum):
    """An agent's least favorable vote between its current partner and a candidate"""

    FOR_CANDIDATE = -1
    TIE = 0
    FOR_CURRENT = 1


class Criterion(str, Enum):
    STABLE = "stable"
    POPULAR = "popular"
    DOMINANT = "dominant"


def _require_two_sided(instance: MarketInstance) -> None:
    if instance.is_ha:
        raise FlavorError("operation needs a two-sided market, got a house allocation instance")


def layer_profile(instance: MarketInstance, index: int = 0) -> Profile:
    """The index-th listed profile: a layer, the index-th list of every P_u, or the robust base"""
    profile = {}
    for agent in instance.ranking_agents:
        lists = instance.lists_of(agent)
        profile[agent] = lists[min(index, len(lists) - 1)]
    return profile


def gale_shapley(instance: MarketInstance, profile: Optional[Profile] = None) -> Matching:
    """
    A-proposing deferred acceptance on one profile

    Args:
        instance: two-sided market
        profile: one list per agent; defaults to the first listed profile

    Returns:
        The A-optimal stable matching of that profile
    """
    _require_two_sided(instance)
    profile = profile if profile is not None else layer_profile(instance)
    next_choice = {a: 0 for a in instance.agents_a}
    held: Dict[str, str] = {}
    free = deque(sorted(instance.agents_a))
    while free:
        a = free.popleft()
        ranking = profile[a].ranking
        if next_choice[a] >= len(ranking):
            continue
        b = ranking[next_choice[a]]
        next_choice[a] += 1
        rival = held.get(b)
        if rival is None:
            held[b] = a
        elif profile[b].prefers(a, rival):
            held[b] = a
            free.append(rival)
        else:
            free.append(a)
    return Matching.of((a, b) for b, a in held.items())


def blocking_edges(instance: MarketInstance, profile: Profile, matching: Matching) -> Set[Edge]:
    """Edges (a, b) outside the matching with b above M(a) for a and a above M(b) for b"""
    _require_two_sided(instance)
    partner = matching.partner_map()
    return {
        (a, b)
        for a, b in instance.edges
        if (a, b) not in matching
        and profile[a].prefers(b, partner.get(a, UNMATCHED))
        and profile[b].prefers(a, partner.get(b, UNMATCHED))
    }


def worst_case_vote(instance: MarketInstance, agent: str, current: str, candidate: str) -> WorstCaseVote:
    """-1 if the agent may prefer the candidate, +1 if it always prefers its current partner, 0 if equal"""
    if current == candidate:
        return WorstCaseVote.TIE
    if may_prefer(instance, agent, candidate, current):
        return WorstCaseVote.FOR_CANDIDATE
    return WorstCaseVote.FOR_CURRENT


def _row_votes(table: RankTable, current: str, rows: Optional[List[int]]) -> Tuple[np.ndarray, int]:
    """Summed exact votes of the chosen rows over the partners, plus the vote against being unmatched"""
    positions = table.positions if rows is None else table.positions[rows]
    if current == UNMATCHED:
        return -np.full(len(table), positions.shape[0], dtype=np.int64), 0
    col = positions[:, [table.index[current]]]
    return np.sign(positions - col).sum(axis=0).astype(np.int64), positions.shape[0]


def _worst_votes(table: RankTable, current: str) -> Tuple[np.ndarray, int]:
    if current == UNMATCHED:
        return -np.ones(len(table), dtype=np.int64), 0
    votes = np.where(table.may_prefer_mask(current), -1, 1).astype(np.int64)
    votes[table.index[current]] = 0
    return votes, 1


class _VoteGraph:
    """
    Votes of every agent against a fixed matching, laid out for assignment

    The assignment matrix has a row per A-agent plus a stand-in row per B-agent,
    and a column per B-agent plus a stand-in column per A-agent. Pairing an agent
    with its own stand-in leaves it unmatched, stand-ins pair freely at 0 and
    non-edges are forbidden, so perfect matchings are exactly the matchings N.
    """

    def __init__(self, instance: MarketInstance, matching: Matching, rows: Optional[List[int]], worst_case: bool):
        self.a_side = sorted(instance.agents_a)
        self.b_side = sorted(instance.agents_b)
        ia = {a: i for i, a in enumerate(self.a_side)}
        jb = {b: j for j, b in enumerate(self.b_side)}
        partner = matching.partner_map()
        shape = (len(self.a_side), len(self.b_side))
        self.edge_votes = np.zeros(shape, dtype=np.int64)
        self.is_edge = np.zeros(shape, dtype=bool)
        self.alone_a = np.zeros(shape[0], dtype=np.int64)
        self.alone_b = np.zeros(shape[1], dtype=np.int64)

        for u in self.a_side + self.b_side:
            nbrs = instance.neighbors(u)
            if not nbrs:
                continue
            table = RankTable.for_agent(instance, u, partners=nbrs)
            current = partner.get(u, UNMATCHED)
            votes, alone = _worst_votes(table, current) if worst_case else _row_votes(table, current, rows)
            if u in ia:
                cols = np.array([jb[b] for b in nbrs])
                self.edge_votes[ia[u], cols] += votes
                self.is_edge[ia[u], cols] = True
                self.alone_a[ia[u]] = alone
            else:
                self.edge_votes[np.array([ia[a] for a in nbrs]), jb[u]] += votes
                self.alone_b[jb[u]] = alone

    def cheapest(self, scale: Optional[int] = None) -> Tuple[Matching, int]:
        """Minimum total vote over all matchings N; scaled form charges -1 per edge of N"""
        n_a, n_b = self.is_edge.shape
        factor = 1 if scale is None else scale
        size = n_a + n_b
        weights = np.full((size, size), FORBIDDEN, dtype=np.int64)
        core = self.edge_votes * factor
        if scale is not None:
            core = core - 1
        weights[:n_a, :n_b] = np.where(self.is_edge, core, FORBIDDEN)
        weights[np.arange(n_a), n_b + np.arange(n_a)] = self.alone_a * factor
        weights[n_a + np.arange(n_b), np.arange(n_b)] = self.alone_b * factor
        weights[n_a:, n_b:] = 0
        pairs, total = min_weight_perfect_matching(WeightMatrix(w=weights))
        alternative = Matching.of(
            (self.a_side[i], self.b_side[j]) for i, j in pairs if i < n_a and j < n_b and self.is_edge[i, j]
        )
        return alternative, total


def _decide(graph: _VoteGraph, matching: Matching, criterion: Criterion) -> Optional[Tuple[Matching, str]]:
    if criterion == Criterion.POPULAR:
        alternative, total = graph.cheapest()
        if total < 0:
            return alternative, f"alternative wins the vote by {-total}"
        return None
    scale = len(matching) + 1
    alternative, total = graph.cheapest(scale)
    if total <= -scale:
        if len(alternative) > len(matching):
            return alternative, "a larger matching does not lose the vote"
        return alternative, "alternative wins the vote"
    return None


def _realizing_lists(instance: MarketInstance, matching: Matching, alternative: Matching) -> str:
    """Describe one realizable choice of lists under which the alternative's voters turn against M"""
    current = matching.partner_map()
    other = alternative.partner_map()
    chosen: Dict[str, PreferenceList] = {}
    for u in instance.ranking_agents:
        mine, theirs = current.get(u, UNMATCHED), other.get(u, UNMATCHED)
        if mine == theirs:
            continue
        chosen[u] = _list_preferring(instance, u, theirs, mine)
    return describe_profile(chosen)


def _list_preferring(instance: MarketInstance, agent: str, x: str, y: str) -> PreferenceList:
    """A realizable list of agent ranking x above y when one exists, else the base list"""
    scenario = instance.scenario
    base = instance.base_list(agent)
    if isinstance(scenario, Robust):
        if x != UNMATCHED and y != UNMATCHED and base.position(x) > base.position(y):
            if base.position(x) - base.position(y) <= scenario.k:
                return swap_up(base, x, base.position(x) - base.position(y))
        return base
    for plist in instance.lists_of(agent):
        if plist.prefers(x, y):
            return plist
    return base


def _verify_stable(instance: MarketInstance, matching: Matching) -> Verdict:
    scenario = instance.scenario
    if isinstance(scenario, Layers):
        for i in range(len(scenario.profiles)):
            blocking = blocking_edges(instance, layer_profile(instance, i), matching)
            if blocking:
                edge = min(blocking)
                return Verdict.fail(edge, scenario=f"layer {i}", reason=f"({edge[0]}, {edge[1]}) blocks")
        return Verdict.ok()
    partner = matching.partner_map()
    wants: Dict[str, Set[str]] = {}
    for u in instance.ranking_agents:
        nbrs = instance.neighbors(u)
        if not nbrs:
            continue
        table = RankTable.for_agent(instance, u, partners=nbrs)
        mask = table.may_prefer_mask(partner.get(u, UNMATCHED))
        wants[u] = {p for p, keep in zip(nbrs, mask) if keep}
    for a, b in sorted(instance.edges):
        if (a, b) not in matching and b in wants.get(a, ()) and a in wants.get(b, ()):
            lists = {
                a: _list_preferring(instance, a, b, partner.get(a, UNMATCHED)),
                b: _list_preferring(instance, b, a, partner.get(b, UNMATCHED)),
            }
            return Verdict.fail((a, b), scenario=describe_profile(lists), reason=f"({a}, {b}) may block")
    return Verdict.ok()


def verify_two_sided(
    instance: MarketInstance,
    matching: Matching,
    criterion: Criterion = Criterion.POPULAR,
    aggregated: bool = False,
) -> Verdict:
    """
    Check that a matching is certainly (or, when aggregated, sum-) stable, popular or dominant

    Popularity: complete the padded graph, weight every pair by the votes of both
    endpoints against M and look for a perfect matching of negative weight.
    Dominance: scale by |M|+1, subtract 1 on original edges and look for weight
    at most -(|M|+1). Layers are checked one at a time, other flavors through
    worst-case votes, and the aggregated mode sums every layer or every list of P_u.

    Raises:
        FlavorError: on house allocation instances, or aggregated voting under the robust flavor
    """
    _require_two_sided(instance)
    criterion = Criterion(criterion)
    try:
        instance.check_matching(matching)
    except ValueError as e:
        raise InstanceFormatError(f"matching does not belong to the instance: {e}") from e
    scenario = instance.scenario

    if criterion == Criterion.STABLE:
        if aggregated:
            raise FlavorError("aggregated voting has no stability criterion")
        return _verify_stable(instance, matching)

    if aggregated:
        vote_sets(instance)
        graph = _VoteGraph(instance, matching, rows=None, worst_case=False)
        found = _decide(graph, matching, criterion)
        if found:
            if isinstance(scenario, Layers):
                count = len(scenario.profiles)
            else:
                count = len(instance.lists_of(instance.ranking_agents[0]))
            return Verdict.fail(found[0], scenario=f"sum over {count} profiles", reason=found[1])
        return Verdict.ok()

    if isinstance(scenario, Layers):
        for i in range(len(scenario.profiles)):
            graph = _VoteGraph(instance, matching, rows=[i], worst_case=False)
            found = _decide(graph, matching, criterion)
            if found:
                logger.info(f"Matching is not {criterion.value} in layer {i}")
                return Verdict.fail(found[0], scenario=f"layer {i}", reason=found[1])
        return Verdict.ok()

    graph = _VoteGraph(instance, matching, rows=None, worst_case=True)
    found = _decide(graph, matching, criterion)
    if found:
        return Verdict.fail(found[0], scenario=_realizing_lists(instance, matching, found[0]), reason=found[1])
    return Verdict.ok()


class DuplicatedInstance(BaseModel):
    """
    Market with two parallel copies x(e), y(e) of every base edge

    copies[2i] and copies[2i + 1] are the x- and y-copy of the i-th base edge
    in sorted order. Rankings hold copy ids: A-side lists rank every x-copy (in
    base order) before every y-copy; B-side lists rank y-copies first.
    """

    model_config = ConfigDict(frozen=True)

    base: MarketInstance
    copies: Tuple[EdgeCopy, ...]
    rankings: Dict[str, Tuple[Tuple[int, ...], ...]]

    def label(self, owner: str, copy_id: int) -> str:
        """Copy label such as x:b1, named by the partner on the other side"""
        a, b, tag = self.copies[copy_id]
        return f"{tag}:{b if owner == a else a}"

    @property
    def lists(self) -> Dict[str, Tuple[Tuple[str, ...], ...]]:
        return {
            owner: tuple(tuple(self.label(owner, e) for e in ranking) for ranking in lists)
            for owner, lists in self.rankings.items()
        }

    def to_market(self) -> Tuple[PartialOrderMarket, List[EdgeCopy]]:
        endpoints = [(a, b) for a, b, _ in self.copies]
        market = PartialOrderMarket(self.base.agents_a, self.base.agents_b, endpoints, self.rankings)
        return market, list(self.copies)

    def to_dict(self) -> dict:
        return {
            "type": "duplicated",
            "agents_a": list(self.base.agents_a),
            "agents_b": list(self.base.agents_b),
            "lists": {owner: [list(r) for r in lists] for owner, lists in self.lists.items()},
        }


def _independent_lists(instance: MarketInstance) -> Dict[str, Tuple[PreferenceList, ...]]:
    """Per-agent possible lists for solvers that need independent choices"""
    scenario = instance.scenario
    if isinstance(scenario, Layers) and len(scenario.profiles) > 1:
        raise FlavorError("correlated layers are not supported here; use the oracle")
    if isinstance(scenario, Robust):
        instance = robust_to_uncertain(instance)
    return {agent: instance.lists_of(agent) for agent in instance.ranking_agents}


def duplicate_instance(instance: MarketInstance) -> DuplicatedInstance:
    """Add x/y copies of every edge; one transformed list per original list"""
    _require_two_sided(instance)
    edges = sorted(instance.edges)
    index = {edge: i for i, edge in enumerate(edges)}
    copies = tuple((a, b, tag) for a, b in edges for tag in ("x", "y"))
    rankings = {}
    for agent, possible in _independent_lists(instance).items():
        on_a = instance.is_a(agent)
        # x-copy of edge i is 2i, y-copy 2i + 1
        first, second = (0, 1) if on_a else (1, 0)
        transformed = []
        for plist in possible:
            base = [2 * index[(agent, p) if on_a else (p, agent)] for p in plist.ranking]
            transformed.append(tuple(e + first for e in base) + tuple(e + second for e in base))
        rankings[agent] = tuple(transformed)
    return DuplicatedInstance(base=instance, copies=copies, rankings=rankings)


def project_matching(copies: Iterable[EdgeCopy]) -> Matching:
    """Base edges with at least one chosen copy"""
    return Matching.of((a, b) for a, b, _ in copies)


def _plain_market(instance: MarketInstance) -> Tuple[PartialOrderMarket, List[Edge]]:
    edges = sorted(instance.edges)
    ids = {edge: e for e, edge in enumerate(edges)}
    rankings = {}
    for agent, possible in _independent_lists(instance).items():
        if instance.is_a(agent):
            rankings[agent] = [[ids[(agent, b)] for b in plist.ranking] for plist in possible]
        else:
            rankings[agent] = [[ids[(a, agent)] for a in plist.ranking] for plist in possible]
    return PartialOrderMarket(instance.agents_a, instance.agents_b, edges, rankings), edges


def certainly_stable(instance: MarketInstance) -> Optional[Matching]:
    """
    A matching stable in every realizable profile, or None if there is none

    Raises:
        FlavorError: for house allocation or multi-layer instances
    """
    _require_two_sided(instance)
    market, edges = _plain_market(instance)
    chosen = super_stable(market)
    if chosen is None:
        logger.info("No certainly stable matching exists")
        return None
    matching = Matching.of(edges[e] for e in sorted(chosen))
    logger.info(f"Found certainly stable matching with {len(matching)} pairs")
    return matching


def certainly_dominant(instance: MarketInstance) -> Optional[Matching]:
    """Project a certainly stable matching of the duplicated instance, or None if there is none"""
    duplicated = duplicate_instance(instance)
    market, copies = duplicated.to_market()
    chosen = super_stable(market)
    if chosen is None:
        logger.info("No certainly dominant matching exists")
        return None
    matching = project_matching(copies[e] for e in sorted(chosen))
    logger.info(f"Found certainly dominant matching with {len(matching)} pairs")
    return matching


def robust_to_uncertain(instance: MarketInstance) -> MarketInstance:
    """Replace the swap ball by the lists obtained by swapping one partner up k times"""
    scenario = instance.scenario
    if not isinstance(scenario, Robust):
        raise FlavorError(f"expected a robust scenario, got {instance.flavor}")
    sets = {}
    for agent, base in scenario.profile.items():
        lifted: Dict[Tuple[str, ...], PreferenceList] = {}
        for v in base.ranking:
            plist = swap_up(base, v, scenario.k)
            lifted.setdefault(plist.ranking, plist)
        sets[agent] = tuple(lifted.values()) or (base,)
    return with_scenario(instance, Independent(sets=sets))


def solve_robust_two_sided(instance: MarketInstance, target: Criterion) -> Optional[Matching]:
    """Stable or dominant matching surviving every profile within k swaps per agent"""
    if not isinstance(instance.scenario, Robust):
        raise FlavorError(f"expected a robust scenario, got {instance.flavor}")
    target = Criterion(target)
    uncertain = robust_to_uncertain(instance)
    if target == Criterion.STABLE:
        return certainly_stable(uncertain)
    if target == Criterion.DOMINANT:
        return certainly_dominant(uncertain)
    raise FlavorError(f"robust two-sided solving supports stable and dominant, not {target.value}")
