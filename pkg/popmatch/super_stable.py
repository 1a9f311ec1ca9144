"""
Super-stable matchings for markets whose agents rank their incident edges by partial orders

An agent's partial order is the intersection of its possible lists: edge e is above
edge f iff every possible list ranks e before f. A matching is super-stable iff no
edge outside it is, for both endpoints, not below their current edge; with
independently chosen lists this is exactly "stable in every realizable profile".

Edges are keyed by integer ids, so parallel edges between one pair of agents are
allowed (the duplicated instance relies on this).
"""

import logging
from collections import deque
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from popmatch.models import UNMATCHED
from popmatch.preferences import RankTable

logger = logging.getLogger(__name__)


class PartialOrderMarket:
    """
    Two-sided market over keyed edges

    Args:
        agents_a: proposing side
        agents_b: receiving side
        endpoints: endpoints[e] = (a, b) for every edge id e
        rankings: agent -> its possible lists, each a sequence of incident edge ids
    """

    def __init__(
        self,
        agents_a: Sequence[str],
        agents_b: Sequence[str],
        endpoints: Sequence[Tuple[str, str]],
        rankings: Dict[str, Sequence[Sequence[int]]],
    ):
        self.agents_a = tuple(sorted(agents_a))
        self.agents_b = tuple(sorted(agents_b))
        self.endpoints = tuple(endpoints)
        incident: Dict[str, List[int]] = {u: [] for u in self.agents_a + self.agents_b}
        for e, (a, b) in enumerate(self.endpoints):
            incident[a].append(e)
            incident[b].append(e)
        self.incident = {u: np.array(edges, dtype=np.int64) for u, edges in incident.items()}
        self.tables: Dict[str, RankTable] = {}
        for u, edges in incident.items():
            lists = rankings.get(u) or [edges]
            for ranking in lists:
                if sorted(ranking) != edges:
                    raise ValueError(f"a list of {u} does not rank exactly its incident edges")
            self.tables[u] = RankTable(edges, lists)

    @property
    def n_edges(self) -> int:
        return len(self.endpoints)

    def blocking_edges(self, chosen: Set[int]) -> List[int]:
        """Edges outside chosen that both endpoints may prefer to their chosen edge"""
        current: Dict[str, object] = {}
        for e in chosen:
            a, b = self.endpoints[e]
            current[a] = e
            current[b] = e
        wants = np.ones((2, self.n_edges), dtype=bool)
        for side, agents in enumerate((self.agents_a, self.agents_b)):
            for u in agents:
                inc = self.incident[u]
                if inc.size == 0:
                    continue
                wants[side, inc] = self.tables[u].may_prefer_mask(current.get(u, UNMATCHED))
        blocking = wants.all(axis=0)
        for e in chosen:
            blocking[e] = False
        return [int(e) for e in np.flatnonzero(blocking)]


def super_stable(market: PartialOrderMarket) -> Optional[Set[int]]:
    """
    Man-optimal super-stable matching by proposal and deletion, or None if none exists

    Proposers repeatedly propose along every maximal live edge of their list. A
    receiver holding a proposal deletes every live edge strictly below it; a
    receiver holding several proposals releases all of them and deletes every live
    edge not strictly above each of them. Deleted edges never occur in a
    super-stable matching. At the fixpoint the held proposals are the answer
    provided every receiver that was ever proposed to still holds exactly one
    proposal and every proposer holds at most one.
    """
    alive = np.ones(market.n_edges, dtype=bool)
    held = np.zeros(market.n_edges, dtype=bool)
    proposals_of: Dict[str, Set[int]] = {a: set() for a in market.agents_a}
    held_by: Dict[str, Set[int]] = {b: set() for b in market.agents_b}
    ever_proposed: Set[str] = set()
    queue = deque(market.agents_a)
    queued = set(market.agents_a)

    def delete(e: int) -> None:
        alive[e] = False
        a, b = market.endpoints[e]
        if held[e]:
            held[e] = False
            proposals_of[a].discard(e)
            held_by[b].discard(e)
        if a not in queued:
            queue.append(a)
            queued.add(a)

    def live(u: str) -> np.ndarray:
        inc = market.incident[u]
        return np.flatnonzero(alive[inc])

    rounds = 0
    while True:
        rounds += 1
        while queue:
            a = queue.popleft()
            queued.discard(a)
            table = market.tables[a]
            inc = market.incident[a]
            for local in table.maximal(live(a)):
                e = int(inc[local])
                if held[e] or not alive[e]:
                    continue
                b = market.endpoints[e][1]
                held[e] = True
                proposals_of[a].add(e)
                held_by[b].add(e)
                ever_proposed.add(b)
                b_inc = market.incident[b]
                remaining = live(b)
                below = market.tables[b].strictly_below(remaining, e)
                for f in b_inc[remaining[below]]:
                    delete(int(f))

        released = False
        for b in market.agents_b:
            if len(held_by[b]) < 2:
                continue
            released = True
            engaged = sorted(held_by[b])
            b_inc = market.incident[b]
            remaining = live(b)
            keep = np.ones(remaining.size, dtype=bool)
            for e in engaged:
                keep &= market.tables[b].strictly_above(remaining, e)
            logger.debug(f"{b} holds {len(engaged)} incomparable proposals, releasing them")
            for f in b_inc[remaining[~keep]]:
                delete(int(f))
        if not released and not queue:
            break

    logger.debug(f"Proposal phase settled after {rounds} rounds")
    stranded = sorted(b for b in ever_proposed if not held_by[b])
    if stranded:
        logger.debug(f"No super-stable matching: {stranded[0]} lost every proposal")
        return None
    crowded = sorted(a for a, props in proposals_of.items() if len(props) > 1)
    if crowded:
        logger.debug(f"No super-stable matching: {crowded[0]} holds several proposals")
        return None

    chosen = {int(e) for e in np.flatnonzero(held)}
    blocking = market.blocking_edges(chosen)
    if blocking:
        a, b = market.endpoints[blocking[0]]
        logger.warning(f"Proposal phase left a matching blocked by ({a}, {b}); reporting none")
        return None
    return chosen
