"""Bipartite matching engines shared by every solver and verifier"""

import logging
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.optimize import linear_sum_assignment

from popmatch.models import Edge, Matching

logger = logging.getLogger(__name__)

# Cost for forbidden cells in rectangular assignment; far above any vote sum
FORBIDDEN = 10**9


class WeightMatrix(BaseModel):
    """Square integer weight matrix of a complete bipartite graph"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    w: np.ndarray

    @field_validator("w", mode="before")
    @classmethod
    def _square_integers(cls, w) -> np.ndarray:
        w = np.asarray(w)
        if w.size == 0:
            return np.zeros((0, 0), dtype=np.int64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"weight matrix must be square, got shape {w.shape}")
        if not np.issubdtype(w.dtype, np.integer):
            raise ValueError("weight matrix entries must be integers")
        return w.astype(np.int64)

    @property
    def n(self) -> int:
        return self.w.shape[0]


class FillProblem(BaseModel):
    """Capacitated assignment with exact-fill houses and optional A-perfection"""

    model_config = ConfigDict(frozen=True)

    edges: FrozenSet[Edge]
    capacities: Dict[str, int]
    required_fill: FrozenSet[str] = frozenset()
    a_perfect: bool = False
    agents: Tuple[str, ...] = Field(default=(), description="A-side agents; isolated ones make a_perfect infeasible")

    @model_validator(mode="after")
    def _consistent(self) -> "FillProblem":
        houses = {b for _, b in self.edges} | set(self.capacities)
        for b in houses:
            if self.capacities.get(b, 1) <= 0:
                raise ValueError(f"capacity of {b} must be positive")
        unknown = set(self.required_fill) - houses
        if unknown:
            raise ValueError(f"required houses are not houses of the problem: {sorted(unknown)}")
        return self

    def capacity(self, house: str) -> int:
        return self.capacities.get(house, 1)

    def all_agents(self) -> List[str]:
        return sorted(set(self.agents) | {a for a, _ in self.edges})

    def all_houses(self) -> List[str]:
        return sorted({b for _, b in self.edges} | set(self.capacities))


def max_matching(edges: Iterable[Edge]) -> Matching:
    """Maximum-cardinality matching with unit capacities (Hopcroft-Karp)"""
    graph = nx.Graph()
    top = []
    for a, b in sorted(set(edges)):
        graph.add_edge(("A", a), ("B", b))
        top.append(("A", a))
    if graph.number_of_edges() == 0:
        return Matching()
    mate = nx.bipartite.hopcroft_karp_matching(graph, top_nodes=set(top))
    return Matching.of((node[1], partner[1]) for node, partner in mate.items() if node[0] == "A")


def min_weight_perfect_matching(matrix: WeightMatrix) -> Tuple[List[Tuple[int, int]], int]:
    """
    Minimum-weight perfect matching of a complete bipartite graph

    Returns:
        (row, column) index pairs and the total weight
    """
    if matrix.n == 0:
        return [], 0
    rows, cols = linear_sum_assignment(matrix.w)
    total = int(matrix.w[rows, cols].sum())
    return [(int(r), int(c)) for r, c in zip(rows, cols)], total


def min_cost_assignment(cost: np.ndarray) -> Optional[Tuple[List[Tuple[int, int]], int]]:
    """
    Assign every row to a distinct column at minimum cost; cells >= FORBIDDEN are unusable

    Returns:
        (row, column) pairs and total cost, or None if every complete assignment needs a forbidden cell
    """
    n_rows, n_cols = cost.shape
    if n_rows == 0:
        return [], 0
    if n_rows > n_cols:
        return None
    rows, cols = linear_sum_assignment(cost)
    total = int(cost[rows, cols].sum())
    if (cost[rows, cols] >= FORBIDDEN).any():
        return None
    return [(int(r), int(c)) for r, c in zip(rows, cols)], total


def solve_fill(problem: FillProblem) -> Optional[Matching]:
    """
    Find a matching that fills every required house to capacity and, if asked, covers every agent

    Lower bounds are handled by the usual circulation reduction: an edge (u, v) with
    lower bound l and capacity c becomes capacity c - l, with l units of demand moved
    onto a super source/sink pair; the bounds are feasible iff the super max-flow
    saturates every demand edge.

    Returns:
        A feasible matching, or None if none exists
    """
    agents = problem.all_agents()
    houses = problem.all_houses()
    graph = nx.DiGraph()
    graph.add_node("source")
    graph.add_node("sink")
    graph.add_node("super_source")
    graph.add_node("super_sink")
    excess: Dict[object, int] = {}

    def add(u, v, low: int, cap: int) -> None:
        graph.add_edge(u, v, capacity=cap - low)
        if low:
            excess[v] = excess.get(v, 0) + low
            excess[u] = excess.get(u, 0) - low

    for a in agents:
        add("source", ("A", a), 1 if problem.a_perfect else 0, 1)
    for a, b in sorted(problem.edges):
        add(("A", a), ("B", b), 0, 1)
    for b in houses:
        q = problem.capacity(b)
        add(("B", b), "sink", q if b in problem.required_fill else 0, q)
    # Uncapacitated return arc closes the circulation
    graph.add_edge("sink", "source")

    demand = 0
    for node, value in sorted(excess.items(), key=lambda item: str(item[0])):
        if value > 0:
            graph.add_edge("super_source", node, capacity=value)
            demand += value
        elif value < 0:
            graph.add_edge(node, "super_sink", capacity=-value)

    if demand:
        flow_value, flow = nx.maximum_flow(graph, "super_source", "super_sink")
        if flow_value < demand:
            logger.debug(f"Fill problem infeasible: routed {flow_value} of {demand} required units")
            return None
    else:
        flow = {u: {v: 0 for v in graph[u]} for u in graph}

    pairs = []
    for a in agents:
        for node, units in flow.get(("A", a), {}).items():
            if units > 0:
                pairs.append((a, node[1]))
    return Matching.of(pairs)
