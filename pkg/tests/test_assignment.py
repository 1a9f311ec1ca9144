import itertools
from collections import Counter
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError

from popmatch.assignment import (
    FORBIDDEN,
    FillProblem,
    WeightMatrix,
    max_matching,
    min_cost_assignment,
    min_weight_perfect_matching,
    solve_fill,
)


def test_max_matching_finds_augmenting_path():
    matching = max_matching([("a1", "b1"), ("a1", "b2"), ("a2", "b1")])
    assert matching.sorted_pairs() == [("a1", "b2"), ("a2", "b1")]
    assert len(max_matching([])) == 0


def test_min_weight_perfect_matching():
    pairs, total = min_weight_perfect_matching(WeightMatrix(w=[[4, 1], [2, 3]]))
    assert sorted(pairs) == [(0, 1), (1, 0)]
    assert total == 3
    assert min_weight_perfect_matching(WeightMatrix(w=np.zeros((0, 0), dtype=int))) == ([], 0)


def test_weight_matrix_validation():
    with pytest.raises(ValidationError):
        WeightMatrix(w=[[1, 2, 3], [4, 5, 6]])
    with pytest.raises(ValidationError):
        WeightMatrix(w=[[0.5, 1.0], [1.0, 0.5]])


def test_min_cost_assignment_avoids_forbidden_cells():
    pairs, total = min_cost_assignment(np.array([[FORBIDDEN, 2, 0], [1, FORBIDDEN, 5]]))
    assert sorted(pairs) == [(0, 2), (1, 0)]
    assert total == 1
    assert min_cost_assignment(np.array([[FORBIDDEN, 1], [FORBIDDEN, 2]])) is None
    assert min_cost_assignment(np.array([[1], [2]])) is None


def test_solve_fill_meets_required_houses():
    problem = FillProblem(
        edges=frozenset({("a1", "b1"), ("a1", "b2"), ("a2", "b2")}),
        capacities={"b1": 1, "b2": 1},
        required_fill=frozenset({"b1"}),
        a_perfect=True,
    )
    assert solve_fill(problem).sorted_pairs() == [("a1", "b1"), ("a2", "b2")]


def test_solve_fill_uses_every_seat_of_a_required_house():
    problem = FillProblem(
        edges=frozenset({("a1", "b1"), ("a2", "b1"), ("a3", "b2")}),
        capacities={"b1": 2, "b2": 1},
        required_fill=frozenset({"b1"}),
    )
    assert solve_fill(problem).occupants("b1") == ("a1", "a2")


def test_solve_fill_reports_infeasibility():
    short = FillProblem(edges=frozenset({("a1", "b1")}), capacities={"b1": 2}, required_fill=frozenset({"b1"}))
    assert solve_fill(short) is None
    isolated = FillProblem(edges=frozenset({("a1", "b1")}), capacities={"b1": 1}, a_perfect=True, agents=("a1", "a2"))
    assert solve_fill(isolated) is None
    crowded = FillProblem(
        edges=frozenset({("a1", "b1"), ("a2", "b1")}), capacities={"b1": 1}, a_perfect=True
    )
    assert solve_fill(crowded) is None


def test_fill_problem_rejects_unknown_required_house():
    with pytest.raises(ValidationError):
        FillProblem(edges=frozenset({("a1", "b1")}), capacities={"b1": 1}, required_fill=frozenset({"b9"}))


AGENTS = [f"a{i}" for i in range(1, 7)]
HOUSES = [f"b{i}" for i in range(1, 7)]

square_weights = st.integers(min_value=1, max_value=6).flatmap(
    lambda n: st.lists(
        st.lists(st.integers(min_value=-4, max_value=4), min_size=n, max_size=n), min_size=n, max_size=n
    )
)


@st.composite
def fill_problems(draw):
    agents = AGENTS[: draw(st.integers(min_value=1, max_value=6))]
    houses = HOUSES[: draw(st.integers(min_value=1, max_value=3))]
    capacities = {b: draw(st.integers(min_value=1, max_value=8 // len(houses))) for b in houses}
    edges = draw(st.sets(st.tuples(st.sampled_from(agents), st.sampled_from(houses))))
    return FillProblem(
        edges=frozenset(edges),
        capacities=capacities,
        required_fill=frozenset(draw(st.sets(st.sampled_from(houses)))),
        a_perfect=draw(st.booleans()),
        agents=tuple(agents),
    )


def _fill_is_feasible(problem, choice):
    """choice maps every agent to a house or None"""
    if problem.a_perfect and any(b is None for b in choice.values()):
        return False
    load = Counter(b for b in choice.values() if b is not None)
    if any(load[b] > problem.capacity(b) for b in problem.all_houses()):
        return False
    return all(load[b] == problem.capacity(b) for b in problem.required_fill)


def _exhaustive_fill(problem):
    agents = problem.all_agents()
    options = [[None] + sorted(b for owner, b in problem.edges if owner == a) for a in agents]
    return any(_fill_is_feasible(problem, dict(zip(agents, pick))) for pick in itertools.product(*options))


def _largest_matching_size(edges):
    neighbours = [sorted(b for owner, b in edges if owner == a) for a in AGENTS]

    @lru_cache(maxsize=None)
    def best(i, used):
        if i == len(neighbours):
            return 0
        size = best(i + 1, used)
        for b in neighbours[i]:
            if b not in used:
                size = max(size, 1 + best(i + 1, used | frozenset([b])))
        return size

    return best(0, frozenset())


@given(rows=square_weights)
def test_min_weight_perfect_matching_is_optimal(rows):
    w = np.array(rows, dtype=np.int64)
    n = w.shape[0]
    pairs, total = min_weight_perfect_matching(WeightMatrix(w=w))
    assert sorted(r for r, _ in pairs) == list(range(n))
    assert sorted(c for _, c in pairs) == list(range(n))
    assert total == sum(int(w[r, c]) for r, c in pairs)
    assert total == min(sum(int(w[r, perm[r]]) for r in range(n)) for perm in itertools.permutations(range(n)))


@given(problem=fill_problems())
def test_solve_fill_agrees_with_exhaustive_search(problem):
    found = solve_fill(problem)
    assert (found is not None) == _exhaustive_fill(problem)
    if found is not None:
        assert found.pairs <= problem.edges
        by_agent = {}
        for a, b in found.pairs:
            assert a not in by_agent
            by_agent[a] = b
        choice = {a: by_agent.get(a) for a in problem.all_agents()}
        assert _fill_is_feasible(problem, choice)


@given(edges=st.sets(st.tuples(st.sampled_from(AGENTS), st.sampled_from(HOUSES))))
def test_max_matching_is_maximum(edges):
    matching = max_matching(edges)
    assert matching.pairs <= edges
    assert len({a for a, _ in matching.pairs}) == len(matching)
    assert len({b for _, b in matching.pairs}) == len(matching)
    assert len(matching) == _largest_matching_size(frozenset(edges))
