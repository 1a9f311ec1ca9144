"""
Fast solvers and verifiers against exhaustive enumeration on seeded random instances

Instances come from the same generator the command line uses, so any failure can
be replayed with `popmatch gen --seed ...`.
"""

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from popmatch.generator import GeneratorConfig, generate_instance
from popmatch.house_allocation import (
    HACriterion,
    append_last_resort,
    certainly_popular_ha,
    edge_in_E_hat,
    popular_ha,
    profile_graph,
    verify_ha,
)
from popmatch.models import UNMATCHED, MarketModel, Matching, Robust
from popmatch.oracle import (
    EnumerationBudget,
    Property,
    brute_check,
    brute_exists,
    enumerate_matchings,
    enumerate_profiles,
    is_maximal,
)
from popmatch.robust_ha import k_robust_popular_ha
from popmatch.two_sided import (
    Criterion,
    certainly_dominant,
    certainly_stable,
    duplicate_instance,
    gale_shapley,
    project_matching,
    solve_robust_two_sided,
    verify_two_sided,
)

BUDGET = EnumerationBudget(max_matchings=200_000, max_profiles=20_000)
SEEDS = st.integers(min_value=0, max_value=2**32 - 1)
CORPUS = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
LARGE_CORPUS = settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
SMALL_CORPUS = settings(max_examples=10, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def _two_sided(seed, flavor, n=3, **extra):
    return generate_instance(GeneratorConfig(seed=seed, n_a=n, n_b=n, list_len_min=n, flavor=flavor, **extra))


def _house_allocation(seed, flavor, n_a=4, n_b=3, **extra):
    config = GeneratorConfig(
        seed=seed, model=MarketModel.HA, n_a=n_a, n_b=n_b, list_len_min=1, flavor=flavor, cap_max=2, **extra
    )
    return generate_instance(config)


def _candidates(instance):
    first_maximal = next(m for m in enumerate_matchings(instance, BUDGET) if is_maximal(instance, m))
    return [Matching(), gale_shapley(instance), first_maximal]


def _uncertain_property(instance, criterion):
    prefix = "k-robust" if isinstance(instance.scenario, Robust) else "certainly"
    return Property(f"{prefix}-{criterion.value}")


def _assert_verification_agrees(instance):
    for matching in _candidates(instance):
        for criterion in Criterion:
            fast = verify_two_sided(instance, matching, criterion)
            slow = brute_check(instance, matching, _uncertain_property(instance, criterion), BUDGET)
            assert fast.holds == slow.holds, (criterion, matching)


@CORPUS
@given(seed=SEEDS)
def test_gale_shapley_is_stable_and_proposer_optimal(seed):
    instance = generate_instance(GeneratorConfig(seed=seed, n_a=4, n_b=4, list_len_min=1))
    proposed = gale_shapley(instance)
    assert brute_check(instance, proposed, Property.STABLE, BUDGET).holds
    mine = proposed.house_of()
    for matching in enumerate_matchings(instance, BUDGET):
        if not brute_check(instance, matching, Property.STABLE, BUDGET).holds:
            continue
        other = matching.house_of()
        for a in instance.agents_a:
            plist = instance.base_list(a)
            ours, theirs = mine.get(a, UNMATCHED), other.get(a, UNMATCHED)
            assert ours == theirs or plist.prefers(ours, theirs), (a, matching)


@CORPUS
@given(seed=SEEDS)
def test_verification_over_layers(seed):
    _assert_verification_agrees(_two_sided(seed, "layers", layers=2))


@CORPUS
@given(seed=SEEDS)
def test_verification_over_independent_lists(seed):
    _assert_verification_agrees(_two_sided(seed, "independent", set_size=2, uncertain_agents=3))


@CORPUS
@given(seed=SEEDS)
def test_verification_over_swap_balls(seed):
    _assert_verification_agrees(_two_sided(seed, "robust", n=2, k=1))


@CORPUS
@given(seed=SEEDS)
def test_sum_verification_over_layers(seed):
    instance = _two_sided(seed, "layers", layers=2)
    for matching in _candidates(instance):
        for criterion, prop in ((Criterion.POPULAR, Property.SUM_POPULAR), (Criterion.DOMINANT, Property.SUM_DOMINANT)):
            fast = verify_two_sided(instance, matching, criterion, aggregated=True)
            assert fast.holds == brute_check(instance, matching, prop, BUDGET).holds


@CORPUS
@given(seed=SEEDS, uncertain=st.integers(min_value=0, max_value=3))
def test_certainly_stable_and_dominant(seed, uncertain):
    instance = _two_sided(seed, "independent", set_size=2, uncertain_agents=uncertain)
    cases = ((certainly_stable, Property.CERTAINLY_STABLE), (certainly_dominant, Property.CERTAINLY_DOMINANT))
    for solve, prop in cases:
        found = solve(instance)
        if found is None:
            assert brute_exists(instance, prop, BUDGET) is None
        else:
            assert brute_check(instance, found, prop, BUDGET).holds


@CORPUS
@given(seed=SEEDS)
def test_popular_ha(seed):
    instance = _house_allocation(seed, "layers")
    found = popular_ha(instance)
    if found is None:
        assert brute_exists(instance, Property.POPULAR, BUDGET) is None
    else:
        assert brute_check(instance, found, Property.POPULAR, BUDGET).holds
    for matching in enumerate_matchings(instance, BUDGET):
        fast = verify_ha(instance, matching, HACriterion.POPULAR)
        assert fast.holds == brute_check(instance, matching, Property.POPULAR, BUDGET).holds


@CORPUS
@given(seed=SEEDS, layers=st.integers(min_value=2, max_value=3))
def test_certainly_popular_ha_over_layers(seed, layers):
    instance = _house_allocation(seed, "layers", layers=layers)
    found = certainly_popular_ha(instance)
    if found is None:
        assert brute_exists(instance, Property.CERTAINLY_POPULAR, BUDGET) is None
    else:
        assert brute_check(instance, found, Property.CERTAINLY_POPULAR, BUDGET).holds


@CORPUS
@given(seed=SEEDS, uncertain=st.integers(min_value=1, max_value=3))
def test_certainly_popular_ha_over_independent_lists(seed, uncertain):
    instance = _house_allocation(seed, "independent", set_size=2, uncertain_agents=uncertain)
    found = certainly_popular_ha(instance)
    if found is None:
        assert brute_exists(instance, Property.CERTAINLY_POPULAR, BUDGET) is None
    else:
        assert brute_check(instance, found, Property.CERTAINLY_POPULAR, BUDGET).holds
        assert verify_ha(instance, found, HACriterion.CERTAINLY_POPULAR).holds


@CORPUS
@given(seed=SEEDS, flavor=st.sampled_from(["layers", "independent"]))
def test_e_hat_is_the_intersection_over_profiles(seed, flavor):
    instance = _house_allocation(seed, flavor, layers=2, set_size=2, uncertain_agents=2)
    extended = append_last_resort(instance)
    graphs = [profile_graph(extended, profile) for profile in enumerate_profiles(extended, BUDGET)]
    for a, b in sorted(instance.edges):
        assert edge_in_E_hat(instance, a, b) == all(graph.allows(a, b) for graph in graphs), (a, b)


@CORPUS
@given(seed=SEEDS)
def test_sum_popular_ha(seed):
    instance = _house_allocation(seed, "layers", n_a=3, layers=2)
    for matching in enumerate_matchings(instance, BUDGET):
        fast = verify_ha(instance, matching, HACriterion.SUM_POPULAR)
        assert fast.holds == brute_check(instance, matching, Property.SUM_POPULAR, BUDGET).holds


@pytest.mark.slow
@LARGE_CORPUS
@given(seed=SEEDS, k=st.integers(min_value=1, max_value=2))
def test_k_robust_popular_ha(seed, k):
    instance = _house_allocation(seed, "robust", n_a=3, list_len_max=3, k=k)
    found = k_robust_popular_ha(instance)
    if found is None:
        assert brute_exists(instance, Property.K_ROBUST_POPULAR, BUDGET) is None
    else:
        assert brute_check(instance, found, Property.K_ROBUST_POPULAR, BUDGET).holds
        assert verify_ha(instance, found, HACriterion.K_ROBUST_POPULAR).holds


@pytest.mark.slow
@LARGE_CORPUS
@given(seed=SEEDS)
def test_k_robust_stable(seed):
    instance = _two_sided(seed, "robust", k=1)
    found = solve_robust_two_sided(instance, Criterion.STABLE)
    if found is None:
        assert brute_exists(instance, Property.K_ROBUST_STABLE, BUDGET) is None
    else:
        assert brute_check(instance, found, Property.K_ROBUST_STABLE, BUDGET).holds


@pytest.mark.slow
@SMALL_CORPUS
@given(seed=SEEDS)
def test_verification_over_larger_swap_balls(seed):
    _assert_verification_agrees(_two_sided(seed, "robust", n=3, k=1))


def _stable_copy_sets(market):
    """Every matching of a keyed-edge market that no edge blocks"""
    found = []

    def extend(i, chosen, used):
        if i == len(market.agents_a):
            if not market.blocking_edges(set(chosen)):
                found.append(set(chosen))
            return
        extend(i + 1, chosen, used)
        for e in market.incident[market.agents_a[i]]:
            b = market.endpoints[int(e)][1]
            if b not in used:
                extend(i + 1, chosen + [int(e)], used | {b})

    extend(0, [], frozenset())
    return found


@CORPUS
@given(seed=SEEDS, n_a=st.integers(min_value=1, max_value=4), n_b=st.integers(min_value=1, max_value=4))
def test_duplicated_stable_matchings_project_to_dominant(seed, n_a, n_b):
    instance = generate_instance(GeneratorConfig(seed=seed, n_a=n_a, n_b=n_b, list_len_min=1))
    market, copies = duplicate_instance(instance).to_market()
    stable = _stable_copy_sets(market)
    assert stable
    for chosen in stable:
        matching = project_matching(copies[e] for e in chosen)
        assert brute_check(instance, matching, Property.DOMINANT, BUDGET).holds, matching


@pytest.mark.slow
@CORPUS
@given(seed=SEEDS, k=st.integers(min_value=1, max_value=2))
def test_k_robust_dominant(seed, k):
    instance = _two_sided(seed, "robust", n=4 - k, k=k)
    found = solve_robust_two_sided(instance, Criterion.DOMINANT)
    if found is None:
        assert brute_exists(instance, Property.K_ROBUST_DOMINANT, BUDGET) is None
    else:
        assert brute_check(instance, found, Property.K_ROBUST_DOMINANT, BUDGET).holds
