import random
from fractions import Fraction

import pytest

import reference_metrics as ref
from codecreativity.metrics import (
    EmptyState,
    HumanTechniqueProfile,
    MDeficient,
    best_of_k_select,
    constraint_following,
    convergent_at,
    cumulative_neogauge,
    divergent_at,
    human_convergent,
    human_divergent,
    instance_convergent,
    instance_divergent,
    neogauge_at,
    pass_at_1,
)
from codecreativity.taxonomy import MISC
from helpers import make_profile, make_record, make_state, random_record_set, tech, techs


# ------------------------------------------------------------ instance level

def test_instance_convergent_requires_correct_and_constraint_free():
    assert instance_convergent(make_record("p", [tech("for loop")], [tech("set")])) == 1
    assert instance_convergent(
        make_record("p", [tech("for loop")], [tech("set")], correct=False)) == 0
    assert instance_convergent(
        make_record("p", [tech("for loop")], [tech("for loop")])) == 0


def test_instance_divergent_share_of_novel_techniques():
    detected = techs("recursion", "if statement", "set")
    union = techs("if statement", "for loop")
    assert instance_divergent(detected, union) == Fraction(2, 3)


def test_instance_divergent_empty_detection_scores_zero():
    assert instance_divergent(frozenset(), techs("for loop")) == Fraction(0)


def test_instance_divergent_all_novel_scores_one():
    assert instance_divergent(techs("heap"), techs("for loop")) == Fraction(1)


def test_instance_divergent_misc_flag_changes_numerator_only():
    detected = frozenset({MISC, tech("heap")})
    union = techs("for loop")
    assert instance_divergent(detected, union) == Fraction(1)
    assert instance_divergent(detected, union, misc_novelty=False) == Fraction(1, 2)


# ----------------------------------------------------------- aggregate level

def two_problem_records():
    r1 = make_record("p1", [tech("for loop")], [tech("recursion")], correct=True)
    r2 = make_record("p2", [tech("set")], [tech("set"), tech("heap")], correct=True)
    profiles = {
        "p1": make_profile("p1", techs("for loop"), techs("if statement")),
        "p2": make_profile("p2", techs("set")),
    }
    return [r1, r2], profiles


def test_convergent_is_mean_of_indicator():
    records, _ = two_problem_records()
    # r1 correct and clean; r2 correct but uses a denied technique
    assert convergent_at(records, 1) == Fraction(1, 2)


def test_divergent_is_mean_of_novel_shares():
    records, profiles = two_problem_records()
    # r1: recursion is novel (1/1); r2: heap is novel, set is not (1/2)
    assert divergent_at(records, 1, profiles) == Fraction(3, 4)


def test_neogauge_is_mean_of_products_not_product_of_means():
    # Instance A: convergent 1, divergent 1/2.  Instance B: convergent 0,
    # divergent 1.  Mean of products = 1/4; product of means would be 3/8.
    a = make_record("p1", [], [tech("set"), tech("for loop")], correct=True)
    b = make_record("p2", [], [tech("heap")], correct=False)
    profiles = {
        "p1": make_profile("p1", techs("for loop")),
        "p2": make_profile("p2", techs("if statement")),
    }
    assert neogauge_at([a, b], 0, profiles) == Fraction(1, 4)
    assert convergent_at([a, b], 0) * divergent_at([a, b], 0, profiles) == Fraction(3, 8)


def test_neogauge_never_exceeds_either_component():
    rng = random.Random(77)
    for _ in range(30):
        records, profiles, _ = random_record_set(rng)
        depths = {r.t for r in records}
        for t in depths:
            joint = neogauge_at(records, t, profiles)
            assert joint <= convergent_at(records, t)
            assert joint <= divergent_at(records, t, profiles)


def test_convergent_never_exceeds_pass_rate_and_matches_it_unconstrained():
    rng = random.Random(78)
    for _ in range(30):
        records, profiles, _ = random_record_set(rng)
        for t in {r.t for r in records}:
            assert convergent_at(records, t) <= pass_at_1(records, t)
        # At state 0 nothing is denied, so the two coincide.
        assert convergent_at(records, 0) == pass_at_1(records, 0)


def test_constraint_following_ignores_correctness():
    r1 = make_record("p1", [tech("for loop")], [tech("for loop")], correct=True)
    r2 = make_record("p2", [tech("set")], [tech("heap")], correct=False)
    assert constraint_following([r1, r2], 1) == Fraction(1, 2)


def test_empty_state_raises():
    records, profiles = two_problem_records()
    with pytest.raises(EmptyState):
        convergent_at(records, 5)
    with pytest.raises(EmptyState):
        divergent_at(records, 5, profiles)
    with pytest.raises(EmptyState):
        pass_at_1(records, 5)


def test_cumulative_neogauge_is_a_running_sum_skipping_empty_states():
    a = make_record("p1", [], [tech("heap")], correct=True)
    deeper = make_record(
        "p1", [tech("for loop"), tech("set")], [tech("recursion")], correct=True)
    profiles = {"p1": make_profile("p1", techs("for loop"))}
    # states 0 and 2 exist; state 1 is empty and contributes nothing
    assert cumulative_neogauge([a, deeper], 0, profiles) == Fraction(1)
    assert cumulative_neogauge([a, deeper], 1, profiles) == Fraction(1)
    assert cumulative_neogauge([a, deeper], 2, profiles) == Fraction(2)
    assert cumulative_neogauge([a, deeper], 9, profiles) == Fraction(2)


def test_cumulative_neogauge_is_monotone():
    rng = random.Random(79)
    records, profiles, _ = random_record_set(rng)
    values = [cumulative_neogauge(records, t, profiles) for t in range(8)]
    assert values == sorted(values)


# ------------------------------------------------------------ human baselines

def test_human_convergent_is_one_with_no_constraints():
    profiles = {"p1": make_profile("p1", techs("for loop"), techs("set"))}
    states = [make_state("p1")]
    assert human_convergent(profiles, states, 0) == Fraction(1)


def test_human_convergent_counts_solution_pairs():
    profiles = {
        "p1": make_profile("p1", techs("for loop"), techs("set")),
        "p2": make_profile("p2", techs("recursion")),
    }
    states = [
        make_state("p1", [tech("for loop")]),   # blocks one of two solutions
        make_state("p2", [tech("heap")]),       # blocks nothing
    ]
    assert human_convergent(profiles, states, 1) == Fraction(2, 3)


def test_human_divergent_quarter_construction():
    # Two solutions {a, b} and {a}: the first is half novel, the second fully
    # covered, so the leave-one-out mean is (1/2 + 0) / 2 = 1/4, exactly.
    profiles = {"p1": make_profile(
        "p1", techs("recursion", "set"), techs("recursion"))}
    assert human_divergent(profiles) == Fraction(1, 4)


def test_human_divergent_identical_solutions_score_zero():
    profiles = {"p1": make_profile("p1", techs("for loop"), techs("for loop"))}
    assert human_divergent(profiles) == Fraction(0)


def test_human_divergent_requires_two_solutions():
    profiles = {"p1": make_profile("p1", techs("for loop"))}
    with pytest.raises(MDeficient):
        human_divergent(profiles)


def test_human_divergent_is_state_insensitive():
    # No constraint state enters the computation at all: same profiles, same
    # value, no matter what the solver was denied.
    profiles = {"p1": make_profile("p1", techs("set", "heap"), techs("set"))}
    assert human_divergent(profiles) == Fraction(1, 4)


def test_profile_union_and_m():
    profile = make_profile("p1", techs("for loop"), techs("set", "for loop"))
    assert profile.m == 2
    assert profile.union == techs("for loop", "set")
    with pytest.raises(ValueError):
        HumanTechniqueProfile("p1", ())


# ------------------------------------------------------------ best-of-k pick

def test_best_of_k_picks_highest_product():
    union = techs("for loop")
    low = make_record("p1", [], [tech("for loop")], correct=True, sample_index=0)
    high = make_record("p1", [], [tech("heap")], correct=True, sample_index=1)
    assert best_of_k_select([low, high], union) is high


def test_best_of_k_breaks_ties_toward_earliest_sample():
    union = techs("for loop")
    first = make_record("p1", [], [tech("heap")], correct=True, sample_index=0)
    second = make_record("p1", [], [tech("set")], correct=True, sample_index=1)
    assert best_of_k_select([first, second], union) is first


def test_best_of_k_all_zero_still_picks_first():
    union = techs("for loop")
    records = [
        make_record("p1", [], [tech("for loop")], correct=False, sample_index=i)
        for i in range(3)
    ]
    assert best_of_k_select(records, union) is records[0]
    with pytest.raises(ValueError):
        best_of_k_select([], union)


# ------------------------------------------------- agreement with the oracle

def test_all_aggregates_match_the_naive_reference():
    rng = random.Random(20240918)
    for _ in range(25):
        records, profiles, states = random_record_set(rng, min_humans=2)
        depths = sorted({r.t for r in records})
        for t in depths + [max(depths) + 1]:
            for impl, oracle in [
                (lambda: convergent_at(records, t),
                 lambda: ref.ref_convergent_at(records, t)),
                (lambda: divergent_at(records, t, profiles),
                 lambda: ref.ref_divergent_at(records, t, profiles)),
                (lambda: neogauge_at(records, t, profiles),
                 lambda: ref.ref_neogauge_at(records, t, profiles)),
                (lambda: pass_at_1(records, t),
                 lambda: ref.ref_pass_at_1(records, t)),
                (lambda: constraint_following(records, t),
                 lambda: ref.ref_constraint_following(records, t)),
                (lambda: human_convergent(profiles, states, t),
                 lambda: ref.ref_human_convergent(profiles, states, t)),
            ]:
                try:
                    expected = oracle()
                except ref.RefEmpty:
                    with pytest.raises(EmptyState):
                        impl()
                else:
                    assert impl() == expected
        assert human_divergent(profiles) == ref.ref_human_divergent(profiles)
        for t in depths:
            assert cumulative_neogauge(records, t, profiles) == \
                ref.ref_cumulative_neogauge(records, t, profiles)
