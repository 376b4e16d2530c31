"""Creativity metrics over judged solutions.

All aggregation is exact (``fractions.Fraction``); rounding to display
percentages happens only in the report emitters.  The convergent/divergent
pair composes per instance — the joint score is the mean of per-instance
products, never the product of the two means.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .taxonomy import MISC
from .types import ConstraintState, EvaluationRecord


class EmptyState(Exception):
    """No instances exist at the requested state index."""


class MDeficient(Exception):
    """A human baseline needs at least two solutions per problem."""


@dataclass(frozen=True)
class HumanTechniqueProfile:
    """Detected technique sets for one problem's human solutions."""

    problem_id: str
    per_solution: tuple

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "per_solution", tuple(frozenset(s) for s in self.per_solution)
        )
        if not self.per_solution:
            raise ValueError(f"profile for {self.problem_id} has no solutions")

    @property
    def m(self) -> int:
        return len(self.per_solution)

    @cached_property
    def union(self) -> frozenset:
        out = frozenset()
        for techniques in self.per_solution:
            out |= techniques
        return out


def instance_convergent(record: EvaluationRecord) -> int:
    """1 iff the solution is correct while touching none of the constraints."""
    return int(record.correct and record.constraint_free)


def instance_divergent(detected, human_union, *, misc_novelty: bool = True) -> Fraction:
    """Share of the solution's techniques that no human solution used.

    An empty detected set scores 0 exactly.  With ``misc_novelty`` off, the
    catch-all member never counts as novel (the denominator is unchanged).
    """
    detected = frozenset(detected)
    if not detected:
        return Fraction(0)
    novel = detected - frozenset(human_union)
    if not misc_novelty:
        novel -= {MISC}
    return Fraction(len(novel), len(detected))


def _at_state(records, t: int) -> list:
    chosen = [r for r in records if r.t == t]
    if not chosen:
        raise EmptyState(f"no instances at state {t}")
    return chosen


def convergent_at(records, t: int) -> Fraction:
    chosen = _at_state(records, t)
    return Fraction(sum(instance_convergent(r) for r in chosen), len(chosen))


def divergent_at(records, t: int, profiles, *, misc_novelty: bool = True) -> Fraction:
    chosen = _at_state(records, t)
    total = Fraction(0)
    for record in chosen:
        union = profiles[record.problem_id].union
        total += instance_divergent(record.detected, union, misc_novelty=misc_novelty)
    return total / len(chosen)


def neogauge_at(records, t: int, profiles, *, misc_novelty: bool = True) -> Fraction:
    """Mean of the per-instance convergent × divergent product at state t."""
    chosen = _at_state(records, t)
    total = Fraction(0)
    for record in chosen:
        union = profiles[record.problem_id].union
        total += instance_convergent(record) * instance_divergent(
            record.detected, union, misc_novelty=misc_novelty
        )
    return total / len(chosen)


def cumulative_neogauge(records, up_to_t: int, profiles, *,
                        misc_novelty: bool = True) -> Fraction:
    """Running sum of the joint score over states 0..t (empty states add 0)."""
    total = Fraction(0)
    for s in range(up_to_t + 1):
        try:
            total += neogauge_at(records, s, profiles, misc_novelty=misc_novelty)
        except EmptyState:
            pass
    return total


def pass_at_1(records, t: int) -> Fraction:
    chosen = _at_state(records, t)
    return Fraction(sum(1 for r in chosen if r.correct), len(chosen))


def constraint_following(records, t: int) -> Fraction:
    chosen = _at_state(records, t)
    return Fraction(sum(1 for r in chosen if r.constraint_free), len(chosen))


def human_convergent(profiles, constraint_states, t: int) -> Fraction:
    """Share of (instance, human solution) pairs untouched by the constraints."""
    states = [s for s in constraint_states if s.t == t]
    if not states:
        raise EmptyState(f"no instances at state {t}")
    hits = 0
    pairs = 0
    for state in states:
        constraints = frozenset(state.constraints)
        profile = profiles[state.problem_id]
        for techniques in profile.per_solution:
            pairs += 1
            if not (techniques & constraints):
                hits += 1
    return Fraction(hits, pairs)


def human_divergent(profiles, *, misc_novelty: bool = True) -> Fraction:
    """Leave-one-out novelty of human solutions (state-insensitive).

    For each solution, the share of its techniques used by no *other* human
    solution to the same problem; empty technique sets contribute 0.
    """
    total = Fraction(0)
    pairs = 0
    for profile in profiles.values():
        if profile.m < 2:
            raise MDeficient(
                f"problem {profile.problem_id} has {profile.m} human solution(s);"
                " need at least 2"
            )
        for j, techniques in enumerate(profile.per_solution):
            others = frozenset()
            for k, other in enumerate(profile.per_solution):
                if k != j:
                    others |= other
            pairs += 1
            total += instance_divergent(techniques, others, misc_novelty=misc_novelty)
    if not pairs:
        raise EmptyState("no human solutions to baseline")
    return total / pairs


def best_of_k_select(records, human_union, *, misc_novelty: bool = True
                     ) -> EvaluationRecord:
    """The sample with the highest convergent × divergent product.

    Ties go to the earliest sample, so selection is deterministic.
    """
    if not records:
        raise ValueError("best_of_k_select needs at least one record")
    best = None
    best_score = Fraction(-1)
    for record in records:
        score = instance_convergent(record) * instance_divergent(
            record.detected, human_union, misc_novelty=misc_novelty
        )
        if score > best_score:
            best, best_score = record, score
    return best
