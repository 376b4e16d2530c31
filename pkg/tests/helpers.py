"""Shared test scaffolding: record builders and synthetic data generators."""

from __future__ import annotations

import random

from codecreativity.metrics import HumanTechniqueProfile
from codecreativity.taxonomy import TECHNIQUES, by_canonical
from codecreativity.types import (
    ConstraintState,
    EvaluationRecord,
    Problem,
    Solution,
    TestExample,
)


def tech(name: str):
    return by_canonical(name)


def techs(*names):
    return frozenset(by_canonical(n) for n in names)


def make_state(problem_id: str, constraints=()) -> ConstraintState:
    constraints = tuple(constraints)
    return ConstraintState(problem_id, len(constraints), constraints)


def make_record(problem_id: str, constraints=(), detected=(), correct=True,
                group_id=None, sample_index=0) -> EvaluationRecord:
    return EvaluationRecord.build(
        make_state(problem_id, constraints),
        Solution("", "", "synthetic"),
        frozenset(detected),
        correct,
        group_id=group_id,
        sample_index=sample_index,
    )


def make_profile(problem_id: str, *solution_sets) -> HumanTechniqueProfile:
    return HumanTechniqueProfile(problem_id, tuple(frozenset(s) for s in solution_sets))


def make_problem(problem_id: str = "p1", statement: str | None = None,
                 tests=None, humans=()) -> Problem:
    if statement is None:
        statement = f"A. Problem {problem_id}\nRead a number, print it doubled."
    if tests is None:
        tests = (TestExample("2\n", "4\n"),)
    return Problem(
        id=problem_id, statement=statement, tests=tuple(tests),
        human_solutions=tuple(humans),
    )


def random_record_set(rng: random.Random, *, max_problems: int = 12,
                      min_humans: int = 1):
    """A synthetic scored dataset: (records, profiles, constraint_states)."""
    pool = list(TECHNIQUES)
    records, states = [], []
    profiles = {}
    for i in range(rng.randint(1, max_problems)):
        problem_id = f"p{i:03d}"
        per_solution = tuple(
            frozenset(rng.sample(pool, rng.randint(0, 6)))
            for _ in range(rng.randint(min_humans, 4))
        )
        profiles[problem_id] = HumanTechniqueProfile(problem_id, per_solution)
        chain = rng.sample(pool, rng.randint(0, 5))
        for t in range(len(chain) + 1):
            state = ConstraintState(problem_id, t, tuple(chain[:t]))
            states.append(state)
            records.append(EvaluationRecord.build(
                state,
                Solution("", "", "synthetic"),
                frozenset(rng.sample(pool, rng.randint(0, 8))),
                rng.random() < 0.5,
            ))
    return records, profiles, states
