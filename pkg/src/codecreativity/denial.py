"""Iterative constraint denial.

One persistent solving session per problem: each iteration re-renders the
problem with every constraint accumulated so far, solicits a solution,
reviews it for techniques in a fresh session, and denies one uniformly-chosen
technique that is not already denied.  When nothing new is detected the
iteration records an exhaustion and the loop simply moves on, constraints
unchanged.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass

from .client import ChatClient, ModelError
from .detect import EmptyDetection, detect_with_model
from .prompts import SOLVER_SYSTEM_PROMPT
from .sandbox import NoCodeFound, extract_code
from .taxonomy import Technique, sort_techniques
from .types import ConstraintState, Problem, Solution

log = logging.getLogger(__name__)

CONSTRAINT_HEADER = "Programming constraints: DO NOT use the following techniques"


class AugmentationInterrupted(ModelError):
    """A model call died mid-run; the partial trace rides along."""

    def __init__(self, problem_id: str, partial_trace: "AugmentationTrace",
                 cause: Exception):
        super().__init__(f"augmentation of {problem_id} interrupted: {cause}")
        self.problem_id = problem_id
        self.partial_trace = partial_trace


@dataclass(frozen=True)
class IterationRecord:
    """Everything one denial iteration saw and decided."""

    t: int
    prompt_text: str
    solution: Solution | None
    detected: frozenset
    sampled_constraint: Technique | None
    constraints_after: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "detected", frozenset(self.detected))
        object.__setattr__(self, "constraints_after", tuple(self.constraints_after))


@dataclass(frozen=True)
class AugmentationTrace:
    problem_id: str
    rng_seed: int
    iterations: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "iterations", tuple(self.iterations))


def validate_trace(trace: AugmentationTrace) -> None:
    """Reject traces that violate the denial loop's own invariants."""
    before: tuple = ()
    for expected_t, record in enumerate(trace.iterations, start=1):
        if record.t != expected_t:
            raise ValueError(
                f"trace {trace.problem_id}: iteration {record.t} out of order"
            )
        after = record.constraints_after
        if record.sampled_constraint is None:
            if after != before:
                raise ValueError(
                    f"trace {trace.problem_id}@{record.t}: constraints changed "
                    "without a sampled denial"
                )
        else:
            if record.sampled_constraint in before:
                raise ValueError(
                    f"trace {trace.problem_id}@{record.t}: re-denied "
                    f"{record.sampled_constraint.canonical_name}"
                )
            if after != before + (record.sampled_constraint,):
                raise ValueError(
                    f"trace {trace.problem_id}@{record.t}: constraint list is "
                    "not the previous list plus the sampled denial"
                )
        before = after


def render_problem(problem: Problem, constraints) -> str:
    """The problem text a solver sees at a given constraint state.

    With no constraints this is the bare statement.  Otherwise the denial
    block (header plus one bullet per constraint, newest first) is spliced in
    right after the statement's first line — the title.
    """
    constraints = tuple(constraints)
    if not constraints:
        return problem.statement
    title, newline, body = problem.statement.partition("\n")
    block = "\n".join(
        [CONSTRAINT_HEADER] + [f"- {c.prompt_string}" for c in reversed(constraints)]
    )
    if not newline:
        return f"{title}\n{block}"
    return f"{title}\n{block}\n{body}"


def sample_constraint(detected, existing, rng: random.Random) -> Technique | None:
    """One uniformly-chosen technique not yet denied, or None when exhausted.

    Candidates are ordered by the fixed taxonomy order first, so a given seed
    picks the same technique no matter how the detected set was assembled.
    """
    candidates = sort_techniques(frozenset(detected) - set(existing))
    if not candidates:
        return None
    return rng.choice(candidates)


def augment_problem(
    problem: Problem,
    client: ChatClient,
    max_t: int,
    seed: int,
) -> AugmentationTrace:
    """Run the denial loop for one problem and return its full trace."""
    rng = random.Random(seed)
    session = client.open_session(SOLVER_SYSTEM_PROMPT)
    constraints: list[Technique] = []
    iterations: list[IterationRecord] = []

    def partial() -> AugmentationTrace:
        return AugmentationTrace(problem.id, seed, tuple(iterations))

    for t in range(1, max_t + 1):
        prompt = render_problem(problem, constraints)
        try:
            reply = session.send(prompt)
        except ModelError as err:
            raise AugmentationInterrupted(problem.id, partial(), err) from err
        try:
            source = extract_code(reply)
        except NoCodeFound:
            log.info("augment %s@%d: no code in reply; constraints unchanged",
                     problem.id, t)
            iterations.append(IterationRecord(
                t=t,
                prompt_text=prompt,
                solution=Solution(reply, "", client.model_id, error="no_code_found"),
                detected=frozenset(),
                sampled_constraint=None,
                constraints_after=tuple(constraints),
            ))
            continue
        solution = Solution(reply, source, client.model_id)
        try:
            detected = detect_with_model(source, client)
        except EmptyDetection:
            detected = frozenset()
        except ModelError as err:
            raise AugmentationInterrupted(problem.id, partial(), err) from err
        sampled = sample_constraint(detected, constraints, rng)
        if sampled is None:
            log.info("augment %s@%d: technique pool exhausted", problem.id, t)
        else:
            constraints.append(sampled)
        iterations.append(IterationRecord(
            t=t,
            prompt_text=prompt,
            solution=solution,
            detected=detected,
            sampled_constraint=sampled,
            constraints_after=tuple(constraints),
        ))
    trace = AugmentationTrace(problem.id, seed, tuple(iterations))
    validate_trace(trace)
    return trace


def states_from_trace(trace: AugmentationTrace) -> list[ConstraintState]:
    """Dataset-valid states: the unbroken prefix where |constraints| == t."""
    states = [ConstraintState(trace.problem_id, 0, ())]
    for record in trace.iterations:
        if len(record.constraints_after) == record.t:
            states.append(
                ConstraintState(trace.problem_id, record.t, record.constraints_after)
            )
        else:
            break
    return states
