"""Run orchestration: augment, evaluate, and score over whole datasets.

Work is parallelized with a thread pool (the hot paths block on subprocesses
or sockets), but every output is sorted before it is written, so a run's
artifacts are byte-deterministic regardless of completion order.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .client import ModelError
from .denial import (
    AugmentationInterrupted,
    AugmentationTrace,
    augment_problem,
    render_problem,
    states_from_trace,
)
from .detect import EmptyDetection, ParseError, detect_static, detect_with_model
from .metrics import HumanTechniqueProfile
from .prompts import SOLVER_SYSTEM_PROMPT
from .sandbox import NoCodeFound, ResourceLimits, extract_code, judge
from .types import ConstraintState, EvaluationRecord, Problem, Solution

log = logging.getLogger(__name__)


def problem_seed(base_seed: int, problem_id: str) -> int:
    """A stable per-problem seed (independent of platform hash salting)."""
    digest = hashlib.sha256(f"{base_seed}:{problem_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def make_detector(backend: str, client_factory=None):
    """source -> technique set, per the configured backend.

    The static backend returns the empty set for unparseable source (humans
    occasionally submit dialect-specific code); the model backend maps an
    empty review to the empty set.
    """
    if backend == "static":

        def detector(problem_id: str, source: str):
            try:
                return detect_static(source)
            except ParseError:
                log.warning("static detector: unparseable source for %s", problem_id)
                return frozenset()

        return detector
    if backend == "model":
        if client_factory is None:
            raise ValueError("model detector backend needs a client factory")

        def detector(problem_id: str, source: str):
            try:
                return detect_with_model(source, client_factory(problem_id))
            except EmptyDetection:
                return frozenset()

        return detector
    raise ValueError(f"unknown detector backend: {backend!r}")


@dataclass
class AugmentResult:
    traces: list = field(default_factory=list)
    states_by_problem: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    partial_traces: dict = field(default_factory=dict)


def augment_dataset(problems, client_factory, *, max_t: int, seed: int,
                    workers: int = 4) -> AugmentResult:
    result = AugmentResult()

    def run_one(problem: Problem):
        client = client_factory(problem.id)
        return augment_problem(problem, client, max_t, problem_seed(seed, problem.id))

    ordered = sorted(problems, key=lambda p: p.id)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {problem.id: pool.submit(run_one, problem) for problem in ordered}
    for problem in ordered:
        try:
            trace = futures[problem.id].result()
        except AugmentationInterrupted as err:
            log.error("augmentation failed for %s: %s", problem.id, err)
            result.failures[problem.id] = str(err)
            result.partial_traces[problem.id] = err.partial_trace
            continue
        result.traces.append(trace)
        result.states_by_problem[problem.id] = states_from_trace(trace)
    return result


def compute_human_profiles(problems, detector) -> dict:
    profiles = {}
    for problem in sorted(problems, key=lambda p: p.id):
        if not problem.human_solutions:
            continue
        per_solution = tuple(
            detector(problem.id, source) for source in problem.human_solutions
        )
        profiles[problem.id] = HumanTechniqueProfile(problem.id, per_solution)
    return profiles


def evaluate_instance(problem: Problem, state: ConstraintState, client,
                      detector, limits: ResourceLimits, *, k: int = 1
                      ) -> list[EvaluationRecord]:
    """Solve/judge/review one instance ``k`` times (fresh session each)."""
    prompt = render_problem(problem, state.constraints)
    group_id = f"{problem.id}@t{state.t}" if k > 1 else None
    records = []
    for sample_index in range(k):
        try:
            reply = client.one_shot(SOLVER_SYSTEM_PROMPT, prompt)
        except ModelError as err:
            log.error("evaluate %s@t%d: %s", problem.id, state.t, err)
            solution = Solution("", "", client.model_id, error=f"model_error: {err}")
            records.append(EvaluationRecord.build(
                state, solution, frozenset(), False,
                group_id=group_id, sample_index=sample_index,
            ))
            continue
        try:
            source = extract_code(reply)
        except NoCodeFound:
            solution = Solution(reply, "", client.model_id, error="no_code_found")
            records.append(EvaluationRecord.build(
                state, solution, frozenset(), False,
                group_id=group_id, sample_index=sample_index,
            ))
            continue
        solution = Solution(reply, source, client.model_id)
        correct, _ = judge(source, problem.tests, limits)
        detected = detector(problem.id, source)
        records.append(EvaluationRecord.build(
            state, solution, detected, correct,
            group_id=group_id, sample_index=sample_index,
        ))
    return records


def evaluate_dataset(problems, constraint_states, client_factory, detector,
                     *, limits: ResourceLimits, k: int = 1,
                     t_range: tuple[int, int] | None = None,
                     workers: int = 4) -> list[EvaluationRecord]:
    by_id = {problem.id: problem for problem in problems}
    chosen = []
    for state in constraint_states:
        if state.problem_id not in by_id:
            continue
        if t_range is not None and not t_range[0] <= state.t <= t_range[1]:
            continue
        chosen.append(state)
    chosen.sort(key=lambda s: (s.problem_id, s.t))

    clients = {}

    def client_for(problem_id: str):
        if problem_id not in clients:
            clients[problem_id] = client_factory(problem_id)
        return clients[problem_id]

    # instantiate clients in sorted order so scripted stubs are deterministic
    for state in chosen:
        client_for(state.problem_id)

    def run_one(state: ConstraintState):
        return evaluate_instance(
            by_id[state.problem_id], state, client_for(state.problem_id),
            detector, limits, k=k,
        )

    records: list[EvaluationRecord] = []
    if workers <= 1:
        for state in chosen:
            records.extend(run_one(state))
    else:
        # keep each problem on one worker: a problem's scripted/stateful
        # client must see its instances in state order
        by_problem: dict[str, list[ConstraintState]] = {}
        for state in chosen:
            by_problem.setdefault(state.problem_id, []).append(state)

        def run_problem(states: list[ConstraintState]):
            out = []
            for state in states:
                out.extend(run_one(state))
            return out

        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(run_problem, states)
                for _, states in sorted(by_problem.items())
            ]
            for future in futures:
                records.extend(future.result())
    records.sort(key=lambda r: (r.problem_id, r.t, r.sample_index))
    return records
