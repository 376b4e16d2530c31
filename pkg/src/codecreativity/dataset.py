"""JSONL interchange: problems, human solutions, records, profiles, traces.

Writers emit one canonical line per entity (sorted keys, UTF-8, no ASCII
escaping) so load→save round-trips are byte-stable.  Loaders validate
eagerly and point at the offending line; technique names in data files use
the prompt spelling and are canonicalized on the way in.
"""

from __future__ import annotations

import json
from pathlib import Path

from .denial import AugmentationTrace, IterationRecord, validate_trace
from .metrics import HumanTechniqueProfile
from .taxonomy import Technique, canonicalize, sort_techniques
from .types import ConstraintState, EvaluationRecord, Problem, Solution, TestExample

SCHEMA_VERSION = 1


class DatasetError(Exception):
    """Base for everything wrong with an interchange file."""


class FormatError(DatasetError):
    pass


class TaxonomyError(DatasetError):
    """A data file names a technique outside the closed taxonomy."""


class DuplicateId(DatasetError):
    pass


def _loc(path, line: int) -> str:
    return f"{path}:{line}"


def _check_version(obj: dict, where: str) -> None:
    version = obj.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise FormatError(f"{where}: unsupported schema_version {version!r}")


def _iter_jsonl(path: str | Path):
    with Path(path).open(encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise FormatError(f"{_loc(path, number)}: invalid JSON: {err}") from err
            if not isinstance(obj, dict):
                raise FormatError(f"{_loc(path, number)}: expected an object")
            yield number, obj


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n"


def _require(obj: dict, key: str, kind, where: str):
    if key not in obj:
        raise FormatError(f"{where}: missing field {key!r}")
    value = obj[key]
    if not isinstance(value, kind):
        raise FormatError(f"{where}: field {key!r} has wrong type")
    return value


def _parse_technique(name, where: str) -> Technique:
    if not isinstance(name, str):
        raise FormatError(f"{where}: technique names must be strings")
    technique = canonicalize(name)
    if technique is None:
        raise TaxonomyError(f"{where}: unknown technique {name!r}")
    return technique


def _parse_state(obj: dict, problem_id: str, where: str) -> ConstraintState:
    t = _require(obj, "t", int, where)
    raw = _require(obj, "constraints", list, where)
    constraints = tuple(_parse_technique(name, where) for name in raw)
    if len(set(constraints)) != len(constraints):
        raise FormatError(f"{where}: duplicate constraints in state t={t}")
    if t != len(constraints):
        raise FormatError(
            f"{where}: state t={t} carries {len(constraints)} constraints"
        )
    return ConstraintState(problem_id, t, constraints)


def load_dataset(path: str | Path) -> tuple[list[Problem], list[ConstraintState]]:
    """Problems plus every dataset-valid constraint state.

    A problem line with no ``states`` field gets the bare state 0 (a dataset
    that has not been through augmentation yet).
    """
    problems: list[Problem] = []
    states: list[ConstraintState] = []
    seen: set[str] = set()
    for number, obj in _iter_jsonl(path):
        where = _loc(path, number)
        _check_version(obj, where)
        problem_id = _require(obj, "id", str, where)
        if problem_id in seen:
            raise DuplicateId(f"{where}: duplicate problem id {problem_id!r}")
        seen.add(problem_id)
        statement = _require(obj, "statement", str, where)
        raw_tests = _require(obj, "tests", list, where)
        tests = []
        for raw in raw_tests:
            if not isinstance(raw, dict):
                raise FormatError(f"{where}: tests must be objects")
            tests.append(TestExample(
                input=_require(raw, "input", str, where),
                expected_output=_require(raw, "expected_output", str, where),
            ))
        difficulty = obj.get("difficulty", 0)
        if not isinstance(difficulty, int):
            raise FormatError(f"{where}: difficulty must be an integer")
        problems.append(Problem(
            id=problem_id, statement=statement, tests=tuple(tests),
            difficulty=difficulty,
        ))
        raw_states = obj.get("states", [{"t": 0, "constraints": []}])
        if not isinstance(raw_states, list):
            raise FormatError(f"{where}: states must be a list")
        seen_t: set[int] = set()
        for raw in raw_states:
            if not isinstance(raw, dict):
                raise FormatError(f"{where}: states must be objects")
            state = _parse_state(raw, problem_id, where)
            if state.t in seen_t:
                raise FormatError(f"{where}: duplicate state t={state.t}")
            seen_t.add(state.t)
            states.append(state)
    return problems, states


def save_dataset(path: str | Path, problems, states_by_problem: dict) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for problem in sorted(problems, key=lambda p: p.id):
            states = sorted(states_by_problem.get(problem.id, ()), key=lambda s: s.t)
            fh.write(_dump_line({
                "difficulty": problem.difficulty,
                "id": problem.id,
                "schema_version": SCHEMA_VERSION,
                "statement": problem.statement,
                "states": [
                    {
                        "constraints": [c.prompt_string for c in state.constraints],
                        "t": state.t,
                    }
                    for state in states
                ],
                "tests": [
                    {"expected_output": t.expected_output, "input": t.input}
                    for t in problem.tests
                ],
            }))


def load_human_solutions(path: str | Path) -> dict:
    """problem_id -> solution sources, ordered by their declared index."""
    rows: dict[str, dict[int, str]] = {}
    for number, obj in _iter_jsonl(path):
        where = _loc(path, number)
        _check_version(obj, where)
        problem_id = _require(obj, "problem_id", str, where)
        index = _require(obj, "index", int, where)
        source = _require(obj, "source", str, where)
        per_problem = rows.setdefault(problem_id, {})
        if index in per_problem:
            raise DuplicateId(
                f"{where}: duplicate human solution {problem_id!r}#{index}"
            )
        per_problem[index] = source
    return {
        problem_id: [solutions[i] for i in sorted(solutions)]
        for problem_id, solutions in rows.items()
    }


def save_human_solutions(path: str | Path, solutions_by_problem: dict) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for problem_id in sorted(solutions_by_problem):
            for index, source in enumerate(solutions_by_problem[problem_id]):
                fh.write(_dump_line({
                    "index": index,
                    "problem_id": problem_id,
                    "schema_version": SCHEMA_VERSION,
                    "source": source,
                }))


def filter_state(constraint_states, t: int) -> list:
    """Exactly the instances whose constraint count equals ``t``."""
    return [s for s in constraint_states if len(s.constraints) == t]


def _solution_to_obj(solution: Solution) -> dict:
    return {
        "error": solution.error,
        "producer": solution.producer,
        "raw_response": solution.raw_response,
        "source": solution.source,
    }


def _solution_from_obj(obj: dict, where: str) -> Solution:
    return Solution(
        raw_response=_require(obj, "raw_response", str, where),
        source=_require(obj, "source", str, where),
        producer=_require(obj, "producer", str, where),
        error=obj.get("error"),
    )


def save_records(path: str | Path, records) -> None:
    ordered = sorted(records, key=lambda r: (r.problem_id, r.t, r.sample_index))
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in ordered:
            fh.write(_dump_line({
                "constraint_free": record.constraint_free,
                "constraints": [c.prompt_string for c in record.constraints],
                "correct": record.correct,
                "detected": [
                    t.prompt_string for t in sort_techniques(record.detected)
                ],
                "group_id": record.group_id,
                "problem_id": record.problem_id,
                "sample_index": record.sample_index,
                "schema_version": SCHEMA_VERSION,
                "solution": _solution_to_obj(record.solution),
                "t": record.t,
            }))


def load_records(path: str | Path) -> list:
    records = []
    for number, obj in _iter_jsonl(path):
        where = _loc(path, number)
        _check_version(obj, where)
        problem_id = _require(obj, "problem_id", str, where)
        t = _require(obj, "t", int, where)
        constraints = tuple(
            _parse_technique(name, where)
            for name in _require(obj, "constraints", list, where)
        )
        detected = frozenset(
            _parse_technique(name, where)
            for name in _require(obj, "detected", list, where)
        )
        try:
            state = ConstraintState(problem_id, t, constraints)
        except ValueError as err:
            raise FormatError(f"{where}: {err}") from err
        solution = _solution_from_obj(_require(obj, "solution", dict, where), where)
        correct = _require(obj, "correct", bool, where)
        constraint_free = _require(obj, "constraint_free", bool, where)
        group_id = obj.get("group_id")
        sample_index = obj.get("sample_index", 0)
        try:
            records.append(EvaluationRecord(
                constraint_state=state,
                solution=solution,
                detected=detected,
                correct=correct,
                constraint_free=constraint_free,
                group_id=group_id,
                sample_index=sample_index,
            ))
        except ValueError as err:
            raise FormatError(f"{where}: {err}") from err
    return records


def save_profiles(path: str | Path, profiles: dict) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for problem_id in sorted(profiles):
            profile = profiles[problem_id]
            fh.write(_dump_line({
                "problem_id": problem_id,
                "schema_version": SCHEMA_VERSION,
                "solutions": [
                    [t.prompt_string for t in sort_techniques(techniques)]
                    for techniques in profile.per_solution
                ],
            }))


def load_profiles(path: str | Path) -> dict:
    profiles = {}
    for number, obj in _iter_jsonl(path):
        where = _loc(path, number)
        _check_version(obj, where)
        problem_id = _require(obj, "problem_id", str, where)
        if problem_id in profiles:
            raise DuplicateId(f"{where}: duplicate profile for {problem_id!r}")
        raw = _require(obj, "solutions", list, where)
        per_solution = []
        for names in raw:
            if not isinstance(names, list):
                raise FormatError(f"{where}: solutions must be lists of names")
            per_solution.append(
                frozenset(_parse_technique(name, where) for name in names)
            )
        try:
            profiles[problem_id] = HumanTechniqueProfile(
                problem_id, tuple(per_solution)
            )
        except ValueError as err:
            raise FormatError(f"{where}: {err}") from err
    return profiles


def _iteration_to_obj(record: IterationRecord) -> dict:
    return {
        "constraints_after": [c.prompt_string for c in record.constraints_after],
        "detected": [t.prompt_string for t in sort_techniques(record.detected)],
        "prompt_text": record.prompt_text,
        "sampled_constraint": (
            record.sampled_constraint.prompt_string
            if record.sampled_constraint is not None else None
        ),
        "solution": (
            _solution_to_obj(record.solution) if record.solution is not None else None
        ),
        "t": record.t,
    }


def save_trace(path: str | Path, trace: AugmentationTrace) -> None:
    doc = {
        "iterations": [_iteration_to_obj(r) for r in trace.iterations],
        "problem_id": trace.problem_id,
        "rng_seed": trace.rng_seed,
        "schema_version": SCHEMA_VERSION,
    }
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


def load_trace(path: str | Path) -> AugmentationTrace:
    where = str(path)
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise FormatError(f"{where}: invalid JSON: {err}") from err
    if not isinstance(doc, dict):
        raise FormatError(f"{where}: expected an object")
    _check_version(doc, where)
    problem_id = _require(doc, "problem_id", str, where)
    rng_seed = _require(doc, "rng_seed", int, where)
    iterations = []
    for raw in _require(doc, "iterations", list, where):
        if not isinstance(raw, dict):
            raise FormatError(f"{where}: iterations must be objects")
        sampled_raw = raw.get("sampled_constraint")
        solution_raw = raw.get("solution")
        iterations.append(IterationRecord(
            t=_require(raw, "t", int, where),
            prompt_text=_require(raw, "prompt_text", str, where),
            solution=(
                _solution_from_obj(solution_raw, where)
                if solution_raw is not None else None
            ),
            detected=frozenset(
                _parse_technique(name, where)
                for name in _require(raw, "detected", list, where)
            ),
            sampled_constraint=(
                _parse_technique(sampled_raw, where)
                if sampled_raw is not None else None
            ),
            constraints_after=tuple(
                _parse_technique(name, where)
                for name in _require(raw, "constraints_after", list, where)
            ),
        ))
    trace = AugmentationTrace(problem_id, rng_seed, tuple(iterations))
    try:
        validate_trace(trace)
    except ValueError as err:
        raise FormatError(f"{where}: {err}") from err
    return trace
