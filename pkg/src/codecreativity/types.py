"""Core domain types shared by every layer of the harness."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .taxonomy import Technique

#: Program text in the target language (plain source, no fences).
SourceText = str


@dataclass(frozen=True)
class TestExample:
    """One input/expected-output pair fed to a judged program's stdin."""

    input: str
    expected_output: str

    def __post_init__(self) -> None:
        if self.input is None or self.expected_output is None:
            raise ValueError("test fields must be strings, not None")


@dataclass(frozen=True)
class Problem:
    """A programming problem: statement, judge tests and human solutions.

    The statement's first line is treated as the problem title when a
    constraint block has to be spliced in.
    """

    id: str
    statement: str
    tests: tuple[TestExample, ...]
    human_solutions: tuple[SourceText, ...] = ()
    difficulty: int = 0

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("problem id must be non-empty")
        if not self.statement:
            raise ValueError("problem statement must be non-empty")
        object.__setattr__(self, "tests", tuple(self.tests))
        object.__setattr__(self, "human_solutions", tuple(self.human_solutions))


@dataclass(frozen=True)
class ConstraintState:
    """A problem instance at denial depth ``t``: the accumulated constraints.

    A state is only ever materialized when it is dataset-valid, i.e. exactly
    ``t`` distinct constraints were successfully accumulated.
    """

    problem_id: str
    t: int
    constraints: tuple[Technique, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.t < 0:
            raise ValueError("state index must be >= 0")
        if len(set(self.constraints)) != len(self.constraints):
            raise ValueError(
                f"duplicate constraints in state {self.problem_id}@{self.t}"
            )
        if self.t != len(self.constraints):
            raise ValueError(
                f"state {self.problem_id}@{self.t} carries "
                f"{len(self.constraints)} constraints; expected {self.t}"
            )


@dataclass(frozen=True)
class Solution:
    """A model's answer to one instance: raw reply plus extracted source."""

    raw_response: str
    source: SourceText
    producer: str
    error: str | None = None


@dataclass(frozen=True)
class EvaluationRecord:
    """Everything known about one judged solution at one constraint state."""

    constraint_state: ConstraintState
    solution: Solution
    detected: frozenset
    correct: bool
    constraint_free: bool
    group_id: str | None = None
    sample_index: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "detected", frozenset(self.detected))
        free = not (self.detected & set(self.constraint_state.constraints))
        if self.constraint_free != free:
            raise ValueError(
                "constraint_free flag disagrees with detected/constraints overlap"
            )

    @classmethod
    def build(
        cls,
        constraint_state: ConstraintState,
        solution: Solution,
        detected,
        correct: bool,
        *,
        group_id: str | None = None,
        sample_index: int = 0,
    ) -> "EvaluationRecord":
        detected = frozenset(detected)
        free = not (detected & set(constraint_state.constraints))
        return cls(
            constraint_state=constraint_state,
            solution=solution,
            detected=detected,
            correct=correct,
            constraint_free=free,
            group_id=group_id,
            sample_index=sample_index,
        )

    @property
    def problem_id(self) -> str:
        return self.constraint_state.problem_id

    @property
    def t(self) -> int:
        return self.constraint_state.t

    @property
    def constraints(self) -> tuple[Technique, ...]:
        return self.constraint_state.constraints


@dataclass(frozen=True)
class ScoreRow:
    """One per-state row of a score report (exact rationals, None = no data)."""

    t: int
    n_instances: int
    pass_at_1: Fraction | None
    constraint_following: Fraction | None
    convergent: Fraction | None
    divergent: Fraction | None
    neogauge: Fraction | None
    cumulative_neogauge: Fraction = field(default=Fraction(0))

    def __post_init__(self) -> None:
        for name in ("pass_at_1", "constraint_following", "convergent",
                     "divergent", "neogauge"):
            value = getattr(self, name)
            if value is not None and not 0 <= value <= 1:
                raise ValueError(f"{name} out of [0, 1]: {value}")
        if not 0 <= self.cumulative_neogauge <= self.t + 1:
            raise ValueError("cumulative out of [0, t+1]")
        if self.neogauge is not None:
            if self.convergent is None or self.divergent is None:
                raise ValueError("neogauge present without its factors")
            if self.neogauge > min(self.convergent, self.divergent):
                raise ValueError(
                    f"row t={self.t}: neogauge exceeds min(convergent, divergent)"
                )
        if self.t == 0 and self.constraint_following is not None:
            if self.constraint_following != 1:
                raise ValueError("constraint following at state 0 must be 1")


@dataclass(frozen=True)
class ScoreReport:
    """Per-state score rows, ordered by state index."""

    rows: tuple[ScoreRow, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))
        ts = [row.t for row in self.rows]
        if ts != sorted(set(ts)):
            raise ValueError("report rows must be strictly increasing in t")
