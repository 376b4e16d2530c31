"""Score report assembly and emission (CSV, JSON, markdown).

Metrics stay exact until the moment a percentage is printed; formatting
rounds half-up to one decimal.  Emitted reports are re-validated from their
own text (the dominance check and the state-0 following check), so a bug in
assembly or formatting cannot slip a self-inconsistent report past a run.
"""

from __future__ import annotations

import io
import logging
from fractions import Fraction

from . import metrics
from .dataset import filter_state
from .metrics import EmptyState
from .types import ScoreReport, ScoreRow

log = logging.getLogger(__name__)

CSV_HEADER = (
    "t,n_instances,pass_at_1,constraint_following,convergent,divergent,"
    "neogauge,cumulative_neogauge"
)

HUMAN_CSV_HEADER = "t,n_instances,human_convergent,human_divergent"

EMPTY_CELL = "—"


class InvariantViolation(Exception):
    """An emitted report contradicts the metric family's own guarantees."""


def percent_text(value: Fraction | None) -> str:
    """One-decimal percentage with exact half-up rounding; em dash for gaps."""
    if value is None:
        return EMPTY_CELL
    tenths = (value * 1000 + Fraction(1, 2)).__floor__()
    return f"{tenths // 10}.{tenths % 10}"


def percent_number(value: Fraction | None) -> float | None:
    if value is None:
        return None
    return float(percent_text(value))


def select_for_scoring(records, profiles, *, misc_novelty: bool = True) -> list:
    """Collapse sampling groups to their best sample; pass singles through."""
    groups: dict = {}
    order: list = []
    for record in records:
        key = record.group_id if record.group_id is not None else (
            "", record.problem_id, record.t, record.sample_index
        )
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(record)
    selected = []
    for key in order:
        group = sorted(groups[key], key=lambda r: r.sample_index)
        if len(group) == 1:
            selected.append(group[0])
            continue
        union = profiles[group[0].problem_id].union
        selected.append(
            metrics.best_of_k_select(group, union, misc_novelty=misc_novelty)
        )
    return selected


def build_report(records, profiles, t_range, *, misc_novelty: bool = True
                 ) -> ScoreReport:
    """Per-state rows over ``t_range`` (inclusive bounds)."""
    t_lo, t_hi = t_range
    rows = []
    cumulative = Fraction(0)
    for t in range(t_lo, t_hi + 1):
        at_t = [r for r in records if r.t == t]
        if not at_t:
            rows.append(ScoreRow(
                t=t, n_instances=0, pass_at_1=None, constraint_following=None,
                convergent=None, divergent=None, neogauge=None,
                cumulative_neogauge=cumulative,
            ))
            continue
        gauge = metrics.neogauge_at(records, t, profiles, misc_novelty=misc_novelty)
        cumulative += gauge
        rows.append(ScoreRow(
            t=t,
            n_instances=len(at_t),
            pass_at_1=metrics.pass_at_1(records, t),
            constraint_following=metrics.constraint_following(records, t),
            convergent=metrics.convergent_at(records, t),
            divergent=metrics.divergent_at(
                records, t, profiles, misc_novelty=misc_novelty
            ),
            neogauge=gauge,
            cumulative_neogauge=cumulative,
        ))
    return ScoreReport(tuple(rows))


def _row_cells(row: ScoreRow) -> list[str]:
    return [
        str(row.t),
        str(row.n_instances),
        percent_text(row.pass_at_1),
        percent_text(row.constraint_following),
        percent_text(row.convergent),
        percent_text(row.divergent),
        percent_text(row.neogauge),
        percent_text(row.cumulative_neogauge),
    ]


def report_to_csv(report: ScoreReport) -> str:
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for row in report.rows:
        out.write(",".join(_row_cells(row)) + "\n")
    return out.getvalue()


def report_to_json(report: ScoreReport) -> dict:
    return {
        "rows": [
            {
                "t": row.t,
                "n_instances": row.n_instances,
                "pass_at_1": percent_number(row.pass_at_1),
                "constraint_following": percent_number(row.constraint_following),
                "convergent": percent_number(row.convergent),
                "divergent": percent_number(row.divergent),
                "neogauge": percent_number(row.neogauge),
                "cumulative_neogauge": percent_number(row.cumulative_neogauge),
            }
            for row in report.rows
        ]
    }


def report_to_markdown(report: ScoreReport) -> str:
    headers = CSV_HEADER.split(",")
    lines = [
        "| " + " | ".join(headers) + " |",
        "| " + " | ".join("---" for _ in headers) + " |",
    ]
    for row in report.rows:
        lines.append("| " + " | ".join(_row_cells(row)) + " |")
    return "\n".join(lines) + "\n"


def human_baseline_rows(profiles, constraint_states, t_range, *,
                        misc_novelty: bool = True) -> str:
    """CSV of the human yardstick: per-state convergent, constant divergent."""
    t_lo, t_hi = t_range
    divergent = metrics.human_divergent(profiles, misc_novelty=misc_novelty)
    out = io.StringIO()
    out.write(HUMAN_CSV_HEADER + "\n")
    for t in range(t_lo, t_hi + 1):
        instances = [
            s for s in filter_state(constraint_states, t) if s.problem_id in profiles
        ]
        try:
            convergent = percent_text(
                metrics.human_convergent(profiles, instances, t)
            )
        except EmptyState:
            convergent = EMPTY_CELL
        out.write(
            f"{t},{len(instances)},{convergent},{percent_text(divergent)}\n"
        )
    return out.getvalue()


def _parse_cell(cell: str) -> float | None:
    if cell == EMPTY_CELL:
        return None
    return float(cell)


def validate_emitted_csv(csv_text: str) -> None:
    """Re-check an emitted report from its own bytes.

    Raises :class:`InvariantViolation` when any row breaks dominance
    (joint score above either factor) or state 0 shows imperfect following.
    """
    lines = [line for line in csv_text.splitlines() if line]
    if not lines or lines[0] != CSV_HEADER:
        raise InvariantViolation("emitted CSV is missing the canonical header")
    problems = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != len(CSV_HEADER.split(",")):
            raise InvariantViolation(f"malformed row: {line!r}")
        t = int(cells[0])
        following = _parse_cell(cells[3])
        convergent = _parse_cell(cells[4])
        divergent = _parse_cell(cells[5])
        neogauge = _parse_cell(cells[6])
        if neogauge is not None:
            if convergent is None or divergent is None:
                problems.append(f"t={t}: joint score present without factors")
            elif neogauge > min(convergent, divergent):
                problems.append(
                    f"t={t}: neogauge {neogauge} exceeds "
                    f"min(convergent {convergent}, divergent {divergent})"
                )
        if t == 0 and following is not None and following != 100.0:
            problems.append(f"t=0: constraint_following is {following}, not 100.0")
    if problems:
        raise InvariantViolation("; ".join(problems))
