"""Closed taxonomy of atomic programming techniques.

Every technique the harness can detect, deny, or score lives in this closed
list.  Each member carries two spellings: ``canonical_name`` (clean, internal)
and ``prompt_string`` (the exact spelling used by the detection prompt's
closed list and by all interchange files — including its historical typos,
which are load-bearing for prompt fidelity).
"""

from __future__ import annotations

import re
from dataclasses import dataclass


@dataclass(frozen=True)
class Technique:
    """One atomic programming technique.

    ``canonical_name`` is the cleaned identifier used throughout the code;
    ``prompt_string`` is the verbatim spelling used in prompts and data files.
    """

    canonical_name: str
    prompt_string: str

    def __repr__(self) -> str:  # keep trace/test output readable
        return f"Technique({self.canonical_name!r})"


def _t(canonical: str, prompt: str | None = None) -> Technique:
    return Technique(canonical, prompt if prompt is not None else canonical)


#: All techniques, in the fixed order of the detection prompt's closed list
#: (first occurrence wins; the prompt list repeats "graph traversal" once).
TECHNIQUES: tuple[Technique, ...] = (
    _t("if statement"),
    _t("for loop"),
    _t("while loop"),
    _t("break statement"),
    _t("continue statement"),
    _t("pass statement"),
    _t("match statement"),
    _t("recursion"),
    _t("stack"),
    _t("queue"),
    _t("tuple"),
    _t("set"),
    _t("dictionary"),
    _t("linked list"),
    _t("tree"),
    _t("graph"),
    _t("graph traversal"),
    _t("two pointers"),
    _t("sliding window"),
    _t("matrix operation"),
    _t("hashmap"),
    _t("depth first search"),
    _t("breadth first search", "width first search"),
    _t("back tracking"),
    _t("divide and conquer", "dived & conquer"),
    _t("kadane's algorithm", "Kadanes algorithm"),
    _t("binary search"),
    _t("heap"),
    _t("dynamic programming"),
    _t("greedy algorithm"),
    _t("misc"),
    _t("minimax"),
    _t("topological sort"),
    _t("sorting"),
)

#: The detection prompt's closed list, verbatim: 35 entries, one duplicate.
PROMPT_LIST_STRINGS: tuple[str, ...] = tuple(
    t.prompt_string for t in TECHNIQUES
) + ("graph traversal",)

#: Unordered-set alias used in signatures throughout the package.
TechniqueSet = frozenset

_INDEX: dict[Technique, int] = {t: i for i, t in enumerate(TECHNIQUES)}

_APOSTROPHES = "'’`´"
_SEPARATORS_RE = re.compile(r"[-_/\\.,:;!?()\[\]{}\"|+*=<>~@#$%^–—]")
_WS_RE = re.compile(r"\s+")


def _normalize(raw: str) -> str:
    s = raw.lower().replace("&", " and ")
    for ch in _APOSTROPHES:
        s = s.replace(ch, "")
    s = _SEPARATORS_RE.sub(" ", s)
    return _WS_RE.sub(" ", s).strip()


def _build_lookup() -> dict[str, Technique]:
    table: dict[str, Technique] = {}
    for tech in TECHNIQUES:
        for key in (_normalize(tech.canonical_name), _normalize(tech.prompt_string)):
            existing = table.get(key)
            if existing is not None and existing != tech:
                raise ValueError(f"normalized name collision: {key!r}")
            table[key] = tech
    return table


_LOOKUP = _build_lookup()


def canonicalize(raw: str) -> Technique | None:
    """Map a free-form technique name onto the taxonomy, or None.

    Matching is tolerant of case, surrounding whitespace, punctuation and
    either spelling (canonical or prompt).  Unknown names return ``None``;
    nothing is ever guessed.
    """
    return _LOOKUP.get(_normalize(raw))


def by_canonical(name: str) -> Technique:
    """Look up a technique by its exact canonical name (KeyError if absent)."""
    for tech in TECHNIQUES:
        if tech.canonical_name == name:
            return tech
    raise KeyError(name)


def taxonomy_index(technique: Technique) -> int:
    """Position of ``technique`` in the fixed taxonomy order."""
    return _INDEX[technique]


def sort_techniques(techniques) -> list[Technique]:
    """Deterministic ordering (taxonomy order) for serializing sets."""
    return sorted(techniques, key=_INDEX.__getitem__)


MISC: Technique = by_canonical("misc")
