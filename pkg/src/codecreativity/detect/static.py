"""Syntactic technique detection over the target language's parse tree.

The engine gathers whole-file evidence in one pass (node kinds, direct call
names, attribute-call names, import-resolved qualified references, and a few
named predicates) and then fires the declarative rules shipped in
``rules.json``.  Evidence only accumulates, so detection is monotone under
file concatenation: anything detected in a fragment stays detected when more
code is appended.

Semantic techniques (dynamic programming from first principles, two pointers,
graph algorithms written by hand, ...) have no reliable syntactic signature;
apart from a couple of library-call heuristics they are deliberately left to
the model-backed detector.
"""

from __future__ import annotations

import ast
import json
import logging
from dataclasses import dataclass, field
from importlib import resources

from ..taxonomy import MISC, Technique, by_canonical
from .callgraph import has_call_cycle

log = logging.getLogger(__name__)


class ParseError(Exception):
    """The source does not parse under the target language grammar."""


@dataclass(frozen=True)
class DetectionRule:
    """One technique's evidence patterns; any single match fires the rule."""

    technique: Technique
    node_types: tuple[str, ...] = ()
    builtin_calls: tuple[str, ...] = ()
    method_calls: tuple[str, ...] = ()
    qualified_refs: tuple[str, ...] = ()
    qualified_prefixes: tuple[str, ...] = ()
    predicates: tuple[str, ...] = ()

    def matches(self, evidence: "Evidence") -> bool:
        return (
            any(n in evidence.node_types for n in self.node_types)
            or any(n in evidence.builtin_calls for n in self.builtin_calls)
            or any(n in evidence.method_calls for n in self.method_calls)
            or any(q in evidence.qualified_refs for q in self.qualified_refs)
            or any(
                ref.startswith(prefix)
                for prefix in self.qualified_prefixes
                for ref in evidence.qualified_refs
            )
            or any(p in evidence.flags for p in self.predicates)
        )


_KNOWN_PREDICATES = frozenset(
    {"call_graph_cycle", "list_stack_idiom", "comprehension_condition"}
)
_PATTERN_KEYS = (
    "node_types",
    "builtin_calls",
    "method_calls",
    "qualified_refs",
    "qualified_prefixes",
    "predicates",
)


def load_rules(text: str) -> tuple[DetectionRule, ...]:
    """Parse a rule-corpus document into rule objects (strictly validated)."""
    doc = json.loads(text)
    if doc.get("schema_version") != 1:
        raise ValueError(f"unsupported rules schema: {doc.get('schema_version')!r}")
    rules = []
    for raw in doc["rules"]:
        technique = by_canonical(raw["technique"])
        unknown = set(raw) - {"technique", "comment", *_PATTERN_KEYS}
        if unknown:
            raise ValueError(f"unknown rule keys for {raw['technique']}: {unknown}")
        bad_predicates = set(raw.get("predicates", ())) - _KNOWN_PREDICATES
        if bad_predicates:
            raise ValueError(f"unknown predicates: {bad_predicates}")
        rules.append(
            DetectionRule(
                technique=technique,
                **{key: tuple(raw.get(key, ())) for key in _PATTERN_KEYS},
            )
        )
    return tuple(rules)


_DEFAULT_RULES: tuple[DetectionRule, ...] | None = None


def default_rules() -> tuple[DetectionRule, ...]:
    global _DEFAULT_RULES
    if _DEFAULT_RULES is None:
        text = resources.files("codecreativity.detect").joinpath("rules.json").read_text()
        _DEFAULT_RULES = load_rules(text)
    return _DEFAULT_RULES


@dataclass
class Evidence:
    node_types: set = field(default_factory=set)
    builtin_calls: set = field(default_factory=set)
    method_calls: set = field(default_factory=set)
    qualified_refs: set = field(default_factory=set)
    flags: set = field(default_factory=set)


def _import_table(tree: ast.AST) -> dict[str, str]:
    """Local alias -> dotted origin, for every import in the file."""
    table: dict[str, str] = {}
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            for alias in node.names:
                table[alias.asname or alias.name.split(".")[0]] = (
                    alias.name if alias.asname else alias.name.split(".")[0]
                )
        elif isinstance(node, ast.ImportFrom) and node.module and node.level == 0:
            for alias in node.names:
                if alias.name == "*":
                    continue
                table[alias.asname or alias.name] = f"{node.module}.{alias.name}"
    return table


def _qualify(node: ast.AST, table: dict[str, str]) -> str | None:
    """Dotted origin of a Name/Attribute reference, via the import table."""
    parts: list[str] = []
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if not isinstance(node, ast.Name) or node.id not in table:
        return None
    parts.append(table[node.id])
    return ".".join(reversed(parts))


def _collect_evidence(tree: ast.AST) -> Evidence:
    ev = Evidence()
    table = _import_table(tree)
    appended: set[str] = set()
    popped_bare: set[str] = set()
    for node in ast.walk(tree):
        ev.node_types.add(type(node).__name__)
        if isinstance(node, ast.comprehension) and node.ifs:
            ev.flags.add("comprehension_condition")
        if isinstance(node, (ast.Name, ast.Attribute)):
            qualified = _qualify(node, table)
            if qualified is not None:
                ev.qualified_refs.add(qualified)
        if isinstance(node, ast.Call):
            func = node.func
            if isinstance(func, ast.Name):
                ev.builtin_calls.add(func.id)
            elif isinstance(func, ast.Attribute):
                ev.method_calls.add(func.attr)
                if isinstance(func.value, ast.Name):
                    if func.attr == "append":
                        appended.add(func.value.id)
                    elif func.attr == "pop" and not node.args and not node.keywords:
                        popped_bare.add(func.value.id)
    if appended & popped_bare:
        ev.flags.add("list_stack_idiom")
    if has_call_cycle(tree):
        ev.flags.add("call_graph_cycle")
    return ev


def detect_static(
    source: str,
    *,
    rules: tuple[DetectionRule, ...] | None = None,
    empty_as_misc: bool = False,
) -> frozenset:
    """Techniques with syntactic evidence in ``source``.

    Raises :class:`ParseError` for source that does not parse.  An empty
    result can optionally be reported as ``{misc}``.
    """
    try:
        tree = ast.parse(source)
    except SyntaxError as err:
        raise ParseError(str(err)) from err
    evidence = _collect_evidence(tree)
    found = frozenset(
        rule.technique for rule in (rules or default_rules()) if rule.matches(evidence)
    )
    if not found and empty_as_misc:
        return frozenset({MISC})
    return found
