"""Model-backed technique detection.

The reviewer model sees the source in a fresh session under the closed-list
detection prompt and answers with bullet lines.  Anything outside the closed
taxonomy is dropped (never guessed) and counted so callers can watch noise
levels.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from ..prompts import DETECTION_SYSTEM_PROMPT
from ..taxonomy import canonicalize

log = logging.getLogger(__name__)


class EmptyDetection(Exception):
    """The reviewer's reply contained no taxonomy technique at all."""


@dataclass
class DropTally:
    """Diagnostics sink for non-taxonomy lines in reviewer replies."""

    dropped: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.dropped)


def parse_detection_response(text: str) -> list[str]:
    """Bullet payloads from a reviewer reply, in reply order.

    Only lines whose first non-blank character is ``-`` carry detections;
    surrounding prose is ignored.
    """
    names = []
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("-"):
            name = stripped.lstrip("-").strip()
            if name:
                names.append(name)
    return names


def detect_with_model(source: str, client, *, tally: DropTally | None = None) -> frozenset:
    """Ask ``client``'s model which techniques ``source`` uses.

    Runs in a fresh session so earlier solving context cannot leak into the
    review.  Raises :class:`EmptyDetection` when no taxonomy technique is
    parsed from the reply.
    """
    reply = client.one_shot(DETECTION_SYSTEM_PROMPT, source)
    found = set()
    dropped = 0
    for name in parse_detection_response(reply):
        technique = canonicalize(name)
        if technique is None:
            dropped += 1
            if tally is not None:
                tally.dropped.append(name)
            log.info("detection: dropped non-taxonomy line %r", name)
        else:
            found.add(technique)
    if dropped:
        log.info("detection: dropped %d non-taxonomy line(s)", dropped)
    if not found:
        raise EmptyDetection("reviewer reply contained no taxonomy techniques")
    return frozenset(found)
