"""Technique detection: syntactic rule engine and model-backed reviewer."""

from .callgraph import has_call_cycle
from .llm import DropTally, EmptyDetection, detect_with_model, parse_detection_response
from .static import DetectionRule, ParseError, default_rules, detect_static, load_rules

__all__ = [
    "DetectionRule",
    "DropTally",
    "EmptyDetection",
    "ParseError",
    "default_rules",
    "detect_static",
    "detect_with_model",
    "has_call_cycle",
    "load_rules",
    "parse_detection_response",
]
