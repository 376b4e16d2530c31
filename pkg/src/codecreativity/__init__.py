"""Constraint-denial creativity harness for code-generating models.

The package elicits progressively more inventive solutions by denying, one
per iteration, a technique the model just used; judges the solutions in a
sandbox; and scores convergent (correct under constraints) and divergent
(novel relative to human solutions) creativity exactly, composing the two
per instance.
"""

from __future__ import annotations

from .client import (
    AuditLog,
    ChatClient,
    HttpChatClient,
    ModelError,
    ProviderConfig,
    RateLimiter,
    ScriptExhausted,
    Session,
    StubChatClient,
)
from .denial import (
    AugmentationInterrupted,
    AugmentationTrace,
    IterationRecord,
    augment_problem,
    render_problem,
    sample_constraint,
    states_from_trace,
    validate_trace,
)
from .detect import (
    DropTally,
    EmptyDetection,
    ParseError,
    detect_static,
    detect_with_model,
    parse_detection_response,
)
from .metrics import (
    EmptyState,
    HumanTechniqueProfile,
    MDeficient,
    best_of_k_select,
    constraint_following,
    convergent_at,
    cumulative_neogauge,
    divergent_at,
    human_convergent,
    human_divergent,
    instance_convergent,
    instance_divergent,
    neogauge_at,
    pass_at_1,
)
from .sandbox import (
    NoCodeFound,
    ResourceLimits,
    SandboxError,
    SandboxSetupError,
    TestOutcome,
    TestStatus,
    extract_code,
    judge,
    normalize_output,
)
from .taxonomy import TECHNIQUES, Technique, TechniqueSet, canonicalize
from .types import (
    ConstraintState,
    EvaluationRecord,
    Problem,
    ScoreReport,
    ScoreRow,
    Solution,
    TestExample,
)

__version__ = "0.1.0"
