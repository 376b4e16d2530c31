"""Sandboxed solution judging.

Each test runs the candidate program in its own process group, in a scratch
working directory, under resource limits (wall clock, address space, stdout
volume).  When the harness itself runs as root, the child additionally drops
to an unprivileged user before exec, and the scratch layout is arranged so
the only writable location is the per-test working directory — relative-path
escapes land in a non-writable parent.  The child gets a minimal environment,
so harness credentials are never visible to judged code.

This is process isolation, not a security boundary against a determined
adversary; see the README for the exact guarantees.
"""

from __future__ import annotations

import ast
import logging
import os
import re
import signal
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .types import SourceText, TestExample

log = logging.getLogger(__name__)

_IS_POSIX = os.name == "posix"


class SandboxError(Exception):
    pass


class NoCodeFound(SandboxError):
    """No parseable program defining solve() could be extracted."""


class SandboxSetupError(SandboxError):
    """The harness failed to stand the sandbox up (not the program's fault)."""


class TestStatus(str, Enum):
    PASS = "pass"
    WRONG_ANSWER = "wrong_answer"
    RUNTIME_ERROR = "runtime_error"
    TIMEOUT = "timeout"
    OUTPUT_OVERFLOW = "output_overflow"


@dataclass(frozen=True)
class ResourceLimits:
    """Per-test budget for judged programs."""

    wall_time_per_test: float = 10.0
    memory_bytes: int = 512 * 1024 * 1024
    stdout_cap_bytes: int = 1024 * 1024

    def __post_init__(self) -> None:
        if self.wall_time_per_test <= 0:
            raise ValueError("wall_time_per_test must be positive")
        if self.memory_bytes <= 0 or self.stdout_cap_bytes <= 0:
            raise ValueError("limits must be positive")


@dataclass(frozen=True)
class TestOutcome:
    status: TestStatus
    actual_output: str
    duration: float


_FENCE_RE = re.compile(r"```[ \t]*[A-Za-z0-9_+-]*[ \t]*\r?\n(.*?)```", re.DOTALL)


def _defines_solve(tree: ast.Module) -> bool:
    return any(
        isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef))
        and node.name == "solve"
        for node in tree.body
    )


def _is_solve_call(node: ast.expr) -> bool:
    return (
        isinstance(node, ast.Call)
        and isinstance(node.func, ast.Name)
        and node.func.id == "solve"
    )


def _calls_solve_at_top(stmt: ast.stmt) -> bool:
    if isinstance(stmt, ast.Expr) and _is_solve_call(stmt.value):
        return True
    if isinstance(stmt, (ast.Assign, ast.AnnAssign)) and stmt.value is not None:
        if _is_solve_call(stmt.value):
            return True
    if isinstance(stmt, ast.If):
        # the "__main__" guard idiom would double-run solve() under the judge
        test = stmt.test
        is_main_guard = (
            isinstance(test, ast.Compare)
            and isinstance(test.left, ast.Name)
            and test.left.id == "__name__"
        )
        if is_main_guard and any(
            _is_solve_call(inner.value)
            for inner in stmt.body
            if isinstance(inner, ast.Expr)
        ):
            return True
    return False


def _strip_top_level_calls(source: str, tree: ast.Module) -> str:
    doomed = [stmt for stmt in tree.body if _calls_solve_at_top(stmt)]
    if not doomed:
        return source
    kept_lines = set()
    for stmt in tree.body:
        if stmt not in doomed:
            kept_lines.update(range(stmt.lineno, stmt.end_lineno + 1))
    lines = source.splitlines(keepends=True)
    out = []
    for number, line in enumerate(lines, start=1):
        in_doomed = any(s.lineno <= number <= s.end_lineno for s in doomed)
        if in_doomed and number not in kept_lines:
            log.info("extract_code: stripped top-level solve() call at line %d", number)
            continue
        out.append(line)
    stripped = "".join(out)
    ast.parse(stripped)  # line surgery must never corrupt the program
    return stripped


def extract_code(response: str) -> SourceText:
    """Pull the program out of a model reply.

    Preference order: the first fenced code block, then the whole reply.
    Whichever candidate first parses *and* defines a ``solve`` function wins;
    top-level calls to ``solve()`` are stripped (the judge appends its own).
    """
    candidates = []
    match = _FENCE_RE.search(response)
    if match:
        candidates.append(match.group(1))
    candidates.append(response)
    for candidate in candidates:
        try:
            tree = ast.parse(candidate)
        except SyntaxError:
            continue
        if _defines_solve(tree):
            return _strip_top_level_calls(candidate, tree)
    raise NoCodeFound("reply contains no parseable program defining solve()")


def normalize_output(raw: str) -> str:
    """Comparison form of program output.

    Line endings are unified to ``\\n``, every line is right-stripped, and
    trailing blank lines are dropped.
    """
    lines = [line.rstrip() for line in raw.replace("\r\n", "\n").replace("\r", "\n").split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines)


def _nobody_ids() -> tuple[int, int]:
    try:
        import pwd

        entry = pwd.getpwnam("nobody")
        return entry.pw_uid, entry.pw_gid
    except (ImportError, KeyError):
        return 65534, 65534


def _make_preexec(drop_privileges: bool):
    """The between-fork-and-exec step: at most the privilege drop.

    Resource limits are deliberately NOT applied here.  The forked child
    still shares the parent's full address space until exec, and the parent
    (a long-lived, multi-threaded harness) can easily exceed the judged
    program's memory budget; clamping RLIMIT_AS below current usage makes
    any further allocation in this window — including the interpreter
    running the clamp itself — liable to crash the child before exec.
    The limits are applied by ``_BOOTSTRAP`` inside the fresh interpreter.
    """
    if not drop_privileges:
        return None
    uid, gid = _nobody_ids()

    def preexec() -> None:
        os.setgroups([])
        os.setgid(gid)
        os.setuid(uid)

    return preexec


# Runs as ``python -c`` in the judged interpreter: applies the memory and
# CPU budgets while the process is still tiny, then hands over to the
# program with a conventional argv.
_BOOTSTRAP = """\
import runpy, sys
try:
    import resource
except ImportError:
    pass
else:
    mem, cpu = int(sys.argv[2]), int(sys.argv[3])
    resource.setrlimit(resource.RLIMIT_AS, (mem, mem))
    resource.setrlimit(resource.RLIMIT_CPU, (cpu, cpu + 1))
sys.argv = [sys.argv[1]]
runpy.run_path(sys.argv[0], run_name="__main__")
"""


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass


class _CappedReader(threading.Thread):
    """Drain a pipe up to a byte cap; kill the process group past it."""

    def __init__(self, stream, cap: int, proc: subprocess.Popen):
        super().__init__(daemon=True)
        self.stream = stream
        self.cap = cap
        self.proc = proc
        self.data = bytearray()
        self.overflowed = False

    def run(self) -> None:
        try:
            while True:
                chunk = self.stream.read(65536)
                if not chunk:
                    return
                if len(self.data) < self.cap:
                    self.data.extend(chunk[: self.cap - len(self.data) + 1])
                if len(self.data) > self.cap:
                    self.overflowed = True
                    _kill_group(self.proc)
                    return
        except (OSError, ValueError):
            return
        finally:
            try:
                self.stream.close()
            except OSError:
                pass


def _feed_stdin(proc: subprocess.Popen, data: bytes) -> None:
    try:
        proc.stdin.write(data)
        proc.stdin.close()
    except (BrokenPipeError, OSError):
        pass


# Overridable in tests to simulate a broken interpreter path.
_PYTHON = sys.executable


def _run_one(
    program: Path, work_dir: Path, test: TestExample, limits: ResourceLimits,
    drop_privileges: bool,
) -> TestOutcome:
    started = time.monotonic()
    env = {"PATH": os.defpath, "LANG": "C.UTF-8", "LC_ALL": "C.UTF-8"}
    cpu_seconds = max(1, int(limits.wall_time_per_test) + 1)
    try:
        proc = subprocess.Popen(
            [_PYTHON, "-u", "-c", _BOOTSTRAP, str(program),
             str(limits.memory_bytes), str(cpu_seconds)],
            cwd=str(work_dir),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            env=env,
            start_new_session=True,
            preexec_fn=_make_preexec(drop_privileges) if _IS_POSIX else None,
        )
    except OSError as err:
        raise SandboxSetupError(f"could not start judged process: {err}") from err

    feeder = threading.Thread(
        target=_feed_stdin, args=(proc, test.input.encode()), daemon=True
    )
    out_reader = _CappedReader(proc.stdout, limits.stdout_cap_bytes, proc)
    err_reader = _CappedReader(proc.stderr, 64 * 1024, proc)
    for thread in (feeder, out_reader, err_reader):
        thread.start()

    timed_out = False
    try:
        returncode = proc.wait(timeout=limits.wall_time_per_test)
    except subprocess.TimeoutExpired:
        timed_out = True
        _kill_group(proc)
        returncode = proc.wait()
    for thread in (feeder, out_reader, err_reader):
        thread.join(timeout=1.0)
    duration = time.monotonic() - started
    actual = out_reader.data[: limits.stdout_cap_bytes].decode("utf-8", "replace")

    if out_reader.overflowed:
        status = TestStatus.OUTPUT_OVERFLOW
    elif timed_out:
        status = TestStatus.TIMEOUT
    elif returncode != 0:
        status = TestStatus.RUNTIME_ERROR
        log.debug("judged program exited %d: %s", returncode,
                  err_reader.data[:500].decode("utf-8", "replace"))
    elif normalize_output(actual) == normalize_output(test.expected_output):
        status = TestStatus.PASS
    else:
        status = TestStatus.WRONG_ANSWER
    return TestOutcome(status=status, actual_output=actual, duration=duration)


def judge(
    source: SourceText,
    tests,
    limits: ResourceLimits | None = None,
    *,
    fail_fast: bool = True,
    drop_privileges: bool | None = None,
) -> tuple[bool, list[TestOutcome]]:
    """Run ``source`` against every test; True only if all of them pass.

    ``drop_privileges`` defaults to "whenever the harness runs as root".
    """
    limits = limits or ResourceLimits()
    if drop_privileges is None:
        drop_privileges = _IS_POSIX and hasattr(os, "geteuid") and os.geteuid() == 0
    program_text = source.rstrip() + "\n\nsolve()\n"
    outcomes: list[TestOutcome] = []
    try:
        scratch = tempfile.TemporaryDirectory(prefix="judge-")
    except OSError as err:
        raise SandboxSetupError(f"could not create scratch dir: {err}") from err
    with scratch:
        run_dir = Path(scratch.name)
        program = run_dir / "program.py"
        work_dir = run_dir / "work"
        try:
            program.write_text(program_text)
            work_dir.mkdir()
            if drop_privileges:
                # child may read the program and write only inside work/;
                # "../" from its cwd lands in run_dir, which it cannot write.
                os.chmod(run_dir, 0o755)
                os.chmod(program, 0o644)
                os.chmod(work_dir, 0o777)
        except OSError as err:
            raise SandboxSetupError(f"could not populate scratch dir: {err}") from err
        all_passed = True
        for test in tests:
            outcome = _run_one(program, work_dir, test, limits, drop_privileges)
            outcomes.append(outcome)
            if outcome.status is not TestStatus.PASS:
                all_passed = False
                if fail_fast:
                    break
    return all_passed, outcomes
