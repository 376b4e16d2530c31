"""System prompts used for solving and for technique detection.

These texts are load-bearing verbatim: evaluation results are only comparable
across runs if the exact wording (including the closed technique list and its
quirks) is preserved byte for byte.  Do not reflow or "fix" them.
"""

from __future__ import annotations

from .taxonomy import PROMPT_LIST_STRINGS

SOLVER_SYSTEM_PROMPT = (
    "You are a Python code generator, only return the import and python "
    "function. Input will be an very detailed description of task, output "
    "will be the code.\n"
    "The input will be from command line, and the output will be printed to "
    "the console as well. Your result will be solely a function named "
    "solve(), and do not call this function in your code.\n"
    "Make sure the code is free of bug and can pass the test cases provided. "
    "You can use any library you want. The test cases are provided in the "
    "code. Do not call the solve() function in your code."
)

# repr() of a list of str reproduces the exact ['a', 'b', ...] rendering the
# closed list is published in.
_CLOSED_LIST = repr(list(PROMPT_LIST_STRINGS))

DETECTION_SYSTEM_PROMPT = (
    "You are a code reviewer. Detect all the programming techniques from the "
    "input and return a list of programming techniques. Only select the "
    f"techniques from this list: {_CLOSED_LIST}\n"
    "Your output should look like this:\n"
    "- technique 1\n"
    "- technique 2\n"
    "- technique 3\n"
    "- ..."
)
