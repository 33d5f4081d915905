"""Pull a penalty program out of an assistant reply."""

from __future__ import annotations

import re

from ..penalty import DslError, PenaltySource, ProgramError, parse_program
from ..penalty.program import PenaltyProgram

_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


class ExtractionError(ValueError):
    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


def first_code_block(text: str) -> str:
    m = _FENCE.search(text)
    if m is None:
        raise ExtractionError("no code block", "the reply contains no fenced code block")
    return m.group(1)


def extract_program(text: str) -> PenaltyProgram:
    block = first_code_block(text)
    try:
        return parse_program(block)
    except ProgramError as exc:
        msg = str(exc)
        kind = "duplicate definition" if msg.startswith("duplicate") else "missing function"
        raise ExtractionError(kind, msg) from None
    except DslError as exc:
        raise ExtractionError("invalid expression", str(exc)) from None


def extract_penalty_program(text: str) -> tuple[PenaltySource, PenaltySource]:
    """Return the (voltage, branch) sources from the first fenced block of ``text``."""
    prog = extract_program(text)
    return prog.voltage.source, prog.branch.source
