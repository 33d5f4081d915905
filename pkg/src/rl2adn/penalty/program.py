"""Penalty programs: the voltage and branch-power functions used in the reward."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ast import Node
from .evaluate import CompiledExpression
from .parser import PenaltySource, parse_definitions, pretty

VOLTAGE_FN = "calculate_voltage_penalty"
BRANCH_FN = "calculate_branch_power_penalty"
REQUIRED_FUNCTIONS = (VOLTAGE_FN, BRANCH_FN)


class ProgramError(ValueError):
    """A program text is missing a required function or defines one twice."""


@dataclass(frozen=True)
class PenaltyFunction:
    source: PenaltySource
    ast: Node
    _compiled: CompiledExpression = field(repr=False, compare=False, default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self._compiled is None:
            object.__setattr__(self, "_compiled", CompiledExpression(self.ast))

    @property
    def name(self) -> str:
        return self.source.name

    def __call__(self, xs) -> np.ndarray:
        return self._compiled(xs)

    def canonical(self) -> str:
        return f"fn {self.source.name}({self.source.arg}) = {pretty(self.ast)}"


@dataclass(frozen=True)
class PenaltyProgram:
    voltage: PenaltyFunction
    branch: PenaltyFunction
    text: str

    def voltage_penalty(self, v) -> np.ndarray:
        return self.voltage(v)

    def branch_penalty(self, s) -> np.ndarray:
        return self.branch(s)

    def canonical_text(self) -> str:
        return f"{self.voltage.canonical()}\n{self.branch.canonical()}\n"


def select_functions(
    defs: list[tuple[PenaltySource, Node]],
) -> dict[str, tuple[PenaltySource, Node]]:
    found: dict[str, tuple[PenaltySource, Node]] = {}
    for src, node in defs:
        if src.name in found:
            raise ProgramError(f"duplicate definition of {src.name}")
        found[src.name] = (src, node)
    missing = [name for name in REQUIRED_FUNCTIONS if name not in found]
    if missing:
        raise ProgramError(f"missing function definition: {', '.join(missing)}")
    return found


def parse_program(text: str) -> PenaltyProgram:
    """Parse a program file holding both required function definitions.

    Raises :class:`~rl2adn.penalty.parser.DslError` on malformed expressions
    and :class:`ProgramError` on missing or duplicated functions.
    """
    found = select_functions(parse_definitions(text))
    v_src, v_ast = found[VOLTAGE_FN]
    b_src, b_ast = found[BRANCH_FN]
    return PenaltyProgram(PenaltyFunction(v_src, v_ast), PenaltyFunction(b_src, b_ast), text)


def zero_program() -> PenaltyProgram:
    return parse_program(f"fn {VOLTAGE_FN}(v) = 0\nfn {BRANCH_FN}(s) = 0\n")
