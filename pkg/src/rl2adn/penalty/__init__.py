from .ast import Node
from .evaluate import DOMAIN_FAULT, CompiledExpression, evaluate, evaluate_array
from .parser import DslError, PenaltySource, parse, parse_definitions, pretty, tokenize
from .program import (
    BRANCH_FN,
    VOLTAGE_FN,
    PenaltyFunction,
    PenaltyProgram,
    ProgramError,
    parse_program,
    zero_program,
)
from .verify import CheckResult, VerificationReport, self_verify

GRAMMAR_TEXT = """\
fn calculate_voltage_penalty(v) = <expression in v>
fn calculate_branch_power_penalty(s) = <expression in s>

Expressions may use: numbers, the single argument, + - * /, unary -,
power with a numeric exponent (x^2), comparisons (< <= > >= == !=),
and / or / not, conditionals "if <condition> then <expr> else <expr>",
and the functions abs, min, max, exp, log, sqrt, tanh, clamp(x, lo, hi).
Lines starting with # are comments. No other names, statements, loops or
assignments are allowed."""

__all__ = [
    "BRANCH_FN",
    "CheckResult",
    "CompiledExpression",
    "DOMAIN_FAULT",
    "DslError",
    "GRAMMAR_TEXT",
    "Node",
    "PenaltyFunction",
    "PenaltyProgram",
    "PenaltySource",
    "ProgramError",
    "VOLTAGE_FN",
    "VerificationReport",
    "evaluate",
    "evaluate_array",
    "parse",
    "parse_definitions",
    "parse_program",
    "pretty",
    "self_verify",
    "tokenize",
    "zero_program",
]
