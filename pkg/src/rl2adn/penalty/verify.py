"""Self-verification of generated penalty programs.

Applicability: the program parses and evaluates to finite values on the probe
grids. Rationality: each function is nonnegative, (near) zero somewhere inside
the limits, and grows as the violation gets more severe.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .parser import DslError
from .program import PenaltyFunction, PenaltyProgram, ProgramError, parse_program

EPS_INSIDE = 1e-6


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    message: str


@dataclass(frozen=True)
class VerificationReport:
    applicability: CheckResult
    rationality: CheckResult
    voltage_probes: list[tuple[float, float]] = field(default_factory=list)
    branch_probes: list[tuple[float, float]] = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return self.applicability.passed and self.rationality.passed

    def to_dict(self) -> dict:
        d = asdict(self)
        d["overall"] = self.overall
        return d

    def summary(self) -> str:
        def line(label, check):
            status = "pass" if check.passed else "fail"
            return f"{label}: {status}" + (f" ({check.message})" if check.message else "")

        return "\n".join(
            [
                line("applicability", self.applicability),
                line("rationality", self.rationality),
                f"overall: {'pass' if self.overall else 'fail'}",
            ]
        )


def voltage_probe_grid() -> np.ndarray:
    return np.round(0.85 + 0.005 * np.arange(61), 10)


def branch_probe_grid(s_max: float) -> np.ndarray:
    return np.round(np.arange(151) * (s_max / 100.0), 12)


def _monotone_outward(values: np.ndarray, label: str) -> list[str]:
    if values.size < 2:
        return [f"no probes {label}"]
    steps = np.diff(values)
    problems = []
    if np.any(steps < 0):
        problems.append(f"decreases as the violation grows {label}")
    if not np.any(steps > 0):
        problems.append(f"does not increase as the violation grows {label}")
    return problems


def _rational(
    values: np.ndarray,
    xs: np.ndarray,
    inside: np.ndarray,
    sides: list[tuple[np.ndarray, str]],
    what: str,
    eps_in: float,
) -> list[str]:
    problems = []
    if np.any(values < 0):
        problems.append(f"{what} penalty is negative at x={xs[np.argmax(values < 0)]:g}")
    if not inside.any() or np.min(values[inside]) > eps_in:
        problems.append(f"{what} penalty is never ~0 inside the limits")
    for order, label in sides:
        problems.extend(f"{what} penalty {p}" for p in _monotone_outward(values[order], label))
    return problems


def self_verify(
    program: PenaltyProgram | str,
    v_min: float,
    v_max: float,
    s_max: float,
    eps_in: float = EPS_INSIDE,
) -> VerificationReport:
    """Probe a program on fixed voltage and branch-power grids."""
    if v_min is None or v_max is None or s_max is None:
        raise ValueError("voltage and branch limits are required")
    if isinstance(program, str):
        try:
            program = parse_program(program)
        except (DslError, ProgramError) as exc:
            fail = CheckResult(False, str(exc))
            return VerificationReport(fail, CheckResult(False, "not evaluated"))

    vx = voltage_probe_grid()
    sx = branch_probe_grid(s_max)
    fv: PenaltyFunction = program.voltage
    fb: PenaltyFunction = program.branch
    vv = fv(vx)
    sv = fb(sx)
    v_table = [(float(x), float(y)) for x, y in zip(vx, vv)]
    b_table = [(float(x), float(y)) for x, y in zip(sx, sv)]

    bad = []
    if not np.all(np.isfinite(vv)):
        bad.append(f"{fv.name} is not finite at v={vx[~np.isfinite(vv)][0]:g}")
    if not np.all(np.isfinite(sv)):
        bad.append(f"{fb.name} is not finite at s={sx[~np.isfinite(sv)][0]:g}")
    if bad:
        return VerificationReport(
            CheckResult(False, "; ".join(bad)), CheckResult(False, "not evaluated"), v_table, b_table
        )
    applicability = CheckResult(True, "")

    tol = 1e-9
    v_inside = (vx >= v_min - tol) & (vx <= v_max + tol)
    below = np.nonzero(vx <= v_min + tol)[0][::-1]
    above = np.nonzero(vx >= v_max - tol)[0]
    problems = _rational(
        vv, vx, v_inside, [(below, "below v_min"), (above, "above v_max")], "voltage", eps_in
    )
    s_inside = sx <= s_max + tol
    s_above = np.nonzero(sx >= s_max - tol)[0]
    problems += _rational(sv, sx, s_inside, [(s_above, "above the branch capacity")], "branch", eps_in)
    rationality = CheckResult(not problems, "; ".join(problems))
    return VerificationReport(applicability, rationality, v_table, b_table)
