"""System and reinforcement prompt templates.

Builders are pure functions of their inputs: identical arguments produce
byte-identical text.
"""

from __future__ import annotations

from ..devices import DeviceFleet
from ..grid import NetworkCase
from ..penalty import BRANCH_FN, VOLTAGE_FN
from ..penalty.parser import format_number

SYSTEM_SECTIONS = (
    "### Role description",
    "### Environment description",
    "### Task description",
    "### Output format",
    "### Penalty function requirements",
    "### Rules",
)

REINFORCEMENT_SECTIONS = (
    "### Current penalty functions",
    "### Functions evaluation",
    "### Training results",
    "### Test results",
    "### Redesign suggestions",
)

REDESIGN_STEPS = (
    "1. Diagnose: decide from the test results whether voltage or branch-power violations dominate, "
    "and whether the operating cost moved noticeably.",
    "2. Pick a pattern: choose the shape of each function outside the limits "
    "(for example linear, quadratic or a piecewise combination) and keep it at zero inside the limits.",
    "3. Set magnitudes: choose coefficients so that the penalty of a typical violation is comparable "
    "to, or larger than, the per-step operating cost.",
    "4. Balance: if violations are gone but cost rose sharply, soften the penalties; if violations "
    "remain, strengthen the function that governs them. Then write the two functions.",
)


class PromptError(ValueError):
    pass


def describe_case(case: NetworkCase) -> str:
    name = case.name or "distribution feeder"
    return (
        f"{name}: {case.n_bus} buses and {case.n_branch} branches, radial, base power "
        f"{format_number(case.base_mva)} MVA. Bus 1 connects to the upper grid."
    )


def build_system_prompt(
    case_summary: str,
    fleet_summary: str,
    v_min: float | None,
    v_max: float | None,
    s_max: float | None,
    grammar: str | None,
    threshold: int,
) -> str:
    if v_min is None or v_max is None or s_max is None:
        raise PromptError("voltage limits and branch capacity are required")
    if not grammar:
        raise PromptError("DSL grammar text is required")
    lo, hi, cap = repr(float(v_min)), repr(float(v_max)), repr(float(s_max))
    parts = [
        SYSTEM_SECTIONS[0],
        "You are an expert in power distribution operation and in reward design for reinforcement "
        "learning. You write penalty functions that keep a learned energy-management policy safe.",
        "",
        SYSTEM_SECTIONS[1],
        f"Network: {case_summary}",
        "Controllable devices:",
        fleet_summary,
        "Every 15 minutes the agent observes the power, load, voltage and state of charge at every bus "
        "and sets DG active/reactive power, BESS power and PV reactive power. The reward of a step is "
        "the negative operating cost (DG fuel, BESS cycling, grid purchase) minus the average over buses "
        "of the voltage penalty and the average over branches of the branch-power penalty.",
        f"Operational safety limits: bus voltage magnitude must stay within [{lo}, {hi}] p.u.; "
        f"branch apparent power must not exceed {cap} MVA.",
        "",
        SYSTEM_SECTIONS[2],
        "Design two penalty functions: one of a single bus voltage magnitude v (p.u.) and one of a "
        "single branch apparent power s (MVA). They are evaluated at every bus and branch after each "
        "power-flow solution and subtracted from the reward, so the agent learns to respect the limits "
        "while keeping operating cost low.",
        "",
        SYSTEM_SECTIONS[3],
        f"Return exactly one fenced code block defining {VOLTAGE_FN} and {BRANCH_FN} in this "
        "expression language:",
        "```",
        grammar,
        "```",
        "",
        SYSTEM_SECTIONS[4],
        f"- Both functions return 0 (or practically 0) when the value is inside its limits "
        f"([{lo}, {hi}] p.u. for voltage, at most {cap} MVA for branch power).",
        "- Both functions are nonnegative everywhere.",
        "- Both functions grow as the violation becomes more severe.",
        "- Keep the pattern simple enough for a reinforcement learning agent to follow.",
        "",
        SYSTEM_SECTIONS[5],
        "- Use only the constructs listed in the output format; no other names or statements.",
        "- Put both definitions in a single fenced block; text outside the block is ignored.",
        f"- A design is labelled bad when the total number of violations on the typical test day "
        f"exceeds {threshold}; otherwise it is labelled good.",
        "- When given feedback, revise the previous functions rather than starting from nothing.",
    ]
    return "\n".join(parts) + "\n"


def system_prompt_for(case: NetworkCase, fleet: DeviceFleet, grammar: str, threshold: int) -> str:
    caps = case.capacities
    s_max = float(caps.min()) if caps.size else None
    return build_system_prompt(describe_case(case), fleet.summary(), case.v_min, case.v_max, s_max, grammar, threshold)


def _sci(x: float) -> str:
    return f"{x:.4g}" if x == 0 or 1e-2 <= abs(x) < 1e4 else f"{x:.3e}"


def evaluation_sentence(label: str, violation_times: int, threshold: int) -> str:
    if label == "bad":
        return (
            f"The current penalty functions are labelled bad: the typical day shows {violation_times} "
            f"violations, more than the threshold of {threshold}."
        )
    return (
        f"The current penalty functions are labelled good: the typical day shows {violation_times} "
        f"violations, within the threshold of {threshold}."
    )


def build_reinforcement_prompt(report) -> str:
    """Feedback message for one finished round (a :class:`~rl2adn.report.RoundReport`)."""
    for attr in ("program_text", "label", "converged_reward", "test", "threshold"):
        if getattr(report, attr, None) is None:
            raise PromptError(f"round report lacks {attr}")
    t = report.test
    total = t.voltage_violation_times + t.branch_violation_times
    parts = [
        REINFORCEMENT_SECTIONS[0],
        "```",
        report.program_text.rstrip("\n"),
        "```",
        "",
        REINFORCEMENT_SECTIONS[1],
        evaluation_sentence(report.label, total, report.threshold),
        "",
        REINFORCEMENT_SECTIONS[2],
        f"Converged reward (mean final reward over the last training episodes): {_sci(report.converged_reward)}.",
        "",
        REINFORCEMENT_SECTIONS[3],
        f"- operational cost: {_sci(t.cost)}",
        f"- voltage violation rate: {_sci(t.vvr)}",
        f"- branch power violation rate: {_sci(t.bvr)}",
        f"- voltage violation times: {t.voltage_violation_times}",
        f"- branch power violation times: {t.branch_violation_times}",
        "",
        REINFORCEMENT_SECTIONS[4],
        *REDESIGN_STEPS,
        "Return the revised functions in the same output format.",
    ]
    return "\n".join(parts) + "\n"


def regeneration_message(diagnostic: str) -> str:
    return (
        f"The penalty functions could not be used: {diagnostic}\n"
        "Please regenerate new penalty functions that follow the output format and the requirements."
    )
