"""Per-round record of one design / train / test cycle."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .environment import TestRecord

GOOD = "good"
BAD = "bad"


def label_round(test: TestRecord, threshold: int) -> str:
    """``bad`` iff total violation times strictly exceed ``threshold``."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    total = test.voltage_violation_times + test.branch_violation_times
    return BAD if total > threshold else GOOD


@dataclass
class RoundReport:
    round: int
    program_text: str  # canonical DSL text installed for training
    raw_response: str
    label: str
    converged_reward: float
    test: TestRecord
    threshold: int
    verification: dict = field(default_factory=dict)
    attempts: int = 1
    training_summary: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.label not in (GOOD, BAD):
            raise ValueError(f"label must be {GOOD!r} or {BAD!r}")

    def label_is_consistent(self) -> bool:
        return self.label == label_round(self.test, self.threshold)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["test"] = self.test.to_dict()
        return d
