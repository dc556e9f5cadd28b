# src/designs/base_design.py
from dataclasses import dataclass, field

REJECT = "reject"
ACCEPT = "accept"


@dataclass(frozen=True)
class IterationTrace:
    iteration: int
    n_step: int
    n_curr: int
    t: float
    ate: float
    variance: float
    cp: float = None
    futility: bool = False

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass(frozen=True)
class TrialResult:
    decision: str
    futility_stopped: bool
    final_arm_size: int
    iterations: int
    trace: tuple = field(default_factory=tuple)
    increased: bool = False
    statistic: float = None
    critical_value: float = None

    def __post_init__(self):
        if self.decision not in (REJECT, ACCEPT):
            raise ValueError(f"decision must be {REJECT!r} or {ACCEPT!r}, got {self.decision!r}")
        if self.futility_stopped and self.decision != ACCEPT:
            raise ValueError("a trial stopped for futility must accept the null")

    @property
    def rejected(self):
        return self.decision == REJECT

    def to_dict(self):
        return {
            "decision": self.decision,
            "futility_stopped": self.futility_stopped,
            "final_arm_size": self.final_arm_size,
            "iterations": self.iterations,
            "increased": self.increased,
            "statistic": self.statistic,
            "critical_value": self.critical_value,
            "trace": [step.to_dict() for step in self.trace],
        }

    @classmethod
    def from_dict(cls, data):
        values = dict(data)
        values["trace"] = tuple(IterationTrace(**step) for step in values.get("trace", ()))
        return cls(**values)


def decision_of(test_decision):
    return REJECT if test_decision.reject else ACCEPT


class BaseDesign:
    """A trial design: given a subject source and a random stream, run one
    trial and report its TrialResult."""

    name = "base"

    def __init__(self, design_config):
        self.config = design_config

    def run(self, source, rng):
        raise NotImplementedError

    def describe(self):
        return {"design": self.name, **self.config.to_dict()}
