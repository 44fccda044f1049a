from __future__ import annotations

import math
from dataclasses import dataclass, field

NA = float("nan")


@dataclass
class MetricsReport:
    """Outcome counts of one run; every requested session ends up in exactly one bucket."""

    requested: int = 0
    accepted_valid: int = 0
    accepted_corrupted: int = 0
    failed: int = 0
    delays: list = field(default_factory=list)
    messages_sent: int = 0
    bytes_sent: int = 0
    safety_violations: int = 0

    def check(self) -> None:
        if self.accepted_valid + self.accepted_corrupted + self.failed != self.requested:
            raise AssertionError(f"session accounting broken: {self}")
        if any(d < 0 for d in self.delays):
            raise AssertionError(f"negative delay in {self.delays}")


@dataclass(frozen=True)
class Rates:
    valid_rate: float
    corrupted_rate: float
    mean_delay: float

    @property
    def available(self) -> bool:
        return not math.isnan(self.valid_rate)


def compute_rates(report: MetricsReport) -> Rates:
    """Acceptance rates over requested sessions; mean delay over accepted ones only.

    NaN marks a value that is not available (nothing requested, or nothing
    accepted for the delay).
    """
    if report.requested == 0:
        return Rates(NA, NA, NA)
    mean_delay = math.fsum(report.delays) / len(report.delays) if report.delays else NA
    return Rates(report.accepted_valid / report.requested,
                 report.accepted_corrupted / report.requested, mean_delay)
