"""Confidence intervals and the interferometer attack test."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from statistics import NormalDist

from scipy.stats import binomtest


def wilson_interval(successes: int, trials: int, confidence_level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Zero successes pin the lower bound to 0 and ``successes == trials`` pins
    the upper bound to 1; elsewhere the bounds are clamped into [0, 1].
    """
    if trials < 1:
        raise ValueError("wilson_interval needs at least one trial")
    if not 0 <= successes <= trials:
        raise ValueError(f"successes must lie in [0, {trials}], got {successes}")
    if not 0.0 < confidence_level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {confidence_level}")
    z = NormalDist().inv_cdf(0.5 + confidence_level / 2.0)
    n = trials
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, min(p, center - half))
    hi = 1.0 if successes == trials else min(1.0, max(p, center + half))
    return lo, hi


class VerdictKind(str, Enum):
    HONEST = "Honest"
    ATTACK_SUSPECTED = "AttackSuspected"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    p_value: float

    @property
    def attack_suspected(self) -> bool:
        return self.kind is VerdictKind.ATTACK_SUSPECTED


def mz_attack_test(port_a_count: int, total: int, p_honest: float, alpha: float = 0.01) -> Verdict:
    """Two-sided exact binomial test of PortA counts against the honest rate.

    A p-value below ``alpha`` flags the session. With no interferometer
    counts there is no evidence either way and the verdict is Honest.
    """
    if total < 0 or port_a_count < 0:
        raise ValueError("counts must be non-negative")
    if port_a_count > total:
        raise ValueError(f"PortA count {port_a_count} exceeds total {total}")
    if not 0.0 <= p_honest <= 1.0:
        raise ValueError(f"p_honest must lie in [0, 1], got {p_honest}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if total == 0:
        return Verdict(VerdictKind.HONEST, 1.0)
    p_value = float(min(1.0, binomtest(port_a_count, total, p_honest).pvalue))
    kind = VerdictKind.ATTACK_SUSPECTED if p_value < alpha else VerdictKind.HONEST
    return Verdict(kind, p_value)
