"""Bob's unbalanced Mach-Zehnder interferometer used as a pulse-duration probe.

Convention: with zero arm delay and zero phase every photon exits PortA.
PortA probability is ``(1 + Re[exp(i*phase) * C(delay)]) / 2`` where C is the
packet autocorrelation, so the honest two-state pulse (delay T/2, phase pi)
leaves PortA with probability 1/4, and a pulse much shorter than the arm
delay splits 1/2 : 1/2.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

from .wavepacket import WavePacket, autocorrelation


@dataclass(frozen=True)
class InterferometerConfig:
    arm_delay: float = 0.5
    arm_phase: float = math.pi

    def __post_init__(self):
        if not (math.isfinite(self.arm_delay) and self.arm_delay >= 0):
            raise ValueError(f"arm_delay must be a non-negative real, got {self.arm_delay}")
        if not math.isfinite(self.arm_phase):
            raise ValueError(f"arm_phase must be finite, got {self.arm_phase}")


class Port(str, Enum):
    A = "PortA"
    B = "PortB"


def port_probabilities(w: WavePacket, cfg: InterferometerConfig) -> tuple[float, float]:
    c = autocorrelation(w, cfg.arm_delay)
    x = (cmath.exp(1j * cfg.arm_phase) * c).real
    x = min(1.0, max(-1.0, x))
    p_a = (1.0 + x) / 2.0
    return p_a, 1.0 - p_a


def port_from_uniform(p_a: float, u: float) -> Port:
    return Port.A if u < p_a else Port.B


def sample_port(w: WavePacket, cfg: InterferometerConfig, rng) -> Port:
    p_a, _ = port_probabilities(w, cfg)
    return port_from_uniform(p_a, float(rng.random()))
