"""Lossy quantum channel, detector dark counts and Eve's resend attacks."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

from .protocol import Ambiguous, Decoded, EncoderConfig, classify, encode
from .wavepacket import WavePacket, rect_packet, sample_detection_time


@dataclass(frozen=True)
class ChannelConfig:
    transmittance: float = 1.0
    dark_count_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.transmittance <= 1.0:
            raise ValueError(f"channel.transmittance must lie in [0, 1], got {self.transmittance}")
        if not 0.0 <= self.dark_count_prob <= 1.0:
            raise ValueError(f"channel.dark_count_prob must lie in [0, 1], got {self.dark_count_prob}")


class AmbiguousPolicy(str, Enum):
    GUESS_UNIFORM = "guess_uniform"
    SUPPRESS = "suppress"


@dataclass(frozen=True)
class NoEve:
    pass


@dataclass(frozen=True)
class ResendFull:
    """Measure the delay and resend a full-duration codeword."""

    ambiguous_policy: AmbiguousPolicy = AmbiguousPolicy.GUESS_UNIFORM


@dataclass(frozen=True)
class ResendShort:
    """Resend a pulse of duration ``pulse_duration`` starting at the measured time."""

    pulse_duration: float = 0.01

    def __post_init__(self):
        if not (self.pulse_duration > 0 and math.isfinite(self.pulse_duration)):
            raise ValueError(f"eve.pulse_duration must be positive, got {self.pulse_duration}")


EveStrategy = Union[NoEve, ResendFull, ResendShort]


def check_strategy(strategy: EveStrategy, cfg: EncoderConfig) -> None:
    """Warn about resend durations long enough to blunt the interferometer signature."""
    if isinstance(strategy, ResendShort) and strategy.pulse_duration >= cfg.pulse_duration / 2:
        warnings.warn(
            f"short-pulse resend duration {strategy.pulse_duration} is at least T/2; "
            "the interferometer signature weakens",
            stacklevel=2,
        )


def transmit(w: Optional[WavePacket], ch: ChannelConfig, rng) -> Optional[WavePacket]:
    """Pass the packet with probability ``transmittance``."""
    if w is None:
        return None
    return w if rng.random() < ch.transmittance else None


def eve_intercept(w: WavePacket, strategy: EveStrategy, cfg: EncoderConfig, rng) -> Optional[WavePacket]:
    if isinstance(strategy, NoEve):
        return w
    t = sample_detection_time(w, rng)
    if isinstance(strategy, ResendShort):
        return rect_packet(t, strategy.pulse_duration)
    if not isinstance(strategy, ResendFull):
        raise TypeError(f"unknown Eve strategy {strategy!r}")
    outcome = classify(t, cfg)
    if isinstance(outcome, Decoded):
        return encode(outcome.symbol, cfg)
    if isinstance(outcome, Ambiguous) and strategy.ambiguous_policy is AmbiguousPolicy.GUESS_UNIFORM:
        cands = outcome.candidates
        pick = min(int(rng.random() * len(cands)), len(cands) - 1)
        return encode(cands[pick], cfg)
    return None


def apply_dark_count(
    detected: Optional[float], ch: ChannelConfig, window: tuple[float, float], rng
) -> Optional[float]:
    """Fill an empty detection slot with a dark count at a uniform time in ``window``."""
    lo, hi = window
    if not hi > lo:
        raise ValueError(f"detection window must be non-empty, got {window}")
    if detected is not None:
        return detected
    if rng.random() < ch.dark_count_prob:
        t = lo + (hi - lo) * rng.random()
        return t if t < hi else math.nextafter(hi, lo)
    return None
