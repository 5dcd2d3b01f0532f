"""Alice's delay encoder, Bob's interval classifier, sifting and QBER sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .stats import wilson_interval
from .wavepacket import WavePacket, rect_packet

SYMBOL_CHARS = "0123456789abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class EncoderConfig:
    """Pulse duration and the public delay set; symbol k is sent with delay ``delays[k]``."""

    pulse_duration: float = 1.0
    delays: tuple[float, ...] = (0.0, 0.5)

    def __post_init__(self):
        delays = tuple(float(d) for d in self.delays)
        object.__setattr__(self, "delays", delays)
        if not (self.pulse_duration > 0 and math.isfinite(self.pulse_duration)):
            raise ValueError(f"pulse_duration must be positive, got {self.pulse_duration}")
        if len(delays) < 2:
            raise ValueError("at least two delays are required")
        if len(delays) > len(SYMBOL_CHARS):
            raise ValueError(f"at most {len(SYMBOL_CHARS)} delays are supported")
        if not all(math.isfinite(d) for d in delays):
            raise ValueError("delays must be finite")
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ValueError("delays must be strictly increasing")

    @property
    def n_symbols(self) -> int:
        return len(self.delays)

    @property
    def window(self) -> tuple[float, float]:
        """Bob's detection window: the union hull of all codeword supports."""
        return self.delays[0], self.delays[-1] + self.pulse_duration


@dataclass(frozen=True)
class Decoded:
    symbol: int


@dataclass(frozen=True)
class Ambiguous:
    candidates: tuple[int, ...]

    def __post_init__(self):
        if len(self.candidates) < 2:
            raise ValueError("an ambiguous outcome needs at least two candidates")


@dataclass(frozen=True)
class NoCandidate:
    pass


Classification = Union[Decoded, Ambiguous, NoCandidate]


def encode(symbol: int, cfg: EncoderConfig) -> WavePacket:
    if not 0 <= symbol < cfg.n_symbols:
        raise ValueError(f"symbol {symbol} out of range for {cfg.n_symbols} delays")
    return rect_packet(cfg.delays[symbol], cfg.pulse_duration)


def candidates(t: float, cfg: EncoderConfig) -> tuple[int, ...]:
    """Symbols whose support ``[delay, delay + T)`` contains ``t``."""
    T = cfg.pulse_duration
    return tuple(k for k, d in enumerate(cfg.delays) if d <= t < d + T)


def classify(t: float, cfg: EncoderConfig) -> Classification:
    cands = candidates(t, cfg)
    if len(cands) == 1:
        return Decoded(cands[0])
    if cands:
        return Ambiguous(cands)
    return NoCandidate()


def symbols_to_str(symbols) -> str:
    return "".join(SYMBOL_CHARS[int(s)] for s in symbols)


def sift(alice_symbols: Sequence[int], bob_results: Sequence[Classification]) -> tuple[str, str, list[int]]:
    """Keep only the positions where Bob decoded a single delay.

    Returns Alice's key, Bob's key and the kept positions. Keys are strings
    with one character per symbol ("0"/"1" for the two-state protocol).
    """
    if len(alice_symbols) != len(bob_results):
        raise ValueError(
            f"length mismatch: {len(alice_symbols)} Alice symbols vs {len(bob_results)} Bob results"
        )
    kept = [i for i, r in enumerate(bob_results) if isinstance(r, Decoded)]
    key_alice = symbols_to_str(alice_symbols[i] for i in kept)
    key_bob = symbols_to_str(bob_results[i].symbol for i in kept)
    return key_alice, key_bob, kept


@dataclass(frozen=True)
class QberEstimate:
    revealed: int
    errors: int
    qber: float
    confidence_interval: tuple[float, float]
    confidence_level: float = 0.95
    revealed_positions: tuple[int, ...] = field(default=(), repr=False)


def _as_symbol_array(key) -> np.ndarray:
    if isinstance(key, str):
        return np.array([SYMBOL_CHARS.index(c) for c in key], dtype=np.int64)
    return np.asarray(key, dtype=np.int64)


def estimate_qber(key_alice, key_bob, reveal_fraction: float, confidence_level: float, rng) -> QberEstimate:
    """Publicly compare a random subset of the sifted key.

    ``ceil(reveal_fraction * len)`` positions are drawn uniformly without
    replacement; they are reported in ``revealed_positions`` so the caller
    can drop them from the final key.
    """
    a = _as_symbol_array(key_alice)
    b = _as_symbol_array(key_bob)
    if a.shape != b.shape:
        raise ValueError(f"key length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("cannot estimate QBER on empty keys")
    if not 0.0 < reveal_fraction <= 1.0:
        raise ValueError(f"reveal_fraction must lie in (0, 1], got {reveal_fraction}")
    n = a.size
    k = min(n, math.ceil(reveal_fraction * n))
    if k == n:
        positions = np.arange(n)
    else:
        positions = np.sort(rng.choice(n, size=k, replace=False))
    errors = int(np.count_nonzero(a[positions] != b[positions]))
    return QberEstimate(
        revealed=k,
        errors=errors,
        qber=errors / k,
        confidence_interval=wilson_interval(errors, k, confidence_level),
        confidence_level=confidence_level,
        revealed_positions=tuple(int(p) for p in positions),
    )


def unambiguous_measure(cfg: EncoderConfig) -> tuple[float, ...]:
    """Length of each codeword support not covered by any other codeword."""
    T = cfg.pulse_duration
    out = []
    for k, d in enumerate(cfg.delays):
        lo, hi = d, d + T
        covered = sorted(
            (max(lo, e), min(hi, e + T))
            for j, e in enumerate(cfg.delays)
            if j != k and e < hi and e + T > lo
        )
        free = hi - lo
        cur = lo
        for a, b in covered:
            a = max(a, cur)
            if b > a:
                free -= b - a
                cur = b
        out.append(max(0.0, free))
    return tuple(out)


def candidate_mask(times, cfg: EncoderConfig) -> np.ndarray:
    """Vectorized candidate sets: ``mask[i, k]`` is True when symbol k covers ``times[i]``."""
    t = np.asarray(times, dtype=np.float64)[..., None]
    d = np.asarray(cfg.delays, dtype=np.float64)
    return (d <= t) & (t < d + cfg.pulse_duration)
