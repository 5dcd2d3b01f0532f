"""Full protocol sessions: Alice, Eve, channel, Bob's routing, sifting and tests.

Pulses are simulated in fixed-size chunks with numpy. Every random draw of
pulse ``i`` comes from a counter-based substream keyed by the session seed
and ``i`` (see :mod:`timecode_qkd.rng`), so results do not depend on the
chunking or on how many worker threads evaluate the chunks.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .adversary import (
    AmbiguousPolicy,
    ChannelConfig,
    EveStrategy,
    NoEve,
    ResendFull,
    ResendShort,
    check_strategy,
)
from .interferometer import InterferometerConfig, port_probabilities
from .protocol import (
    EncoderConfig,
    QberEstimate,
    candidate_mask,
    encode,
    estimate_qber,
    symbols_to_str,
    unambiguous_measure,
)
from .rng import CounterStream
from .stats import Verdict, mz_attack_test, wilson_interval
from .wavepacket import rect_packet

CHUNK_SIZE = 8192

# per-pulse random slots
SLOT_SYMBOL = 0
SLOT_INTERCEPT = 1
SLOT_EVE_TIME = 2
SLOT_EVE_GUESS = 3
SLOT_LOSS = 4
SLOT_ROUTE = 5
SLOT_BOB = 6
SLOT_DARK = 7
SLOT_DARK_TIME = 8

# key-counter outcome codes
NO_CLICK = 0
DECODED = 1
AMBIGUOUS = 2
NO_CANDIDATE = 3

# stream domains
_PULSE_DOMAIN = 0
_SESSION_DOMAIN = 1


@dataclass(frozen=True)
class SessionConfig:
    n_pulses: int = 100_000
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    eve: EveStrategy = field(default_factory=NoEve)
    intercept_fraction: float = 1.0
    mz: InterferometerConfig = field(default_factory=InterferometerConfig)
    p_route_mz: float = 0.5
    reveal_fraction: float = 0.5
    confidence_level: float = 0.95
    mz_alpha: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.n_pulses, bool) or int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
            raise ValueError(f"n_pulses must be a positive integer, got {self.n_pulses}")
        for name in ("intercept_fraction", "p_route_mz"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 < self.reveal_fraction <= 1.0:
            raise ValueError(f"reveal_fraction must lie in (0, 1], got {self.reveal_fraction}")
        if not 0.0 < self.confidence_level < 1.0:
            raise ValueError(f"confidence_level must lie in (0, 1), got {self.confidence_level}")
        if not 0.0 < self.mz_alpha < 1.0:
            raise ValueError(f"mz_alpha must lie in (0, 1), got {self.mz_alpha}")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not isinstance(self.eve, (NoEve, ResendFull, ResendShort)):
            raise TypeError(f"unknown Eve strategy {self.eve!r}")
        object.__setattr__(self, "n_pulses", int(self.n_pulses))
        object.__setattr__(self, "seed", int(self.seed))


class HonestExpectations(NamedTuple):
    sift_fraction: float
    porta_prob: float
    degenerate_symbols: tuple[int, ...] = ()


def honest_expectations(cfg: SessionConfig) -> HonestExpectations:
    """Closed-form honest sifted fraction and interferometer PortA probability.

    The sifted fraction is the unambiguous support of each codeword,
    averaged over symbols, in units of the pulse duration. Symbols with no
    unambiguous support are reported and trigger a warning.
    """
    enc = cfg.encoder
    free = unambiguous_measure(enc)
    degenerate = tuple(k for k, m in enumerate(free) if m <= 0.0)
    if degenerate:
        warnings.warn(
            f"delay set {enc.delays} leaves symbols {list(degenerate)} with no unambiguous interval",
            stacklevel=2,
        )
    sift_fraction = sum(free) / (len(free) * enc.pulse_duration)
    p_a, _ = port_probabilities(encode(0, enc), cfg.mz)
    return HonestExpectations(sift_fraction, p_a, degenerate)


@dataclass(frozen=True)
class SessionCounts:
    emitted: int
    intercepted: int
    eve_suppressed: int
    lost: int
    routed_to_key: int
    routed_to_mz: int
    dark_counts: int
    decoded: int
    ambiguous: int
    no_candidate: int

    @property
    def key_clicks(self) -> int:
        return self.routed_to_key + self.dark_counts


@dataclass(frozen=True)
class SessionReport:
    config: SessionConfig
    counts: SessionCounts
    sifted_len: int
    sifted_errors: int
    qber: Optional[QberEstimate]
    mz_counts: tuple[int, int]
    mz_porta_ci: Optional[tuple[float, float]]
    mz_expected_honest: float
    expected_sift_fraction: float
    verdict: Verdict
    final_key_alice: str = ""
    final_key_bob: str = ""

    @property
    def mz_total(self) -> int:
        return self.mz_counts[0] + self.mz_counts[1]

    @property
    def porta_frac(self) -> Optional[float]:
        return self.mz_counts[0] / self.mz_total if self.mz_total else None

    @property
    def sifted_fraction(self) -> Optional[float]:
        """Sifted bits per key-counter click."""
        clicks = self.counts.key_clicks
        return self.sifted_len / clicks if clicks else None


@dataclass
class PulseRecords:
    """Per-pulse outcome arrays for one contiguous range of pulse indices."""

    alice: np.ndarray  # symbol sent
    bob: np.ndarray  # decoded symbol, -1 when not decoded
    outcome: np.ndarray  # key-counter outcome code
    intercepted: np.ndarray
    suppressed: np.ndarray
    lost: np.ndarray
    to_mz: np.ndarray  # photon arrived and went to the interferometer
    to_key: np.ndarray  # photon arrived and went to the key counter
    port_a: np.ndarray  # interferometer click in PortA (valid where to_mz)
    dark: np.ndarray

    @classmethod
    def concat(cls, parts: list["PulseRecords"]) -> "PulseRecords":
        names = cls.__dataclass_fields__
        return cls(**{n: np.concatenate([getattr(p, n) for p in parts]) for n in names})


def simulate_pulses(cfg: SessionConfig, lo: int, hi: int) -> PulseRecords:
    """Simulate pulses ``lo .. hi-1``; a pure function of the config and the range."""
    enc = cfg.encoder
    T = enc.pulse_duration
    delays = np.asarray(enc.delays)
    n_sym = enc.n_symbols
    stream = CounterStream(cfg.seed, _PULSE_DOMAIN)
    idx = np.arange(lo, hi, dtype=np.uint64)
    n = idx.size

    alice = np.minimum((stream.uniforms(idx, SLOT_SYMBOL) * n_sym).astype(np.int64), n_sym - 1)
    start = delays[alice]
    dur = np.full(n, T)
    short = np.zeros(n, dtype=bool)
    present = np.ones(n, dtype=bool)

    eve = cfg.eve
    if isinstance(eve, NoEve) or cfg.intercept_fraction == 0.0:
        intercepted = np.zeros(n, dtype=bool)
    else:
        intercepted = stream.uniforms(idx, SLOT_INTERCEPT) < cfg.intercept_fraction
    suppressed = np.zeros(n, dtype=bool)
    if intercepted.any():
        t_eve = _detection_times(start, dur, stream.uniforms(idx, SLOT_EVE_TIME))
        if isinstance(eve, ResendShort):
            start = np.where(intercepted, t_eve, start)
            dur = np.where(intercepted, eve.pulse_duration, dur)
            short = intercepted.copy()
        else:
            mask = candidate_mask(t_eve, enc)
            n_cand = mask.sum(axis=1)
            if eve.ambiguous_policy is AmbiguousPolicy.GUESS_UNIFORM:
                pick = np.minimum(
                    (stream.uniforms(idx, SLOT_EVE_GUESS) * np.maximum(n_cand, 1)).astype(np.int64),
                    np.maximum(n_cand - 1, 0),
                )
            else:
                pick = np.zeros(n, dtype=np.int64)
            # position of the pick-th True in each row
            chosen = np.argmax(mask & (np.cumsum(mask, axis=1) == (pick + 1)[:, None]), axis=1)
            emits = (n_cand == 1) | (
                (n_cand >= 2) & (eve.ambiguous_policy is AmbiguousPolicy.GUESS_UNIFORM)
            )
            suppressed = intercepted & ~emits
            resent = intercepted & emits
            start = np.where(resent, delays[chosen], start)
            present &= ~suppressed

    lost = present & ~(stream.uniforms(idx, SLOT_LOSS) < cfg.channel.transmittance)
    present &= ~lost

    route_mz = stream.uniforms(idx, SLOT_ROUTE) < cfg.p_route_mz
    to_mz = present & route_mz
    to_key = present & ~route_mz
    u_bob = stream.uniforms(idx, SLOT_BOB)

    p_a_full, _ = port_probabilities(rect_packet(0.0, T), cfg.mz)
    if isinstance(eve, ResendShort):
        p_a_short, _ = port_probabilities(rect_packet(0.0, eve.pulse_duration), cfg.mz)
    else:
        p_a_short = p_a_full
    port_a = to_mz & (u_bob < np.where(short, p_a_short, p_a_full))

    t_bob = _detection_times(start, dur, u_bob)
    dark = np.zeros(n, dtype=bool)
    if cfg.channel.dark_count_prob > 0.0:
        empty = ~route_mz & ~present
        dark = empty & (stream.uniforms(idx, SLOT_DARK) < cfg.channel.dark_count_prob)
        w_lo, w_hi = enc.window
        t_dark = w_lo + (w_hi - w_lo) * stream.uniforms(idx, SLOT_DARK_TIME)
        t_dark = np.minimum(t_dark, np.nextafter(w_hi, w_lo))
        t_bob = np.where(dark, t_dark, t_bob)
    clicked = to_key | dark

    mask = candidate_mask(t_bob, enc)
    n_cand = mask.sum(axis=1)
    outcome = np.full(n, NO_CLICK, dtype=np.int8)
    outcome[clicked & (n_cand == 1)] = DECODED
    outcome[clicked & (n_cand >= 2)] = AMBIGUOUS
    outcome[clicked & (n_cand == 0)] = NO_CANDIDATE
    bob = np.where(outcome == DECODED, np.argmax(mask, axis=1), -1)

    return PulseRecords(
        alice=alice.astype(np.int8),
        bob=bob.astype(np.int8),
        outcome=outcome,
        intercepted=intercepted,
        suppressed=suppressed,
        lost=lost,
        to_mz=to_mz,
        to_key=to_key,
        port_a=port_a,
        dark=dark,
    )


def _detection_times(start: np.ndarray, dur: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Born-rule sample on rectangular supports, kept strictly below the open end."""
    end = start + dur
    return np.minimum(start + dur * u, np.nextafter(end, -np.inf))


def run_pulses(cfg: SessionConfig, workers: int = 1, chunk_size: int = CHUNK_SIZE) -> PulseRecords:
    bounds = [(lo, min(lo + chunk_size, cfg.n_pulses)) for lo in range(0, cfg.n_pulses, chunk_size)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: simulate_pulses(cfg, *b), bounds))
    else:
        parts = [simulate_pulses(cfg, lo, hi) for lo, hi in bounds]
    return PulseRecords.concat(parts)


def run_session(cfg: SessionConfig, workers: int = 1, chunk_size: int = CHUNK_SIZE) -> SessionReport:
    """Simulate one session and assemble its report.

    The report is a pure function of ``cfg``; ``workers`` and
    ``chunk_size`` only change how the work is scheduled.
    """
    check_strategy(cfg.eve, cfg.encoder)
    expected = honest_expectations(cfg)
    rec = run_pulses(cfg, workers=workers, chunk_size=chunk_size)

    counts = SessionCounts(
        emitted=cfg.n_pulses,
        intercepted=int(rec.intercepted.sum()),
        eve_suppressed=int(rec.suppressed.sum()),
        lost=int(rec.lost.sum()),
        routed_to_key=int(rec.to_key.sum()),
        routed_to_mz=int(rec.to_mz.sum()),
        dark_counts=int(rec.dark.sum()),
        decoded=int((rec.outcome == DECODED).sum()),
        ambiguous=int((rec.outcome == AMBIGUOUS).sum()),
        no_candidate=int((rec.outcome == NO_CANDIDATE).sum()),
    )

    kept = np.flatnonzero(rec.outcome == DECODED)
    key_alice = rec.alice[kept]
    key_bob = rec.bob[kept]
    sifted_errors = int(np.count_nonzero(key_alice != key_bob))

    qber = None
    final_alice = final_bob = ""
    if kept.size:
        rng = CounterStream(cfg.seed, _SESSION_DOMAIN).generator(0)
        qber = estimate_qber(key_alice, key_bob, cfg.reveal_fraction, cfg.confidence_level, rng)
        keep = np.ones(kept.size, dtype=bool)
        keep[list(qber.revealed_positions)] = False
        final_alice = symbols_to_str(key_alice[keep])
        final_bob = symbols_to_str(key_bob[keep])

    port_a = int(rec.port_a.sum())
    mz_total = counts.routed_to_mz
    verdict = mz_attack_test(port_a, mz_total, expected.porta_prob, cfg.mz_alpha)
    mz_ci = wilson_interval(port_a, mz_total, cfg.confidence_level) if mz_total else None

    return SessionReport(
        config=cfg,
        counts=counts,
        sifted_len=int(kept.size),
        sifted_errors=sifted_errors,
        qber=qber,
        mz_counts=(port_a, mz_total - port_a),
        mz_porta_ci=mz_ci,
        mz_expected_honest=expected.porta_prob,
        expected_sift_fraction=expected.sift_fraction,
        verdict=verdict,
        final_key_alice=final_alice,
        final_key_bob=final_bob,
    )
