"""Single-photon temporal wavepackets with piecewise-constant amplitude.

Time is measured in units of the nominal pulse duration T (T = 1.0) and
Alice's time reference sits at t = 0. Supports are half-open ``[start, end)``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterable

NORM_TOL = 1e-12


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    amplitude: complex

    @property
    def length(self) -> float:
        return self.end - self.start

    @property
    def weight(self) -> float:
        """Probability mass carried by the segment."""
        return abs(self.amplitude) ** 2 * self.length


@dataclass(frozen=True)
class WavePacket:
    """Normalized one-photon pulse, stored as sorted disjoint segments."""

    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(
            s if isinstance(s, Segment) else Segment(float(s[0]), float(s[1]), complex(s[2]))
            for s in self.segments
        )
        if not segs:
            raise ValueError("a wavepacket needs at least one segment")
        for s in segs:
            if not (math.isfinite(s.start) and math.isfinite(s.end)):
                raise ValueError("segment bounds must be finite")
            if not s.end > s.start:
                raise ValueError(f"segment end must exceed start: [{s.start}, {s.end})")
        for a, b in zip(segs, segs[1:]):
            if b.start < a.end:
                raise ValueError("segments must be sorted and non-overlapping")
        norm = sum(s.weight for s in segs)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"wavepacket is not normalized (norm = {norm!r})")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def from_segments(cls, segments: Iterable[tuple[float, float, complex]]) -> "WavePacket":
        """Build a packet from raw segments, rescaling amplitudes to unit norm."""
        segs = sorted((float(a), float(b), complex(c)) for a, b, c in segments)
        norm = sum(abs(c) ** 2 * (b - a) for a, b, c in segs)
        if not norm > 0:
            raise ValueError("cannot normalize a zero wavepacket")
        scale = 1.0 / math.sqrt(norm)
        return cls(tuple(Segment(a, b, c * scale) for a, b, c in segs))

    @property
    def start(self) -> float:
        return self.segments[0].start

    @property
    def end(self) -> float:
        return self.segments[-1].end

    def norm(self) -> float:
        return sum(s.weight for s in self.segments)

    def amplitude(self, t: float) -> complex:
        """psi(t); zero outside the support."""
        for s in self.segments:
            if s.start <= t < s.end:
                return s.amplitude
        return 0j

    def contains(self, t: float) -> bool:
        return any(s.start <= t < s.end for s in self.segments)


def rect_packet(start: float, duration: float) -> WavePacket:
    """Fully coherent rectangular pulse on ``[start, start + duration)``."""
    if not duration > 0 or not math.isfinite(duration):
        raise ValueError(f"pulse duration must be positive, got {duration}")
    if not math.isfinite(start):
        raise ValueError(f"pulse start must be finite, got {start}")
    lo = float(start)
    hi = lo + float(duration)
    if not hi > lo:
        raise ValueError(f"duration {duration} vanishes at start {start} in floating point")
    # amplitude from the realized float support so the norm stays exact
    return WavePacket((Segment(lo, hi, complex(1.0 / math.sqrt(hi - lo))),))


def autocorrelation(w: WavePacket, lag: float) -> complex:
    """C(lag) = integral of conj(psi(t)) * psi(t - lag) dt, exact over segment overlaps."""
    total = 0j
    for a in w.segments:
        for b in w.segments:
            # psi(t - lag) on segment b occupies [b.start + lag, b.end + lag)
            lo = max(a.start, b.start + lag)
            hi = min(a.end, b.end + lag)
            if hi > lo:
                total += a.amplitude.conjugate() * b.amplitude * (hi - lo)
    return total


def detection_time_from_uniform(w: WavePacket, u: float) -> float:
    """Inverse CDF of the Born-rule density |psi(t)|^2 evaluated at ``u`` in [0, 1)."""
    cum = []
    acc = 0.0
    for s in w.segments:
        acc += s.weight
        cum.append(acc)
    target = u * acc
    i = min(bisect.bisect_right(cum, target), len(cum) - 1)
    s = w.segments[i]
    before = cum[i - 1] if i else 0.0
    t = s.start + (target - before) / abs(s.amplitude) ** 2
    # float rounding must not push the sample onto the open end
    if t >= s.end:
        t = math.nextafter(s.end, -math.inf)
    return max(t, s.start)


def sample_detection_time(w: WavePacket, rng) -> float:
    """Draw a photon detection time from |psi(t)|^2.

    ``rng`` is anything with a numpy-style ``random()`` method.
    """
    return detection_time_from_uniform(w, float(rng.random()))
