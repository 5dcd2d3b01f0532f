"""Monte Carlo simulator for time-coding quantum key distribution."""

from .adversary import (
    AmbiguousPolicy,
    ChannelConfig,
    NoEve,
    ResendFull,
    ResendShort,
    apply_dark_count,
    eve_intercept,
    transmit,
)
from .interferometer import InterferometerConfig, Port, port_probabilities, sample_port
from .protocol import (
    Ambiguous,
    Decoded,
    EncoderConfig,
    NoCandidate,
    QberEstimate,
    classify,
    encode,
    estimate_qber,
    sift,
)
from .session import SessionConfig, SessionReport, honest_expectations, run_session
from .stats import Verdict, VerdictKind, mz_attack_test, wilson_interval
from .wavepacket import WavePacket, autocorrelation, rect_packet, sample_detection_time

__version__ = "0.1.0"
