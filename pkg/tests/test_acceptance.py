"""Exit criteria for the simulator, each at its pinned tolerance."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from oracles import (
    interval_label,
    grid_unambiguous_measure,
    intercept_resend_qber_closed_form,
    intercept_resend_qber_integral,
    mz_quadrature,
    porta_rect,
    rect_field,
)
from timecode_qkd.adversary import ResendFull, ResendShort
from timecode_qkd.interferometer import InterferometerConfig, Port, port_probabilities, sample_port
from timecode_qkd.protocol import Ambiguous, Decoded, EncoderConfig, NoCandidate, classify
from timecode_qkd.serialization import config_to_dict, report_to_json
from timecode_qkd.session import SessionConfig, honest_expectations, run_session
from timecode_qkd.wavepacket import rect_packet

N = 100_000
HONEST = SessionConfig(n_pulses=N, seed=2024)
RESEND_FULL = SessionConfig(n_pulses=N, seed=2025, eve=ResendFull(), intercept_fraction=1.0, reveal_fraction=1.0)
RESEND_SHORT = SessionConfig(n_pulses=N, seed=2026, eve=ResendShort(0.01), intercept_fraction=1.0, reveal_fraction=1.0)


def test_c1_honest_session_exactness(criterion):
    # 300000 cells over [0, 1.5) put every breakpoint on a cell edge
    oracle = float(np.mean(grid_unambiguous_measure((0.0, 0.5), 1.0, cells=300_000)))
    closed = honest_expectations(HONEST).sift_fraction
    worst_qber, fracs = 0, []
    for seed in range(10):
        r = run_session(SessionConfig(n_pulses=N, seed=seed))
        worst_qber = max(worst_qber, r.sifted_errors, r.qber.errors)
        fracs.append(r.sifted_fraction)
    ok = (
        worst_qber == 0
        and all(abs(f - 0.5) <= 0.01 for f in fracs)
        and abs(oracle - 0.5) < 1e-6
        and closed == 0.5
    )
    criterion(
        "C1 honest exactness",
        ok,
        f"max errors {worst_qber} over 10 seeds; sifted fraction {min(fracs):.4f}..{max(fracs):.4f} "
        f"(target 0.5 +/- 0.01, grid oracle {oracle:.6f})",
    )


def test_c2_interval_geometry(criterion):
    cfg = EncoderConfig()
    labels = {Decoded(0): "D0", Ambiguous((0, 1)): "A", Decoded(1): "D1", NoCandidate(): "N"}
    # 10^6 points on [-0.25, 1.75); k / 500000 hits 0, 0.5, 1.0 and 1.5 exactly
    ts = ((np.arange(1_000_000) - 125_000) / 500_000).tolist()
    disagreements = sum(labels[classify(t, cfg)] != interval_label(t) for t in ts)
    criterion("C2 interval geometry", disagreements == 0, f"{disagreements} disagreements on 10^6 grid points")


def test_c3_intercept_resend_disturbance(criterion):
    r = run_session(RESEND_FULL)
    closed = intercept_resend_qber_closed_form()
    integral = intercept_resend_qber_integral()
    q = r.qber.qber
    ok = abs(q - 0.25) <= 0.01 and abs(closed - integral) <= 1e-6 and r.qber.revealed == r.sifted_len
    criterion(
        "C3 intercept-resend QBER",
        ok,
        f"sifted QBER {q:.4f} over {r.sifted_len} bits (target 0.25 +/- 0.01); "
        f"closed form {closed} vs double integral {integral:.9f}",
    )


def test_c4_honest_interferometer_imbalance(criterion):
    w = rect_packet(0.0, 1.0)
    mz = InterferometerConfig()
    p_a = port_probabilities(w, mz)[0]
    quad = mz_quadrature(rect_field(0.0, 1.0), 0.5, math.pi, -1.0, 3.0, 40_000)
    rng = np.random.default_rng(4)
    frac = sum(sample_port(w, mz, rng) is Port.A for _ in range(N)) / N
    ok = p_a == 0.25 and abs(frac - 0.25) <= 0.01 and abs(quad - p_a) <= 1e-9
    criterion(
        "C4 honest MZ imbalance",
        ok,
        f"closed form {p_a!r}, quadrature {quad:.12f}, sampled {frac:.4f} (target 0.25 +/- 0.01)",
    )


def test_c5_short_pulse_attack_detection(criterion):
    r = run_session(RESEND_SHORT)
    ok = abs(r.porta_frac - 0.5) <= 0.01 and r.verdict.attack_suspected and r.qber.qber <= 0.01
    criterion(
        "C5 short-pulse detection",
        ok,
        f"PortA {r.porta_frac:.4f} (target 0.5 +/- 0.01), verdict {r.verdict.kind.value} "
        f"p={r.verdict.p_value:.3g}, sifted QBER {r.qber.qber:.4f} (<= 0.01)",
    )


@pytest.mark.filterwarnings("ignore:short-pulse resend duration:UserWarning")
def test_c6_imbalance_vs_duration(criterion):
    rows = []
    for i, d in enumerate((0.01, 0.25, 0.5, 0.75, 1.0)):
        cfg = SessionConfig(n_pulses=N, seed=600 + i, eve=ResendShort(d), p_route_mz=1.0)
        got = run_session(cfg).porta_frac
        rows.append((d, got, porta_rect(d)))
    ok = all(abs(g - e) <= 0.01 for _, g, e in rows)
    detail = ", ".join(f"d={d}: {g:.4f} vs {e:.4f}" for d, g, e in rows)
    criterion("C6 imbalance curve", ok, detail)


def test_c7_statistical_layer(criterion):
    sessions = 1000
    p_true = porta_rect(1.0)
    alarms = covered = 0
    for seed in range(sessions):
        r = run_session(SessionConfig(n_pulses=2000, seed=10_000 + seed))
        alarms += r.verdict.attack_suspected
        lo, hi = r.mz_porta_ci
        covered += lo <= p_true <= hi
    fpr = alarms / sessions
    coverage = covered / sessions
    ok = 0.001 <= fpr <= 0.03 and coverage >= 0.93
    criterion(
        "C7 statistical layer",
        ok,
        f"false-positive rate {fpr:.3f} (in [0.001, 0.03]); Wilson 95% coverage {coverage:.3f} (>= 0.93)",
    )


@pytest.mark.parametrize("name,cfg", [("honest", HONEST), ("resend_full", RESEND_FULL), ("resend_short", RESEND_SHORT)])
def test_c8_determinism(criterion, name, cfg, tmp_path):
    serial = report_to_json(run_session(cfg, workers=1))
    parallel = report_to_json(run_session(cfg, workers=4, chunk_size=1000))
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config_to_dict(cfg)))
    outs = []
    for tag, workers in (("a", "1"), ("b", "1"), ("c", "4")):
        out = tmp_path / f"{tag}.json"
        subprocess.run(
            [sys.executable, "-m", "timecode_qkd", "run", "--config", str(cfg_path), "--out", str(out), "--workers", workers],
            check=True,
        )
        outs.append(out.read_bytes())
    ok = serial == parallel and outs[0] == outs[1] == outs[2] == serial.encode()
    criterion(f"C8 determinism ({name})", ok, f"in-process serial/parallel and 3 CLI runs byte-identical: {ok}")
