import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import grid_unambiguous_measure, interval_label
from timecode_qkd.protocol import (
    Ambiguous,
    Decoded,
    EncoderConfig,
    NoCandidate,
    candidate_mask,
    classify,
    encode,
    estimate_qber,
    sift,
    unambiguous_measure,
)
from timecode_qkd.wavepacket import rect_packet, sample_detection_time

DEFAULT = EncoderConfig()
THREE = EncoderConfig(delays=(0.0, 0.5, 1.0))


@pytest.mark.parametrize(
    "symbol,cfg,expected",
    [(0, DEFAULT, rect_packet(0, 1)), (1, DEFAULT, rect_packet(0.5, 1)), (2, THREE, rect_packet(1.0, 1))],
)
def test_encode_examples(symbol, cfg, expected):
    assert encode(symbol, cfg) == expected


@pytest.mark.parametrize("symbol", [-1, 2])
def test_encode_rejects_bad_symbol(symbol):
    with pytest.raises(ValueError):
        encode(symbol, DEFAULT)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(delays=(0.0,)),
        dict(delays=(0.5, 0.0)),
        dict(delays=(0.0, 0.0)),
        dict(pulse_duration=0.0),
        dict(delays=(0.0, math.inf)),
    ],
)
def test_encoder_config_validation(kwargs):
    with pytest.raises(ValueError):
        EncoderConfig(**kwargs)


@pytest.mark.parametrize(
    "t,expected",
    [(0.25, Decoded(0)), (0.75, Ambiguous((0, 1))), (1.2, Decoded(1)), (1.8, NoCandidate())],
)
def test_classify_examples(t, expected):
    assert classify(t, DEFAULT) == expected


def test_classify_boundaries_are_half_open():
    assert classify(0.0, DEFAULT) == Decoded(0)
    assert classify(0.5, DEFAULT) == Ambiguous((0, 1))
    assert classify(1.0, DEFAULT) == Decoded(1)
    assert classify(1.5, DEFAULT) == NoCandidate()
    assert classify(math.nextafter(0.0, -1), DEFAULT) == NoCandidate()


def test_classify_preimages_on_grid():
    ts = (np.arange(-50_000, 200_000) / 100_000.0).tolist()
    labels = {Decoded(0): "D0", Ambiguous((0, 1)): "A", Decoded(1): "D1", NoCandidate(): "N"}
    assert all(labels[classify(t, DEFAULT)] == interval_label(t) for t in ts)


def test_three_way_overlap_is_expressible():
    cfg = EncoderConfig(delays=(0.0, 0.3, 0.6))
    assert classify(0.7, cfg) == Ambiguous((0, 1, 2))
    assert classify(1.2, cfg) == Ambiguous((1, 2))


delay_sets = st.lists(st.floats(-2, 2), min_size=2, max_size=6, unique=True).map(sorted)


@given(delays=delay_sets, duration=st.floats(0.05, 3), t=st.floats(-5, 8))
def test_classify_is_total_and_consistent_with_mask(delays, duration, t):
    cfg = EncoderConfig(pulse_duration=duration, delays=tuple(delays))
    c = classify(t, cfg)
    assert isinstance(c, (Decoded, Ambiguous, NoCandidate))
    mask = candidate_mask([t], cfg)[0]
    assert tuple(np.flatnonzero(mask)) == {
        Decoded: lambda: (c.symbol,), Ambiguous: lambda: c.candidates, NoCandidate: lambda: ()
    }[type(c)]()


@given(delays=delay_sets, duration=st.floats(0.05, 3), seed=st.integers(0, 2**32 - 1))
def test_honest_detection_never_decodes_wrong_symbol(delays, duration, seed):
    cfg = EncoderConfig(pulse_duration=duration, delays=tuple(delays))
    rng = np.random.default_rng(seed)
    for b in range(cfg.n_symbols):
        c = classify(sample_detection_time(encode(b, cfg), rng), cfg)
        assert not (isinstance(c, Decoded) and c.symbol != b)
        assert not isinstance(c, NoCandidate)


def test_sift_example():
    ka, kb, kept = sift([0, 1, 0], [Decoded(0), Ambiguous((0, 1)), Decoded(1)])
    assert (ka, kb, kept) == ("00", "01", [0, 2])
    assert [i for i, (x, y) in enumerate(zip(ka, kb)) if x != y] == [1]


def test_sift_all_ambiguous_gives_empty_keys():
    assert sift([0, 1], [Ambiguous((0, 1))] * 2) == ("", "", [])


def test_sift_length_mismatch():
    with pytest.raises(ValueError):
        sift([0, 1], [Decoded(0)])


@given(st.lists(st.tuples(st.integers(0, 1), st.sampled_from(["d0", "d1", "a", "n"]))))
def test_sift_invariants(pairs):
    table = {"d0": Decoded(0), "d1": Decoded(1), "a": Ambiguous((0, 1)), "n": NoCandidate()}
    ka, kb, kept = sift([a for a, _ in pairs], [table[r] for _, r in pairs])
    assert len(ka) == len(kb) == len(kept)
    assert all(b > a for a, b in zip(kept, kept[1:]))


def test_honest_kept_fraction():
    rng = np.random.default_rng(11)
    n = 100_000
    alice = rng.integers(0, 2, n).tolist()
    results = [classify(sample_detection_time(encode(a, DEFAULT), rng), DEFAULT) for a in alice]
    ka, kb, kept = sift(alice, results)
    assert len(kept) / n == pytest.approx(0.5, abs=0.01)
    assert ka == kb


def test_qber_identical_keys():
    rng = np.random.default_rng(0)
    for frac in (0.1, 0.5, 1.0):
        q = estimate_qber("0110" * 50, "0110" * 50, frac, 0.95, rng)
        assert q.qber == 0.0 and q.errors == 0
        assert q.revealed == math.ceil(frac * 200)


def test_qber_complementary_keys():
    q = estimate_qber("0101", "1010", 1.0, 0.95, np.random.default_rng(0))
    assert q.qber == 1.0
    assert q.revealed_positions == (0, 1, 2, 3)


def test_qber_half_different():
    q = estimate_qber("00001111", "00110011", 1.0, 0.95, np.random.default_rng(0))
    assert q.qber == 0.5
    lo, hi = q.confidence_interval
    assert lo <= 0.5 <= hi


def test_qber_reveals_unique_sorted_subset():
    q = estimate_qber([0, 1] * 500, [0, 1] * 500, 0.3, 0.95, np.random.default_rng(5))
    pos = q.revealed_positions
    assert len(pos) == 300 == len(set(pos))
    assert list(pos) == sorted(pos)


@pytest.mark.parametrize("a,b,frac", [("", "", 0.5), ("01", "0", 0.5), ("01", "01", 0.0), ("01", "01", 1.5)])
def test_qber_input_errors(a, b, frac):
    with pytest.raises(ValueError):
        estimate_qber(a, b, frac, 0.95, np.random.default_rng(0))


@pytest.mark.parametrize(
    "delays,duration",
    [((0.0, 0.5), 1.0), ((0.0, 1.0), 1.0), ((0.0, 0.25, 0.5), 1.0), ((0.0, 0.3, 1.7, 1.8), 0.75), ((0.0, 0.1), 2.0)],
)
def test_unambiguous_measure_matches_grid(delays, duration):
    exact = unambiguous_measure(EncoderConfig(pulse_duration=duration, delays=delays))
    assert np.allclose(exact, grid_unambiguous_measure(delays, duration), atol=2e-5)
