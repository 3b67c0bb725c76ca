import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtpsk.errors import ConfigurationError, SamplingError
from mtpsk.modem_tx import (
    Waveform,
    build_constellation,
    default_sample_rate,
    encode_bits,
    papr,
    phases_from_steps,
    phases_from_symbols,
    read_waveform,
    synthesize,
    tone_amplitude,
    wrap_deg,
    write_waveform,
)


@pytest.mark.parametrize(
    "m, delta, phases",
    [
        (4, 180, (-67.5, -22.5, 22.5, 67.5)),
        (2, 360, (-90.0, 90.0)),
        (4, 360, (-135.0, -45.0, 45.0, 135.0)),
    ],
)
def test_constellation_phases(m, delta, phases):
    c = build_constellation(m, delta)
    assert c.phases == phases


@pytest.mark.parametrize("m", [2, 4, 8, 16, 32])
@pytest.mark.parametrize("delta", [45, 90, 180, 360])
def test_constellation_invariants(m, delta):
    c = build_constellation(m, delta)
    assert np.allclose(np.diff(c.phases), delta / m)
    assert all(-delta / 2 < p < delta / 2 for p in c.phases)
    assert abs(sum(c.phases)) < 1e-9
    for a, b in zip(c.labels, c.labels[1:]):
        assert sum(x != y for x, y in zip(a, b)) == 1
    assert len(set(c.labels)) == m


@pytest.mark.parametrize("m, delta", [(3, 90), (0, 90), (4, 0), (4, 361)])
def test_constellation_rejects(m, delta):
    with pytest.raises(ConfigurationError):
        build_constellation(m, delta)


def test_encode_single_bit():
    c = build_constellation(2, 360)
    s = encode_bits("0", c, 2)
    assert s.symbols == (0,) and c.phases[0] == -90.0


@pytest.mark.parametrize("m", [2, 4, 8])
def test_encode_all_zero_bits(m):
    c = build_constellation(m, 360)
    n = 5
    s = encode_bits([0] * ((n - 1) * c.bits_per_symbol), c, n)
    zero = c.labels.index("0" * c.bits_per_symbol)
    assert s.symbols == (zero,) * (n - 1)


def test_encode_length_mismatch():
    with pytest.raises(ConfigurationError):
        encode_bits("101", build_constellation(4, 360), 3)


def test_phases_worked_example():
    # symbol steps back-derived from the printed six-tone phase list
    c = build_constellation(4, 360)
    idx = [c.phases.index(p) for p in (-45.0, 135.0, 135.0, 135.0, 45.0)]
    assert np.allclose(phases_from_symbols(idx, c), [0, -45, 90, -135, 0, 45])


def test_phases_single_symbol():
    assert np.allclose(phases_from_steps([90.0]), [0, 90])
    assert np.allclose(phases_from_steps([0.0, 0.0, 0.0]), 0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-180, 180, allow_nan=False), min_size=1, max_size=20))
def test_phase_wrap_property(steps):
    phi = phases_from_steps(steps)
    assert np.all(phi > -180) and np.all(phi <= 180)
    diffs = np.diff(phi)
    assert np.allclose(wrap_deg(diffs - np.asarray(steps)), 0, atol=1e-9)


def test_wrap_edges():
    assert wrap_deg(180.0) == 180.0
    assert wrap_deg(-180.0) == 180.0
    assert wrap_deg(540.0) == 180.0
    assert wrap_deg(-190.0) == 170.0


def test_mirror_symmetry_negates_phases():
    c = build_constellation(8, 270)
    rng = np.random.default_rng(3)
    for _ in range(50):
        idx = rng.integers(0, 8, 7)
        a = phases_from_symbols(idx, c)
        b = phases_from_symbols(7 - idx, c)
        assert np.allclose(wrap_deg(a + b), 0, atol=1e-9)


def test_default_sample_rate(plan6):
    assert default_sample_rate(plan6) == 16384 * 1e6


def test_tone_amplitude_example():
    assert tone_amplitude(-10, 5, 50) == pytest.approx(math.sqrt(2 * 50 * 1e-4 / 5))
    assert tone_amplitude(-10, 5, 50) == pytest.approx(44.72e-3, rel=1e-4)


@pytest.mark.parametrize("p_in", [-30, -10, 0])
def test_average_power_matches_closed_form(plan5, p_in, rng):
    phi = rng.uniform(-180, 180, plan5.n)
    w = synthesize(plan5, phi, p_in)
    a = w.meta["amplitude"]
    closed = plan5.n * a * a / (2 * w.z0)
    assert w.average_power() == pytest.approx(closed, rel=1e-9)
    assert 10 * np.log10(w.average_power() / 1e-3) == pytest.approx(p_in, abs=0.01)


def test_two_aligned_tones_peak_is_2a():
    from mtpsk.freqplan import plan_frequencies

    plan = plan_frequencies(2.45e9, 2, 1e6, 0)
    w = synthesize(plan, [0, 0], -10)
    assert np.max(np.abs(w.samples)) == pytest.approx(2 * w.meta["amplitude"], rel=1e-12)


def test_antiperiodic_waveform(plan6):
    from mtpsk.freqplan import plan_frequencies

    plan = plan_frequencies(2.45e9, 3, 1e6, 0)
    w = synthesize(plan, [0, 30, 60], -10, n_periods=2)
    spp = w.samples_per_period
    assert w.antiperiodic
    assert np.allclose(w.samples[spp:], -w.samples[:spp], atol=1e-12)
    assert np.allclose(w.extended(2), w.samples)


def test_synthesize_sampling_errors(plan6):
    with pytest.raises(SamplingError):
        synthesize(plan6, np.zeros(6), -10, sample_rate=16384.5e6)
    with pytest.raises(SamplingError):
        synthesize(plan6, np.zeros(6), -10, sample_rate=4096e6)


def test_papr_single_tone():
    spp = 16384
    m = np.arange(spp)
    w = Waveform(samples=np.cos(2 * np.pi * 2451 * m / spp + 0.3), sample_rate=spp * 1e6, period=1e-6)
    assert papr(w) == pytest.approx(2.0, rel=1e-3)


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_papr_aligned_is_2n(n):
    from mtpsk.freqplan import plan_frequencies

    plan = plan_frequencies(2.45e9, n, 1e6, 0)
    assert papr(synthesize(plan, np.zeros(n), -10)) == pytest.approx(2 * n, rel=0.01)


def test_papr_zero_power():
    w = Waveform(samples=np.zeros(64), sample_rate=64e6, period=1e-6)
    with pytest.raises(ConfigurationError):
        papr(w)


def test_papr_and_power_invariant_to_global_phase(plan5, rng):
    phi = rng.uniform(-180, 180, plan5.n)
    a = synthesize(plan5, phi, -10)
    b = synthesize(plan5, phi + 77.0, -10)
    assert papr(a) == pytest.approx(papr(b), rel=2e-3)
    assert a.average_power() == pytest.approx(b.average_power(), rel=1e-9)


def test_waveform_file_round_trip(tmp_path, plan6):
    w = synthesize(plan6, np.arange(6) * 10.0, -10)
    path = tmp_path / "w.bin"
    write_waveform(path, w)
    header_line = path.read_bytes().split(b"\n", 1)[0]
    import json

    assert set(json.loads(header_line)) == {"sample_rate_hz", "period_s", "z0_ohm", "n_samples"}
    back = read_waveform(path)
    assert np.array_equal(back.samples, w.samples)
    assert back.sample_rate == w.sample_rate and back.period == w.period and back.z0 == w.z0
