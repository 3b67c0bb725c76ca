import math

import numpy as np
import pytest

from mtpsk.errors import ConfigurationError, IntegrationError
from mtpsk.freqplan import plan_frequencies
from mtpsk.modem_tx import Waveform, synthesize, wrap_deg
from mtpsk.rectifier import (
    BasebandSignal,
    RectifierConfig,
    pce,
    rectify_diode,
    rectify_square_law,
    square_law_envelope,
)

from .oracles import square_law_expansion

SQ = RectifierConfig(model="square_law", k2=2.5)
DIODE = RectifierConfig(model="diode_ode")


def baseband_lines(b):
    freqs, spec = b.spectrum()
    return freqs, spec


def single_tone(amp, cycles=2450, spp=16384):
    m = np.arange(spp)
    return Waveform(samples=amp * np.cos(2 * np.pi * cycles * m / spp + 0.4), sample_rate=spp * 1e6, period=1e-6)


def test_single_tone_square_law():
    a = 0.05
    b = rectify_square_law(single_tone(a), SQ)
    assert b.dc == pytest.approx(SQ.k2 * a * a / 2, rel=1e-12)
    _, spec = b.spectrum()
    assert np.max(np.abs(spec[1:])) < 1e-12 * b.dc


@pytest.mark.parametrize("phi", [(0.0, 0.0), (10.0, 80.0), (-170.0, 150.0)])
def test_two_tone_square_law(phi):
    plan = plan_frequencies(2.45e9, 2, 1e6, 0)
    w = synthesize(plan, phi, -10)
    a = w.meta["amplitude"]
    b = rectify_square_law(w, SQ)
    assert b.dc == pytest.approx(SQ.k2 * a * a, rel=1e-12)
    z = b.tone(1e6)
    assert abs(z) == pytest.approx(SQ.k2 * a * a, rel=1e-9)
    assert wrap_deg(np.degrees(np.angle(z)) - (phi[1] - phi[0])) == pytest.approx(0, abs=1e-6)


def test_three_tone_lines():
    plan = plan_frequencies(2.45e9, 3, 1e6, 0)
    phi = (0.0, 30.0, 90.0)
    w = synthesize(plan, phi, -10)
    a = w.meta["amplitude"]
    b = rectify_square_law(w, SQ)
    for f, expect in ((1e6, 30.0), (2e6, 60.0), (3e6, 90.0)):
        z = b.tone(f)
        assert abs(z) == pytest.approx(SQ.k2 * a * a, rel=1e-9)
        assert np.degrees(np.angle(z)) == pytest.approx(expect, abs=1e-6)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_square_law_matches_trig_expansion(n, rng):
    plan = plan_frequencies(2.45e9, n, 1e6, 0)
    for _ in range(5):
        phi = rng.uniform(-180, 180, n)
        w = synthesize(plan, phi, -10)
        b = rectify_square_law(w, SQ)
        dc, lines = square_law_expansion(plan.tones, phi, w.meta["amplitude"], SQ.k2, SQ.f_cutoff)
        freqs, spec = b.spectrum()
        assert b.dc == pytest.approx(dc, rel=1e-9)
        ref = np.zeros_like(spec)
        for d, z in lines.items():
            ref[int(round(d / 1e6))] = z
        scale = SQ.k2 * w.meta["amplitude"] ** 2
        assert np.max(np.abs(spec[1:] - ref[1:])) < 1e-9 * scale


@pytest.mark.parametrize("n", [3, 5, 6])
def test_envelope_fast_path(n, rng):
    plan = plan_frequencies(2.45e9, n, 1e6, 0)
    phi = rng.uniform(-180, 180, n)
    w = synthesize(plan, phi, -10)
    slow = rectify_square_law(w, SQ).samples
    fast = square_law_envelope(w, SQ).samples
    assert np.max(np.abs(slow - fast)) < 1e-9 * np.max(np.abs(slow))


def test_im2_phase_additivity(plan6, rng):
    for _ in range(10):
        phi = rng.uniform(-180, 180, 6)
        b = rectify_square_law(synthesize(plan6, phi, -10), SQ)
        for i, k in enumerate(plan6.k):
            got = np.degrees(np.angle(b.tone(k * 1e6)))
            assert wrap_deg(got - (phi[i + 1] - phi[i])) == pytest.approx(0, abs=1e-6)


@pytest.mark.parametrize("cfg", [SQ, DIODE])
def test_filter_rejects_above_cutoff(plan5, cfg):
    w = synthesize(plan5, [0, 20, 40, 60, 80], -10)
    b = rectify_square_law(w, cfg) if cfg.model == "square_law" else rectify_diode(w, cfg)
    freqs, spec = b.spectrum()
    total = np.sum(np.abs(spec) ** 2)
    assert np.sum(np.abs(spec[freqs > cfg.f_cutoff]) ** 2) < 1e-8 * total


def test_diode_zero_input_decays():
    w = single_tone(0.0)
    b = rectify_diode(w, DIODE, v_initial=0.5)
    assert abs(b.dc) < 1e-9
    assert np.max(np.abs(b.samples)) < 1e-9


def test_diode_single_tone_dc_increases_with_power():
    dcs = [rectify_diode(single_tone(a), DIODE).dc for a in (0.01, 0.03, 0.1, 0.2)]
    assert dcs[0] > 0
    assert all(b > a for a, b in zip(dcs, dcs[1:]))


def test_diode_dc_monotone_in_power(plan6):
    phi = [0, -45, 90, -135, 0, 45]
    dcs = [rectify_diode(synthesize(plan6, phi, p), DIODE).dc for p in range(-30, 1, 3)]
    assert all(b >= a for a, b in zip(dcs, dcs[1:]))


def test_diode_aligned_beats_random(plan6):
    from mtpsk.harness import TrialConfig, run_trial

    base = TrialConfig(rectifier=DIODE, p_in_dbm=0.0, seed=11)
    aligned = run_trial(TrialConfig(rectifier=DIODE, p_in_dbm=0.0, delta_deg=0, seed=11), 0).dc_v
    rand = np.mean([run_trial(base, s).dc_v for s in range(20)])
    assert aligned >= rand
    # regression baseline for this seed (volts)
    assert aligned - rand == pytest.approx(0.00541275028, rel=1e-6)


def test_diode_unstable_step_raises(plan6):
    # with step control disabled the stiff forward conduction blows up
    w = synthesize(plan6, np.zeros(6), 5.0)
    with pytest.raises(IntegrationError) as info:
        rectify_diode(w, DIODE, step_tol=math.inf)
    assert info.value.step >= 0
    assert "step" in str(info.value)


def test_diode_step_control_converges(plan6):
    w = synthesize(plan6, np.zeros(6), 5.0)
    coarse = rectify_diode(w, DIODE).dc
    fine = rectify_diode(w, DIODE, step_tol=1e-8).dc
    assert coarse == pytest.approx(fine, rel=1e-4)


def test_diode_pce_baseline(plan6):
    from mtpsk.harness import TrialConfig, run_trial

    cfg = TrialConfig(rectifier=DIODE, p_in_dbm=-6.0, n_tones=6, m_order=4, delta_deg=360, seed=0)
    mean = np.mean([run_trial(cfg, s).pce_pct for s in range(10)])
    # behavioral model without a matching network: sub-percent, far below the measured board
    assert mean == pytest.approx(0.303875422, rel=1e-6)


def test_pce_examples():
    assert pce(0.0, SQ, -10) == 0.0
    plan = plan_frequencies(2.45e9, 2, 1e6, 0)
    w = synthesize(plan, [0, 40], -10)
    a = w.meta["amplitude"]
    b = rectify_square_law(w, SQ)
    closed = (SQ.k2 * a * a) ** 2 / SQ.r_load / 1e-4 * 100
    assert pce(b, SQ, -10) == pytest.approx(closed, rel=1e-9)
    with pytest.raises(ConfigurationError):
        pce(b, SQ, float("-inf"))


def test_config_json_and_plan_checks(plan6):
    cfg = RectifierConfig(model="diode_ode", c_out=2e-12)
    assert RectifierConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ConfigurationError):
        RectifierConfig.from_dict({"model": "square_law", "bogus": 1})
    with pytest.raises(ConfigurationError):
        RectifierConfig(model="tube")
    cfg.check_plan(plan6)
    with pytest.raises(ConfigurationError):
        RectifierConfig(f_cutoff=10e6).check_plan(plan6)
    with pytest.raises(ConfigurationError):
        RectifierConfig(f_cutoff=3e9).check_plan(plan6)


def test_wrong_model_rejected(plan6):
    w = synthesize(plan6, np.zeros(6), -10)
    with pytest.raises(ConfigurationError):
        rectify_square_law(w, DIODE)
    with pytest.raises(ConfigurationError):
        rectify_diode(w, SQ)


def test_baseband_file_round_trip(tmp_path, plan6):
    b = rectify_square_law(synthesize(plan6, np.zeros(6), -10), SQ)
    b.write(tmp_path / "b.bin")
    back = BasebandSignal.read(tmp_path / "b.bin")
    assert np.array_equal(back.samples, b.samples) and back.sample_rate == b.sample_rate
