"""IM2 phase extraction, symbol decisions, gray decoding and BER."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .freqplan import FrequencyPlan
from .modem_tx import Constellation, wrap_deg
from .rectifier import BasebandSignal

ERASURE_FLOOR = 1e-12  # volts
TIE_TOL = 1e-9  # degrees


@dataclass(frozen=True)
class ExtractedPhases:
    phases: np.ndarray  # degrees, one per consecutive spacing
    amplitudes: np.ndarray  # peak volts
    erased: np.ndarray  # bool


def extract_tone_phases(
    b: BasebandSignal,
    plan: FrequencyPlan,
    floor: float = ERASURE_FLOOR,
    timing_offset: float = 0.0,
) -> ExtractedPhases:
    """Phase of the baseband bin at each consecutive spacing, in plan order.

    The window must start on a period origin. ``timing_offset`` shifts the
    analysis origin by that many seconds, for sensitivity studies.
    """
    n = len(b.samples)
    spp = b.sample_rate * b.period
    if abs(n / spp - round(n / spp)) > 1e-9 or n < spp - 0.5:
        raise ConfigurationError("baseband window must span whole periods")
    periods = int(round(n / spp))
    spec = np.fft.rfft(b.samples) * (2.0 / n)
    bins = np.array(plan.k) * periods
    z = spec[bins]
    if timing_offset:
        z = z * np.exp(2j * np.pi * np.array(plan.k) * plan.gcd * timing_offset)
    amps = np.abs(z)
    erased = amps < floor
    phases = np.where(erased, 0.0, np.degrees(np.angle(z)))
    return ExtractedPhases(phases=wrap_deg(phases), amplitudes=amps, erased=erased)


def angular_distance(a, b):
    return np.abs(wrap_deg(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def decide_symbols(phases, c: Constellation) -> np.ndarray:
    """Nearest constellation point by wrapped distance; ties go to the lower index."""
    ph = np.atleast_1d(np.asarray(phases, dtype=float))
    d = angular_distance(ph[:, None], np.asarray(c.phases)[None, :])
    best = d.min(axis=1, keepdims=True)
    return np.argmax(d <= best + TIE_TOL, axis=1)


def margin_decisions(phases, c: Constellation) -> np.ndarray:
    """Index of the point whose +-delta/(2M) margin holds each phase, or -1 if none."""
    ph = np.atleast_1d(np.asarray(phases, dtype=float))
    d = angular_distance(ph[:, None], np.asarray(c.phases)[None, :])
    inside = d <= c.margin + TIE_TOL
    return np.where(inside.any(axis=1), np.argmax(inside, axis=1), -1)


def decode_bits(symbols: Sequence[int], c: Constellation) -> tuple[int, ...]:
    return tuple(int(ch) for s in symbols for ch in c.labels[int(s)])


def ber(tx_bits, rx_bits) -> float:
    tx = np.asarray(tx_bits, dtype=int)
    rx = np.asarray(rx_bits, dtype=int)
    if tx.shape != rx.shape:
        raise ValueError(f"bit streams differ in length: {tx.size} vs {rx.size}")
    if tx.size == 0:
        return 0.0
    return float(np.count_nonzero(tx != rx) / tx.size)


@dataclass(frozen=True)
class DemodReport:
    extracted_phases: tuple[float, ...]
    decided_symbols: tuple[int, ...]
    bits: tuple[int, ...]
    per_symbol_phase_error: tuple[float, ...]
    erased: tuple[bool, ...]
    out_of_margin: tuple[bool, ...]

    def to_json(self, **kw) -> str:
        return json.dumps(asdict(self), **kw)


def demodulate(
    b: BasebandSignal,
    plan: FrequencyPlan,
    c: Constellation,
    sent_symbols: Sequence[int] | None = None,
    floor: float = ERASURE_FLOOR,
    timing_offset: float = 0.0,
) -> DemodReport:
    ex = extract_tone_phases(b, plan, floor=floor, timing_offset=timing_offset)
    sym = decide_symbols(ex.phases, c)
    sym = np.where(ex.erased, 0, sym)
    if sent_symbols is not None:
        ref = np.asarray([c.phases[s] for s in sent_symbols])
        err = wrap_deg(ex.phases - ref)
    else:
        err = wrap_deg(ex.phases - np.asarray(c.phases)[sym])
    oom = (margin_decisions(ex.phases, c) < 0) | ex.erased
    return DemodReport(
        extracted_phases=tuple(float(p) for p in ex.phases),
        decided_symbols=tuple(int(s) for s in sym),
        bits=decode_bits(sym, c),
        per_symbol_phase_error=tuple(float(e) for e in np.atleast_1d(err)),
        erased=tuple(bool(e) for e in ex.erased),
        out_of_margin=tuple(bool(o) for o in oom),
    )


def strict_bits(report: DemodReport, tx_bits, c: Constellation) -> tuple[int, ...]:
    """Decoded bits with every out-of-margin or erased symbol forced fully wrong."""
    bps = c.bits_per_symbol
    rx = list(report.bits)
    for i, bad in enumerate(report.out_of_margin):
        if bad:
            for j in range(i * bps, (i + 1) * bps):
                rx[j] = 1 - int(tx_bits[j])
    return tuple(rx)


def write_scatter_csv(path, rows) -> None:
    """rows: iterables of (stream, position, true_phase_deg, extracted_phase_deg, amplitude_v)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stream", "position", "true_phase_deg", "extracted_phase_deg", "amplitude_v"])
        for r in rows:
            w.writerow([r[0], r[1], f"{r[2]:.6f}", f"{r[3]:.6f}", f"{r[4]:.9g}"])
