"""Constellation, gray mapping, cumulative tone phases, passband synthesis and PAPR."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, SamplingError
from .freqplan import FrequencyPlan

DEFAULT_Z0 = 50.0


def wrap_deg(x):
    """Wrap degrees into (-180, 180]."""
    out = 180.0 - np.mod(180.0 - np.asarray(x, dtype=float), 360.0)
    return float(out) if np.ndim(out) == 0 else out


def gray(m: int) -> int:
    return m ^ (m >> 1)


@dataclass(frozen=True)
class Constellation:
    m: int
    delta: float
    phases: tuple[float, ...]
    labels: tuple[str, ...]

    @property
    def bits_per_symbol(self) -> int:
        return self.m.bit_length() - 1

    @property
    def margin(self) -> float:
        """Half-width of each symbol's decision region, in degrees."""
        return self.delta / (2 * self.m)

    def index_of_label(self, label: str) -> int:
        return self.labels.index(label)


def build_constellation(m: int, delta: float) -> Constellation:
    """Symmetric equidistant phases over [-delta/2, delta/2] with binary-reflected
    gray labels assigned in ascending phase order."""
    if m < 2 or m & (m - 1):
        raise ConfigurationError(f"modulation order must be a power of two >= 2, got {m}")
    if not 0 < delta <= 360:
        raise ConfigurationError(f"phase range must satisfy 0 < delta <= 360, got {delta}")
    width = m.bit_length() - 1
    phases = tuple((2 * (i + 1) - m - 1) * delta / (2 * m) for i in range(m))
    labels = tuple(format(gray(i), f"0{width}b") for i in range(m))
    return Constellation(m=m, delta=float(delta), phases=phases, labels=labels)


@dataclass(frozen=True)
class SymbolStream:
    symbols: tuple[int, ...]
    source_bits: tuple[int, ...]


def _as_bits(bits) -> tuple[int, ...]:
    if isinstance(bits, str):
        bits = [c for c in bits if not c.isspace()]
    out = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in out):
        raise ConfigurationError("bits must be 0 or 1")
    return out


def encode_bits(bits, c: Constellation, n: int) -> SymbolStream:
    bits = _as_bits(bits)
    bps = c.bits_per_symbol
    if len(bits) != (n - 1) * bps:
        raise ConfigurationError(
            f"{n} tones with M={c.m} carry {(n - 1) * bps} bits, got {len(bits)}"
        )
    lookup = {lab: i for i, lab in enumerate(c.labels)}
    symbols = tuple(
        lookup["".join(str(b) for b in bits[j : j + bps])] for j in range(0, len(bits), bps)
    )
    return SymbolStream(symbols=symbols, source_bits=bits)


def phases_from_symbols(s: SymbolStream | Sequence[int], c: Constellation) -> np.ndarray:
    """Tone phases in degrees: first tone at 0, each next tone advanced by its symbol."""
    symbols = s.symbols if isinstance(s, SymbolStream) else tuple(s)
    steps = np.array([c.phases[i] for i in symbols], dtype=float)
    return phases_from_steps(steps)


def phases_from_steps(steps) -> np.ndarray:
    phi = [0.0]
    for st in np.asarray(steps, dtype=float):
        phi.append(wrap_deg(phi[-1] + st))
    return np.array(phi)


def default_sample_rate(plan: FrequencyPlan) -> float:
    """Smallest power-of-two multiple of gcd that is at least 4x the top tone."""
    need = 4.0 * (plan.f_c + plan.bw / 2) / plan.gcd
    p = 1
    while p < need:
        p *= 2
    return p * plan.gcd


def dbm_to_watts(p_dbm: float) -> float:
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watts_to_dbm(p_w: float) -> float:
    return 10.0 * np.log10(p_w / 1e-3)


def tone_amplitude(p_in_dbm: float, n: int, z0: float = DEFAULT_Z0) -> float:
    return float(np.sqrt(2.0 * z0 * dbm_to_watts(p_in_dbm) / n))


@dataclass(frozen=True)
class Waveform:
    """Uniform samples covering ``n_periods`` symbol periods starting at t = 0."""

    samples: np.ndarray
    sample_rate: float
    period: float
    z0: float = DEFAULT_Z0
    antiperiodic: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def samples_per_period(self) -> int:
        return int(round(self.sample_rate * self.period))

    @property
    def n_periods(self) -> int:
        return len(self.samples) // self.samples_per_period

    def one_period(self) -> np.ndarray:
        return self.samples[: self.samples_per_period]

    def extended(self, n_periods: int) -> np.ndarray:
        """Continue the signal to ``n_periods`` periods, honoring antiperiodic sign flips.

        Only the first period of the stored samples is used.
        """
        base = self.one_period()
        parts = []
        for p in range(n_periods):
            parts.append(-base if (self.antiperiodic and p % 2) else base)
        return np.concatenate(parts)

    def repetition_block(self) -> np.ndarray:
        """One full repetition of the signal: one period, or two if antiperiodic."""
        return self.extended(2 if self.antiperiodic else 1)

    def average_power(self) -> float:
        x = self.one_period()
        return float(np.mean(x * x) / self.z0)

    def with_samples(self, samples: np.ndarray, **meta) -> "Waveform":
        return Waveform(
            samples=np.asarray(samples, dtype=float),
            sample_rate=self.sample_rate,
            period=self.period,
            z0=self.z0,
            antiperiodic=self.antiperiodic,
            meta={**self.meta, **meta},
        )


def check_sampling(plan: FrequencyPlan, sample_rate: float) -> int:
    spp = sample_rate / plan.gcd
    if abs(spp - round(spp)) > 1e-9 * spp:
        raise SamplingError(f"sample_rate {sample_rate} Hz is not an integer multiple of gcd")
    if sample_rate < 4.0 * (plan.f_c + plan.bw / 2):
        raise SamplingError(
            f"sample_rate {sample_rate} Hz is below 4 x top tone ({plan.f_c + plan.bw / 2} Hz)"
        )
    return int(round(spp))


def synthesize(
    plan: FrequencyPlan,
    phi_deg,
    p_in_dbm: float,
    sample_rate: float | None = None,
    z0: float = DEFAULT_Z0,
    n_periods: int = 1,
) -> Waveform:
    """Sum of equal-amplitude tones at the plan frequencies with the given phases.

    Carrier phase is computed from exact integer products so long time
    axes do not lose precision.
    """
    if sample_rate is None:
        sample_rate = default_sample_rate(plan)
    spp = check_sampling(plan, sample_rate)
    phi = np.radians(np.asarray(phi_deg, dtype=float))
    if phi.shape != (plan.n,):
        raise ConfigurationError(f"expected {plan.n} tone phases, got shape {phi.shape}")
    amp = tone_amplitude(p_in_dbm, plan.n, z0)

    # f_n * t = h_n * m / (2 * spp) with h_n the tone in gcd/2 units
    m = np.arange(spp * n_periods, dtype=np.int64)
    mod = 2 * spp
    x = np.zeros(m.size)
    for h, ph in zip(plan.tone_half_units, phi):
        cyc = (m * (h % mod)) % mod
        x += np.cos(2 * np.pi * cyc / mod + ph)
    x *= amp
    return Waveform(
        samples=x,
        sample_rate=float(sample_rate),
        period=1.0 / plan.gcd,
        z0=z0,
        antiperiodic=plan.antiperiodic,
        meta={"plan": plan, "phases_deg": np.degrees(phi), "p_in_dbm": p_in_dbm, "amplitude": amp},
    )


def papr(w: Waveform, oversample: int = 8) -> float:
    """Peak instantaneous power over the period-average power (linear ratio).

    The peak is searched on a band-limited interpolation of one full
    repetition, ``oversample`` times denser than the stored samples.
    """
    x = w.repetition_block()
    avg = float(np.mean(x * x))
    if avg <= 0:
        raise ConfigurationError("zero-power waveform has no PAPR")
    if oversample > 1:
        x = _interpolate_periodic(x, oversample)
    return float(np.max(x * x) / avg)


def _interpolate_periodic(x: np.ndarray, factor: int) -> np.ndarray:
    n = x.size
    spec = np.fft.rfft(x)
    if n % 2 == 0:
        spec[-1] *= 0.5  # split the Nyquist bin so the real interpolant stays symmetric
    return np.fft.irfft(spec, n * factor) * factor


def half_step_samples(x: np.ndarray) -> np.ndarray:
    """Values of a periodic band-limited signal midway between its samples."""
    return _interpolate_periodic(x, 2)[1::2]


def write_signal(path, samples: np.ndarray, sample_rate: float, period: float, z0: float | None) -> None:
    """One JSON header line, then little-endian float64 samples."""
    header = {
        "sample_rate_hz": float(sample_rate),
        "period_s": float(period),
        "z0_ohm": None if z0 is None else float(z0),
        "n_samples": int(len(samples)),
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode())
        fh.write(np.asarray(samples, dtype="<f8").tobytes())


def read_signal(path) -> tuple[dict, np.ndarray]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl])
    samples = np.frombuffer(raw[nl + 1 :], dtype="<f8")
    if samples.size != header["n_samples"]:
        raise ValueError(f"header says {header['n_samples']} samples, file holds {samples.size}")
    return header, samples.copy()


def write_waveform(path, w: Waveform) -> None:
    write_signal(path, w.samples, w.sample_rate, w.period, w.z0)


def read_waveform(path) -> Waveform:
    h, x = read_signal(path)
    spp = int(round(h["sample_rate_hz"] * h["period_s"]))
    # the header has no symmetry field; recover it when two periods are stored
    anti = x.size >= 2 * spp and np.allclose(x[spp : 2 * spp], -x[:spp]) and np.any(x[:spp])
    return Waveform(
        samples=x,
        sample_rate=h["sample_rate_hz"],
        period=h["period_s"],
        z0=h["z0_ohm"],
        antiperiodic=bool(anti),
    )
