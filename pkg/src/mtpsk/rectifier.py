"""Behavioral rectifiers turning the passband waveform into baseband DC plus IM2 tones."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Literal

import numba
import numpy as np

from .errors import ConfigurationError, IntegrationError
from .freqplan import FrequencyPlan
from .modem_tx import Waveform, dbm_to_watts, half_step_samples, read_signal, write_signal

Model = Literal["square_law", "diode_ode"]


@dataclass(frozen=True)
class RectifierConfig:
    model: Model = "square_law"
    k2: float = 1.0  # 1/V, square-law only
    i_s: float = 5e-6  # A
    n_ideality: float = 1.05
    v_t: float = 25.85e-3  # V
    c_out: float = 0.1e-12  # F
    r_load: float = 4.4e3  # ohm
    f_cutoff: float = 100e6  # Hz

    def __post_init__(self):
        if self.model not in ("square_law", "diode_ode"):
            raise ConfigurationError(f"unknown rectifier model {self.model!r}")
        for name in ("c_out", "r_load", "f_cutoff", "i_s", "n_ideality", "v_t"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")

    def check_plan(self, plan: FrequencyPlan) -> None:
        if not plan.bw < self.f_cutoff:
            raise ConfigurationError(
                f"f_cutoff {self.f_cutoff} Hz must exceed the plan bandwidth {plan.bw} Hz"
            )
        if not self.f_cutoff < plan.f_c - plan.bw / 2:
            raise ConfigurationError(f"f_cutoff {self.f_cutoff} Hz must stay below the lowest tone")

    def settling_time(self, period: float) -> float:
        return max(5.0 * self.r_load * self.c_out, period)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "RectifierConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown rectifier fields: {sorted(extra)}")
        return cls(**{k: (v if k == "model" else float(v)) for k, v in d.items()})

    @classmethod
    def from_json(cls, text: str) -> "RectifierConfig":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class BasebandSignal:
    """Filtered rectifier output over whole periods, window starting at a period origin."""

    samples: np.ndarray
    sample_rate: float
    period: float
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dc(self) -> float:
        return float(np.mean(self.samples))

    @property
    def n_periods(self) -> int:
        return int(round(len(self.samples) / (self.sample_rate * self.period)))

    def tone(self, freq: float) -> complex:
        """Complex amplitude (peak volts, phase at window start) of the bin at ``freq``."""
        n = len(self.samples)
        k = int(round(freq * n / self.sample_rate))
        spec = np.fft.rfft(self.samples)
        return complex(2.0 * spec[k] / n) if k else complex(spec[0] / n)

    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Bin frequencies and one-sided complex amplitudes (peak volts)."""
        n = len(self.samples)
        spec = np.fft.rfft(self.samples) / n
        spec[1:] *= 2.0
        return np.fft.rfftfreq(n, 1.0 / self.sample_rate), spec

    def write(self, path) -> None:
        write_signal(path, self.samples, self.sample_rate, self.period, None)

    @classmethod
    def read(cls, path) -> "BasebandSignal":
        h, x = read_signal(path)
        return cls(samples=x, sample_rate=h["sample_rate_hz"], period=h["period_s"])


def brickwall_lowpass(x: np.ndarray, sample_rate: float, f_cutoff: float) -> np.ndarray:
    """Zero every bin above ``f_cutoff``; the window must hold whole periods."""
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(x.size, 1.0 / sample_rate)
    spec[freqs > f_cutoff] = 0.0
    return np.fft.irfft(spec, x.size)


def rectify_square_law(w: Waveform, cfg: RectifierConfig) -> BasebandSignal:
    if cfg.model != "square_law":
        raise ConfigurationError("rectify_square_law needs a square_law config")
    spp = w.samples_per_period
    n = (len(w.samples) // spp) * spp
    if n == 0 or n != len(w.samples):
        raise ConfigurationError("waveform must span whole periods")
    y = cfg.k2 * w.samples * w.samples
    y = brickwall_lowpass(y, w.sample_rate, cfg.f_cutoff)
    return BasebandSignal(samples=y, sample_rate=w.sample_rate, period=w.period, meta={"model": "square_law"})


def square_law_envelope(w: Waveform, cfg: RectifierConfig) -> BasebandSignal:
    """Fast path: k2/2 |complex envelope|^2, computed straight from tone phases."""
    plan: FrequencyPlan = w.meta["plan"]
    phi = np.radians(w.meta["phases_deg"])
    amp = w.meta["amplitude"]
    spp = w.samples_per_period
    t = np.arange(spp) / w.sample_rate
    offsets = np.asarray(plan.offsets_half_units) * plan.gcd / 2
    env = np.zeros(spp, dtype=complex)
    for f, ph in zip(offsets, phi):
        env += amp * np.exp(1j * (2 * np.pi * f * t + ph))
    y = 0.5 * cfg.k2 * np.abs(env) ** 2
    y = brickwall_lowpass(y, w.sample_rate, cfg.f_cutoff)
    return BasebandSignal(samples=y, sample_rate=w.sample_rate, period=w.period, meta={"model": "square_law"})


STEP_TOL = 1e-6  # V, step-doubling tolerance per sample interval
MAX_SPLIT = 256  # beyond this an interval is crossed implicitly
IMPLICIT_SUB = 32


@numba.njit(cache=True)
def _slope(y, x, i_s, nvt, inv_c, r_load):
    return (i_s * (math.exp((x - y) / nvt) - 1.0) - y / r_load) * inv_c


@numba.njit(cache=True)
def _quad(a, b, e, s):
    # input at fraction s of the interval, through (0, a), (1/2, b), (1, e)
    return a * (2.0 * s - 1.0) * (s - 1.0) + b * 4.0 * s * (1.0 - s) + e * s * (2.0 * s - 1.0)


@numba.njit(cache=True)
def _rk4_span(y, a, b, e, nsub, dt, i_s, nvt, inv_c, r_load):
    """Cross one sample interval in ``nsub`` RK4 substeps."""
    h = dt / nsub
    for j in range(nsub):
        s0 = j / nsub
        s1 = (j + 1) / nsub
        x0 = _quad(a, b, e, s0)
        xm = _quad(a, b, e, 0.5 * (s0 + s1))
        x1 = _quad(a, b, e, s1)
        k1 = _slope(y, x0, i_s, nvt, inv_c, r_load)
        k2 = _slope(y + 0.5 * h * k1, xm, i_s, nvt, inv_c, r_load)
        k3 = _slope(y + 0.5 * h * k2, xm, i_s, nvt, inv_c, r_load)
        k4 = _slope(y + h * k3, x1, i_s, nvt, inv_c, r_load)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


@numba.njit(cache=True)
def _implicit_solve(c, x, k, i_s, nvt, inv_c, r_load):
    """Solve g(z) = z - c - k f(z, x) = 0 for k > 0.

    g is strictly increasing in z, so the root is bracketed by walking out
    from c and then polished with safeguarded Newton.
    """
    lo = c
    hi = c
    d = 1e-3
    g0 = -k * _slope(c, x, i_s, nvt, inv_c, r_load)
    if g0 == 0.0:
        return c
    if g0 < 0.0:
        hi = c + d
        while hi - c - k * _slope(hi, x, i_s, nvt, inv_c, r_load) < 0.0:
            lo = hi
            d *= 2.0
            hi = c + d
    else:
        lo = c - d
        while lo - c - k * _slope(lo, x, i_s, nvt, inv_c, r_load) > 0.0:
            hi = lo
            d *= 2.0
            lo = c - d
    z = 0.5 * (lo + hi)
    for _ in range(200):
        ex = i_s * math.exp((x - z) / nvt)
        g = z - c - k * ((ex - i_s) - z / r_load) * inv_c
        if g > 0.0:
            hi = z
        else:
            lo = z
        dg = 1.0 + k * inv_c * (ex / nvt + 1.0 / r_load)
        zn = z - g / dg
        if not (zn > lo and zn < hi):
            zn = 0.5 * (lo + hi)
        if abs(zn - z) <= 1e-15 + 1e-13 * abs(z):
            return zn
        z = zn
    return z


TRBDF2_G = 2.0 - math.sqrt(2.0)


@numba.njit(cache=True)
def _implicit_span(y, a, b, e, dt, i_s, nvt, inv_c, r_load):
    """Cross one sample interval with L-stable TR-BDF2 substeps."""
    g = TRBDF2_G
    w_mid = 1.0 / (g * (2.0 - g))
    w_old = (1.0 - g) ** 2 / (g * (2.0 - g))
    k2 = (1.0 - g) / (2.0 - g)
    h = dt / IMPLICIT_SUB
    for j in range(IMPLICIT_SUB):
        s0 = j / IMPLICIT_SUB
        x0 = _quad(a, b, e, s0)
        xg = _quad(a, b, e, s0 + g / IMPLICIT_SUB)
        x1 = _quad(a, b, e, (j + 1) / IMPLICIT_SUB)
        f0 = _slope(y, x0, i_s, nvt, inv_c, r_load)
        yg = _implicit_solve(y + 0.5 * g * h * f0, xg, 0.5 * g * h, i_s, nvt, inv_c, r_load)
        y = _implicit_solve(w_mid * yg - w_old * y, x1, k2 * h, i_s, nvt, inv_c, r_load)
    return y


@numba.njit(cache=True)
def _rk4_diode(v, vh, dt, i_s, nvt, c_out, r_load, v_lo, v_hi, y0, tol):
    """RK4 on dV/dt = (I_d(v_in - V) - V / R) / C, one step per sample.

    ``v`` holds len(vh) + 1 input samples, ``vh`` the midpoint inputs. An
    interval whose single step disagrees with two half steps by more than
    ``tol`` is split further; past MAX_SPLIT substeps (stiff forward
    conduction under noisy drive) it falls back to implicit substeps.
    Returns (trajectory, failing step or -1).
    """
    n = vh.size
    out = np.empty(n + 1)
    y = y0
    out[0] = y
    inv_c = 1.0 / c_out
    for m in range(n):
        a = v[m]
        b = vh[m]
        e = v[m + 1]
        # stiffness dt |df/dy| at the strongest drive; RK4 is stable below ~2.78
        x_max = max(a, b, e)
        stiff = dt * inv_c * (i_s / nvt * math.exp(min((x_max - y) / nvt, 700.0)) + 1.0 / r_load)
        nsub = 1
        coarse = _rk4_span(y, a, b, e, 1, dt, i_s, nvt, inv_c, r_load)
        converged = False
        if stiff > 2.0 * MAX_SPLIT:
            nsub = MAX_SPLIT
        while nsub < MAX_SPLIT:
            fine = _rk4_span(y, a, b, e, 2 * nsub, dt, i_s, nvt, inv_c, r_load)
            if abs(fine - coarse) <= tol:
                converged = True
                break
            nsub *= 2
            coarse = fine
        if not converged:
            y = _implicit_span(y, a, b, e, dt, i_s, nvt, inv_c, r_load)
        elif nsub == 1:
            y = coarse
        else:
            y = fine
        if not (y >= v_lo and y <= v_hi):
            out[m + 1] = y
            return out, m
        out[m + 1] = y
    return out, -1


def _interval_peak(v: np.ndarray, vh: np.ndarray) -> float:
    """Largest |input| the integrator can see, including the quadratic between samples."""
    a, b, e = v[:-1], vh, v[1:]
    qa = 2.0 * a - 4.0 * b + 2.0 * e  # p(s) = qa s^2 + qb s + a
    qb = -3.0 * a + 4.0 * b - e
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.clip(np.where(qa != 0, -qb / (2.0 * qa), 0.0), 0.0, 1.0)
    vertex = (qa * s + qb) * s + a
    return float(max(np.max(np.abs(v)), np.max(np.abs(b)), np.max(np.abs(vertex))))


def rectify_diode(
    w: Waveform, cfg: RectifierConfig, v_initial: float = 0.0, step_tol: float = STEP_TOL
) -> BasebandSignal:
    """Single-diode peak detector into an RC load, integrated at the waveform sample rate.

    Timeline, in whole periods: one soft-start period where the input ramps
    linearly from zero, then the settling interval max(5 R C, one period)
    rounded up, then one analysis period that is low-passed and returned.
    """
    if cfg.model != "diode_ode":
        raise ConfigurationError("rectify_diode needs a diode_ode config")
    spp = w.samples_per_period
    settle = math.ceil(cfg.settling_time(w.period) / w.period - 1e-9)
    total = 1 + settle + 1

    # interpolate on one full repetition, then tile it
    block = w.repetition_block()
    block_h = half_step_samples(block)
    reps = math.ceil((total * spp + 1) / block.size)
    v = np.tile(block, reps)[: total * spp + 1]
    vh = np.tile(block_h, reps)[: total * spp]

    ramp = np.minimum(np.arange(v.size) / spp, 1.0)
    ramp_h = np.minimum((np.arange(vh.size) + 0.5) / spp, 1.0)
    v = v * ramp
    vh = vh * ramp_h

    peak = max(_interval_peak(v, vh), abs(v_initial))
    v_hi = peak * 1.01 + 1e-9
    v_lo = -(cfg.i_s * cfg.r_load) * 1.01 - 0.01 * peak - 1e-9
    traj, bad = _rk4_diode(
        v, vh, 1.0 / w.sample_rate, cfg.i_s, cfg.n_ideality * cfg.v_t, cfg.c_out, cfg.r_load, v_lo, v_hi, float(v_initial),
        step_tol,
    )
    if bad >= 0:
        raise IntegrationError(
            bad,
            f"output voltage {traj[bad + 1]!r} left the physical range "
            f"[{v_lo:.4g}, {v_hi:.4g}] V; the time step is too large for c_out={cfg.c_out}",
        )
    y = traj[(total - 1) * spp : total * spp]
    y = brickwall_lowpass(y, w.sample_rate, cfg.f_cutoff)
    return BasebandSignal(
        samples=y,
        sample_rate=w.sample_rate,
        period=w.period,
        meta={"model": "diode_ode", "settle_periods": settle},
    )


def rectify(w: Waveform, cfg: RectifierConfig) -> BasebandSignal:
    if cfg.model == "square_law":
        return rectify_square_law(w, cfg)
    return rectify_diode(w, cfg)


def pce(b: BasebandSignal | float, cfg: RectifierConfig, p_in_dbm: float) -> float:
    """DC power into the load over input power, in percent."""
    p_in = dbm_to_watts(p_in_dbm)
    if not p_in > 0 or not math.isfinite(p_in):
        raise ConfigurationError("input power must be positive")
    dc = b.dc if isinstance(b, BasebandSignal) else float(b)
    return dc * dc / cfg.r_load / p_in * 100.0
