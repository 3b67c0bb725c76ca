"""End-to-end trials, parameter sweeps, throughput and result export."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache
from typing import Any, Mapping, Sequence

import numpy as np

from .demod import ber as bit_error_rate
from .demod import demodulate
from .errors import ConfigurationError, TrialError
from .freqplan import FrequencyPlan, plan_frequencies
from .modem_tx import (
    DEFAULT_Z0,
    Waveform,
    build_constellation,
    encode_bits,
    phases_from_symbols,
    papr,
    synthesize,
)
from .rectifier import RectifierConfig, pce, rectify

SWEEP_COLUMNS = (
    "n_tones",
    "m_order",
    "delta_deg",
    "p_in_dbm",
    "model",
    "mean_papr_db",
    "mean_pce_pct",
    "ber",
    "streams",
    "seed",
)


@dataclass(frozen=True)
class TrialConfig:
    """One experiment point. ``delta_deg = 0`` is the aligned-phase reference,
    which carries no payload."""

    f_c: float = 2.45e9
    n_tones: int = 6
    gcd: float = 1e6
    r: int = 0
    m_order: int = 4
    delta_deg: float = 360.0
    p_in_dbm: float = -6.0
    rectifier: RectifierConfig = field(default_factory=RectifierConfig)
    attenuation_db: float = 0.0
    awgn_snr_db: float | None = None
    timing_offset_s: float | None = None
    streams: int = 100
    seed: int = 0
    z0: float = DEFAULT_Z0
    sample_rate: float | None = None

    def __post_init__(self):
        if self.streams < 1:
            raise ConfigurationError("streams must be >= 1")
        if self.attenuation_db < 0:
            raise ConfigurationError("attenuation_db must be >= 0")
        if not 0 <= self.delta_deg <= 360:
            raise ConfigurationError("delta_deg must lie in [0, 360]")
        if self.awgn_snr_db is not None and not math.isfinite(self.awgn_snr_db):
            raise ConfigurationError("awgn_snr_db must be finite")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if self.delta_deg > 0:
            build_constellation(self.m_order, self.delta_deg)

    @property
    def aligned(self) -> bool:
        return self.delta_deg == 0

    @property
    def plan(self) -> FrequencyPlan:
        return _plan(self.f_c, self.n_tones, self.gcd, self.r)

    def validate(self) -> None:
        plan = self.plan
        self.rectifier.check_plan(plan)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rectifier"] = self.rectifier.to_dict()
        return d


@lru_cache(maxsize=256)
def _plan(f_c: float, n: int, gcd: float, r: int) -> FrequencyPlan:
    return plan_frequencies(f_c, n, gcd, r)


def stream_seed(seed: int, stream_index: int, purpose: int = 0) -> np.random.SeedSequence:
    """Counter-based split: the stream's randomness depends only on (seed, index, purpose)."""
    return np.random.SeedSequence([seed, stream_index, purpose])


@dataclass(frozen=True)
class TrialReport:
    stream_index: int
    tx_bits: tuple[int, ...]
    rx_bits: tuple[int, ...]
    tone_phases_deg: tuple[float, ...]
    extracted_phases_deg: tuple[float, ...]
    papr: float
    dc_v: float
    pce_pct: float
    ber: float
    ber_strict: float
    erasures: int
    out_of_margin: int
    p_rx_dbm: float

    @property
    def papr_db(self) -> float:
        return 10.0 * math.log10(self.papr)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def add_awgn(w: Waveform, snr_db: float, seed, band_hz: float | None = None) -> Waveform:
    """Add white Gaussian noise whose power inside the signal band is ``snr_db``
    below the waveform's average power.

    The band defaults to the plan bandwidth plus one gcd (every tone bin).
    """
    if not math.isfinite(snr_db):
        raise ConfigurationError("snr_db must be finite")
    if band_hz is None:
        plan: FrequencyPlan = w.meta["plan"]
        band_hz = plan.bw + plan.gcd
    p_sig = float(np.mean(w.one_period() ** 2))
    var = p_sig / 10.0 ** (snr_db / 10.0) * (w.sample_rate / 2.0) / band_hz
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, math.sqrt(var), size=w.samples.size)
    return w.with_samples(w.samples + noise, awgn_snr_db=snr_db)


def inband_noise_power(noise: np.ndarray, w: Waveform) -> float:
    """Mean-square value of ``noise`` restricted to the tone bins of one period."""
    plan: FrequencyPlan = w.meta["plan"]
    spp = w.samples_per_period
    periods = noise.size // spp
    spec = np.fft.rfft(noise[: periods * spp])
    lo = plan.tones[0] - plan.gcd / 2
    hi = plan.tones[-1] + plan.gcd / 2
    freqs = np.fft.rfftfreq(periods * spp, 1.0 / w.sample_rate)
    sel = (freqs > lo) & (freqs < hi)
    return float(2.0 * np.sum(np.abs(spec[sel]) ** 2) / (periods * spp) ** 2)


def attenuate(w: Waveform, attenuation_db: float) -> Waveform:
    if attenuation_db == 0:
        return w
    return w.with_samples(w.samples * 10.0 ** (-attenuation_db / 20.0))


def throughput(plan: FrequencyPlan, m: int) -> float:
    """Bits per second: N-1 symbols of log2(M) bits every 1/gcd seconds."""
    return (plan.n - 1) * math.log2(m) * plan.gcd


def run_trial(cfg: TrialConfig, stream_index: int) -> TrialReport:
    try:
        return _run_trial(cfg, stream_index)
    except TrialError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the stream attached
        raise TrialError(stream_index, exc) from exc


def _run_trial(cfg: TrialConfig, stream_index: int) -> TrialReport:
    plan = cfg.plan
    cfg.rectifier.check_plan(plan)
    rng = np.random.default_rng(stream_seed(cfg.seed, stream_index))

    if cfg.aligned:
        c = None
        tx_bits: tuple[int, ...] = ()
        phi = np.zeros(plan.n)
    else:
        c = build_constellation(cfg.m_order, cfg.delta_deg)
        tx_bits = tuple(int(b) for b in rng.integers(0, 2, (plan.n - 1) * c.bits_per_symbol))
        stream = encode_bits(tx_bits, c, plan.n)
        phi = phases_from_symbols(stream, c)

    w = synthesize(plan, phi, cfg.p_in_dbm, sample_rate=cfg.sample_rate, z0=cfg.z0)
    peak_ratio = papr(w)

    p_rx = cfg.p_in_dbm - cfg.attenuation_db
    rx = attenuate(w, cfg.attenuation_db)
    if cfg.awgn_snr_db is not None:
        rx = add_awgn(rx, cfg.awgn_snr_db, stream_seed(cfg.seed, stream_index, 1))

    b = rectify(rx, cfg.rectifier)
    eff = pce(b, cfg.rectifier, p_rx)

    if c is None:
        return TrialReport(
            stream_index=stream_index,
            tx_bits=(),
            rx_bits=(),
            tone_phases_deg=tuple(float(p) for p in phi),
            extracted_phases_deg=(),
            papr=peak_ratio,
            dc_v=b.dc,
            pce_pct=eff,
            ber=math.nan,
            ber_strict=math.nan,
            erasures=0,
            out_of_margin=0,
            p_rx_dbm=p_rx,
        )

    rep = demodulate(b, plan, c, sent_symbols=stream.symbols, timing_offset=cfg.timing_offset_s or 0.0)
    bps = c.bits_per_symbol
    rx_bits = list(rep.bits)
    strict = list(rep.bits)
    for i, (erased, oom) in enumerate(zip(rep.erased, rep.out_of_margin)):
        for j in range(i * bps, (i + 1) * bps):
            if erased:
                rx_bits[j] = 1 - tx_bits[j]
            if erased or oom:
                strict[j] = 1 - tx_bits[j]
    return TrialReport(
        stream_index=stream_index,
        tx_bits=tx_bits,
        rx_bits=tuple(rx_bits),
        tone_phases_deg=tuple(float(p) for p in phi),
        extracted_phases_deg=rep.extracted_phases,
        papr=peak_ratio,
        dc_v=b.dc,
        pce_pct=eff,
        ber=bit_error_rate(tx_bits, rx_bits),
        ber_strict=bit_error_rate(tx_bits, strict),
        erasures=sum(rep.erased),
        out_of_margin=sum(rep.out_of_margin),
        p_rx_dbm=p_rx,
    )


@dataclass
class PointResult:
    params: dict
    streams: int = 0
    mean_papr: float = math.nan
    mean_pce_pct: float = math.nan
    bit_errors: int = 0
    strict_bit_errors: int = 0
    bits: int = 0
    erasures: int = 0
    throughput_bps: float = math.nan
    failures: list = field(default_factory=list)

    @property
    def mean_papr_db(self) -> float:
        return 10.0 * math.log10(self.mean_papr) if self.mean_papr > 0 else math.nan

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else math.nan

    @property
    def ber_strict(self) -> float:
        return self.strict_bit_errors / self.bits if self.bits else math.nan


@dataclass
class SweepReport:
    axes: dict
    base: TrialConfig
    points: list[PointResult]

    def rows(self) -> list[dict]:
        out = []
        for p in self.points:
            cfg = p.params
            out.append(
                {
                    "n_tones": cfg["n_tones"],
                    "m_order": cfg["m_order"],
                    "delta_deg": cfg["delta_deg"],
                    "p_in_dbm": cfg["p_in_dbm"],
                    "model": cfg["model"],
                    "mean_papr_db": p.mean_papr_db,
                    "mean_pce_pct": p.mean_pce_pct,
                    "ber": p.ber,
                    "streams": p.streams,
                    "seed": cfg["seed"],
                }
            )
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in self.rows():
            w.writerow([_fmt(row[c]) for c in SWEEP_COLUMNS])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "axes": {k: list(v) for k, v in self.axes.items()},
            "base": self.base.to_dict(),
            "points": [
                {
                    **p.params,
                    "streams": p.streams,
                    "mean_papr_db": p.mean_papr_db,
                    "mean_pce_pct": p.mean_pce_pct,
                    "ber": p.ber,
                    "ber_strict": p.ber_strict,
                    "bits": p.bits,
                    "erasures": p.erasures,
                    "throughput_bps": p.throughput_bps,
                    "failures": p.failures,
                }
                for p in self.points
            ],
        }


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.10g}"
    return str(v)


_RECTIFIER_KEYS = {f.name for f in fields(RectifierConfig)}
_TRIAL_KEYS = {f.name for f in fields(TrialConfig)}


def apply_overrides(base: TrialConfig, overrides: Mapping[str, Any]) -> TrialConfig:
    """Replace TrialConfig fields; ``model`` and ``rectifier.<name>`` reach the rectifier."""
    top: dict[str, Any] = {}
    rect: dict[str, Any] = {}
    for key, val in overrides.items():
        name = key.split(".", 1)[1] if key.startswith("rectifier.") else key
        if key == "model" or key.startswith("rectifier."):
            if name not in _RECTIFIER_KEYS:
                raise ConfigurationError(f"unknown rectifier field {name!r}")
            rect[name] = val
        elif key in _TRIAL_KEYS and key != "rectifier":
            top[key] = val
        else:
            raise ConfigurationError(f"unknown trial field {key!r}")
    if rect:
        top["rectifier"] = replace(base.rectifier, **rect)
    return replace(base, **top)


def _run_point(cfg: TrialConfig, params: dict) -> PointResult:
    res = PointResult(params=params)
    try:
        cfg.validate()
        res.throughput_bps = throughput(cfg.plan, cfg.m_order)
    except Exception as exc:  # noqa: BLE001 - a bad point must not stop the sweep
        res.failures.append(f"{type(exc).__name__}: {exc}")
        return res
    paprs, pces = [], []
    for s in range(cfg.streams):
        try:
            rep = run_trial(cfg, s)
        except TrialError as exc:
            res.failures.append(str(exc))
            continue
        paprs.append(rep.papr)
        pces.append(rep.pce_pct)
        nbits = len(rep.tx_bits)
        res.bits += nbits
        res.bit_errors += int(round(rep.ber * nbits)) if nbits else 0
        res.strict_bit_errors += int(round(rep.ber_strict * nbits)) if nbits else 0
        res.erasures += rep.erasures
    res.streams = len(paprs)
    if paprs:
        res.mean_papr = math.fsum(paprs) / len(paprs)
        res.mean_pce_pct = math.fsum(pces) / len(pces)
    return res


def _point_params(cfg: TrialConfig) -> dict:
    return {
        "n_tones": cfg.n_tones,
        "m_order": cfg.m_order,
        "delta_deg": cfg.delta_deg,
        "p_in_dbm": cfg.p_in_dbm,
        "model": cfg.rectifier.model,
        "seed": cfg.seed,
    }


def sweep(base: TrialConfig, axes: Mapping[str, Sequence[Any]], workers: int = 1) -> SweepReport:
    """Run every point of the Cartesian grid over ``axes`` (first axis varies slowest)."""
    if not axes or any(len(v) == 0 for v in axes.values()):
        raise ConfigurationError("sweep grid is empty")
    names = list(axes)
    configs = []
    for combo in itertools.product(*(axes[n] for n in names)):
        cfg = apply_overrides(base, dict(zip(names, combo)))
        configs.append((cfg, _point_params(cfg)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            points = list(ex.map(_run_point, *zip(*configs)))
    else:
        points = [_run_point(cfg, params) for cfg, params in configs]
    return SweepReport(axes={n: list(axes[n]) for n in names}, base=base, points=points)


# ---- config files -------------------------------------------------------

_INT_KEYS = {"n_tones", "r", "m_order", "streams", "seed"}


def _parse_scalar(key: str, text: str):
    text = text.strip()
    name = key.split(".", 1)[-1]
    if name == "model":
        return text
    if text.lower() in ("none", "null", ""):
        return None
    if name in _INT_KEYS:
        return int(float(text)) if "e" in text.lower() else int(text)
    return float(text)


def parse_config(text: str) -> tuple[TrialConfig, dict]:
    """Parse ``key = value`` lines into a TrialConfig plus sweep axes.

    ``#`` starts a comment. Rectifier fields are written ``rectifier.<field>``
    (``model`` alone is accepted too). ``sweep.<field> = a, b, c`` declares an
    axis. Everything else is a TrialConfig field name.
    """
    overrides: dict[str, Any] = {}
    axes: dict[str, list] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key.startswith("sweep."):
            name = key[len("sweep.") :]
            axes[name] = [_parse_scalar(name, v) for v in val.split(",")]
        else:
            overrides[key] = _parse_scalar(key, val)
    cfg = apply_overrides(TrialConfig(), overrides)
    return cfg, axes


def load_config(path) -> tuple[TrialConfig, dict]:
    with open(path) as fh:
        return parse_config(fh.read())


def papr_monte_carlo(
    n_tones: int,
    m_order: int,
    delta_deg: float,
    streams: int,
    seed: int = 0,
    f_c: float = 2.45e9,
    gcd: float = 1e6,
    r: int = 0,
    p_in_dbm: float = -10.0,
    sample_rate: float | None = None,
) -> np.ndarray:
    """PAPR (linear) of ``streams`` random multitone-PSK waveforms; ``delta_deg = 0`` is aligned."""
    plan = _plan(f_c, n_tones, gcd, r)
    out = np.empty(streams)
    c = build_constellation(m_order, delta_deg) if delta_deg > 0 else None
    for s in range(streams):
        if c is None:
            phi = np.zeros(n_tones)
        else:
            rng = np.random.default_rng(stream_seed(seed, s))
            phi = phases_from_symbols(rng.integers(0, c.m, n_tones - 1), c)
        out[s] = papr(synthesize(plan, phi, p_in_dbm, sample_rate=sample_rate))
    return out
