"""Achievable tone-phase sets and their analytic / empirical densities.

Cumulative tone phases are sums of symbol phases; with symbols idealized
as continuous uniforms on [-delta/2, delta/2] the sum follows an Irwin-Hall
law, which is then folded onto the circle.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats

from .modem_tx import build_constellation, wrap_deg

N_BINS = 72
NORMAL_SWITCH = 40  # summands above which the alternating sum is replaced


@dataclass(frozen=True)
class PhaseSupport:
    n: int
    values: tuple[float, ...]
    pre_wrap_count: int


def tone_phase_support(n: int, m: int, delta: float) -> PhaseSupport:
    """Distinct wrapped values reachable by the n-th tone phase.

    Sums of n-1 symbols land on an evenly spaced grid of (n-1)(M-1)+1
    points; wrapping is done in exact rational arithmetic.
    """
    if n < 2:
        raise ValueError("tone index starts at 2")
    step = Fraction(delta).limit_denominator(10**9) / m  # grid spacing
    terms = n - 1
    count = terms * (m - 1) + 1
    lo = -Fraction(terms * (m - 1)) * step / 2
    seen = set()
    for j in range(count):
        v = lo + j * step
        v = 180 - (180 - v) % 360
        seen.add(v)
    return PhaseSupport(n=n, values=tuple(float(v) for v in sorted(seen)), pre_wrap_count=count)


def repetition_onset(m: int, delta: float, n_max: int = 10_000) -> int:
    """First tone index whose reachable phases collide after wrapping."""
    for n in range(2, n_max):
        if (n - 1) * (m - 1) * delta / (2 * m) >= 180:
            return n
    raise ValueError("no wrap collision below n_max")


def irwin_hall_pdf(n: int, delta: float, x):
    """Density (1/degree) of the sum of n-1 independent uniforms on [-delta/2, delta/2]."""
    k = n - 1
    x = np.asarray(x, dtype=float)
    if k > NORMAL_SWITCH:
        sd = delta * math.sqrt(k / 12.0)
        out = stats.norm.pdf(x, scale=sd)
        return float(out) if out.ndim == 0 else out
    u = x / delta + k / 2.0
    flat = np.atleast_1d(u).ravel()
    dens = np.empty(flat.size)
    coef = [(-1) ** j * math.comb(k, j) for j in range(k + 1)]
    norm = math.factorial(k - 1) if k > 1 else 1
    for i, ui in enumerate(flat):
        if ui < 0 or ui > k or (k == 1 and ui == 0):
            dens[i] = 0.0  # half-open support (-delta/2, delta/2] keeps folds from double counting
        elif k == 1:
            dens[i] = 1.0
        else:
            ui = min(ui, k - ui)  # the density is symmetric; the lower half cancels far less
            top = int(math.floor(ui))
            dens[i] = max(math.fsum(coef[j] * (ui - j) ** (k - 1) for j in range(top + 1)), 0.0) / norm
    dens /= delta
    if np.ndim(x) == 0:
        return float(dens[0])
    return dens.reshape(np.shape(x))


def irwin_hall_cdf(n: int, delta: float, x):
    k = n - 1
    x = np.asarray(x, dtype=float)
    if k > NORMAL_SWITCH:
        out = stats.norm.cdf(x, scale=delta * math.sqrt(k / 12.0))
        return float(out) if out.ndim == 0 else out
    u = x / delta + k / 2.0
    flat = np.atleast_1d(u).ravel()
    cdf = np.empty(flat.size)
    coef = [(-1) ** j * math.comb(k, j) for j in range(k + 1)]
    fk = math.factorial(k)
    for i, ui in enumerate(flat):
        if ui <= 0:
            cdf[i] = 0.0
        elif ui >= k:
            cdf[i] = 1.0
        else:
            lower = ui <= k / 2
            v = ui if lower else k - ui
            top = int(math.floor(v))
            part = min(max(math.fsum(coef[j] * (v - j) ** k for j in range(top + 1)) / fk, 0.0), 1.0)
            cdf[i] = part if lower else 1.0 - part
    if np.ndim(x) == 0:
        return float(cdf[0])
    return cdf.reshape(np.shape(x))


def fold_range(n: int, delta: float) -> int:
    return math.ceil((n - 1) * delta / 720.0) + 1


def wrapped_phase_pdf(n: int, delta: float, x):
    """Irwin-Hall density folded onto (-180, 180] by summing 360-degree shifts."""
    x = np.asarray(x, dtype=float)
    if delta % 360 == 0:
        # one summand already covers whole turns: the fold is exactly uniform
        total = np.full(x.shape, 1.0 / 360.0)
        return float(total) if np.ndim(total) == 0 else total
    kmax = fold_range(n, delta)
    if n - 1 > NORMAL_SWITCH:
        kmax = max(kmax, math.ceil(8 * delta * math.sqrt((n - 1) / 12.0) / 360.0) + 1)
    terms = [irwin_hall_pdf(n, delta, x + 360.0 * s) for s in range(-kmax, kmax + 1)]
    total = np.sum(terms, axis=0)
    return float(total) if np.ndim(total) == 0 else total


def wrapped_phase_cdf(n: int, delta: float, x):
    """CDF of the folded density on (-180, 180]."""
    x = np.asarray(x, dtype=float)
    if delta % 360 == 0:
        return (x + 180.0) / 360.0
    kmax = fold_range(n, delta)
    if n - 1 > NORMAL_SWITCH:
        kmax = max(kmax, math.ceil(8 * delta * math.sqrt((n - 1) / 12.0) / 360.0) + 1)
    total = 0.0
    for s in range(-kmax, kmax + 1):
        total = total + irwin_hall_cdf(n, delta, x + 360.0 * s) - irwin_hall_cdf(n, delta, -180.0 + 360.0 * s)
    return total


def bin_edges(n_bins: int = N_BINS) -> np.ndarray:
    return np.linspace(-180.0, 180.0, n_bins + 1)


def sample_tone_phases(n: int, m: int, delta: float, trials: int, seed) -> np.ndarray:
    """Wrapped n-th tone phases of ``trials`` uniformly drawn symbol sequences."""
    c = build_constellation(m, delta)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, m, size=(trials, n - 1))
    sums = np.asarray(c.phases)[idx].sum(axis=1)
    return wrap_deg(sums)


@dataclass(frozen=True)
class PhaseHistogram:
    edges: np.ndarray
    counts: np.ndarray
    samples: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    @property
    def density(self) -> np.ndarray:
        return self.frequencies / np.diff(self.edges)


def empirical_phase_histogram(n: int, m: int, delta: float, trials: int, seed, n_bins: int = N_BINS) -> PhaseHistogram:
    """Histogram of wrapped tone phases on left-open, right-closed 5-degree bins."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    phases = sample_tone_phases(n, m, delta, trials, seed)
    edges = bin_edges(n_bins)
    # right-closed bins: index = ceil((x + 180) / width) - 1
    width = 360.0 / n_bins
    idx = np.ceil((phases + 180.0) / width).astype(int) - 1
    idx = np.clip(idx, 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    return PhaseHistogram(edges=edges, counts=counts, samples=phases)


def ks_distance(samples, n: int, delta: float) -> float:
    """Two-sided Kolmogorov-Smirnov distance of samples to the folded analytic CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    uniq, first = np.unique(x, return_index=True)
    total = x.size
    below = first / total  # empirical CDF just below each atom
    at = np.append(first[1:], total) / total  # and at it
    f = np.asarray(wrapped_phase_cdf(n, delta, uniq))
    return float(max(np.max(np.abs(at - f)), np.max(np.abs(below - f))))


def chi_square_vs_analytic(hist: PhaseHistogram, n: int, delta: float) -> tuple[float, float]:
    """Chi-square statistic and p-value of binned counts against the folded density."""
    cdf = np.asarray(wrapped_phase_cdf(n, delta, hist.edges))
    expected = np.diff(cdf) * hist.counts.sum()
    keep = expected > 0
    stat = float(np.sum((hist.counts[keep] - expected[keep]) ** 2 / expected[keep]))
    dof = int(keep.sum()) - 1
    return stat, float(stats.chi2.sf(stat, dof))


def write_density_csv(path, phase_deg, values, value_name: str = "density", normalized: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phase_deg", value_name, "normalized"])
        for p, v in zip(phase_deg, values):
            w.writerow([f"{p:.6f}", f"{v:.12g}", int(normalized)])
