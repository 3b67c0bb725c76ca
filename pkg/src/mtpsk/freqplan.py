"""Intermodulation-free tone frequency planning.

Spacings are kept as exact integers in units of the plan's ``gcd`` so every
collision check is done with integer set arithmetic.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import ConfigurationError, ConsistencyError


@dataclass(frozen=True)
class FrequencyPlan:
    f_c: float
    n: int
    gcd: float
    r: int
    k: tuple[int, ...]

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(kk * self.gcd for kk in self.k)

    @property
    def bw_units(self) -> int:
        return sum(self.k)

    @property
    def bw(self) -> float:
        return self.bw_units * self.gcd

    @property
    def offsets_half_units(self) -> tuple[int, ...]:
        """Tone positions relative to the lowest tone, in units of gcd/2, shifted so
        the carrier sits at zero (twice the integer offsets minus the bandwidth)."""
        pos = [0]
        for kk in self.k:
            pos.append(pos[-1] + kk)
        return tuple(2 * p - self.bw_units for p in pos)

    @property
    def tone_half_units(self) -> tuple[int, ...]:
        """Absolute tone frequencies as exact integers in units of gcd/2."""
        carrier = 2 * int(round(self.f_c / self.gcd))
        return tuple(carrier + o for o in self.offsets_half_units)

    @property
    def tones(self) -> tuple[float, ...]:
        return tuple(h * self.gcd / 2 for h in self.tone_half_units)

    @property
    def antiperiodic(self) -> bool:
        """True when the tones sit on odd multiples of gcd/2.

        The passband then satisfies x(t + 1/gcd) = -x(t); every product of two
        tones is still periodic in 1/gcd.
        """
        return self.bw_units % 2 == 1

    def to_dict(self) -> dict:
        return {
            "f_c_hz": self.f_c,
            "gcd_hz": self.gcd,
            "r": self.r,
            "n": self.n,
            "spacings_gcd_units": list(self.k),
            "tones_hz": list(self.tones),
            "bw_hz": self.bw,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "FrequencyPlan":
        plan = cls(
            f_c=float(d["f_c_hz"]),
            n=int(d["n"]),
            gcd=float(d["gcd_hz"]),
            r=int(d["r"]),
            k=tuple(int(v) for v in d["spacings_gcd_units"]),
        )
        if len(plan.k) != plan.n - 1:
            raise ConfigurationError("spacings_gcd_units must have n - 1 entries")
        return plan

    @classmethod
    def from_json(cls, text: str) -> "FrequencyPlan":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class Violation:
    kind: str  # "duplicate" or "collision"
    spacing_index: int
    spacing: int
    run: tuple[int, int] | None = None  # (a, b) inclusive indices of the colliding run

    def __str__(self) -> str:
        if self.kind == "duplicate":
            return f"duplicate spacing {self.spacing} at index {self.spacing_index}"
        a, b = self.run
        return f"sum of spacings[{a}..{b}] = {self.spacing} collides with spacing index {self.spacing_index}"


def _run_sums(k: Sequence[int], min_len: int = 1) -> Iterable[tuple[int, int, int]]:
    for a in range(len(k)):
        s = 0
        for b in range(a, len(k)):
            s += k[b]
            if b - a + 1 >= min_len:
                yield a, b, s


def pair_differences(plan_or_k) -> set[int]:
    """All pairwise tone differences in gcd units (contiguous-run sums of spacings)."""
    k = plan_or_k.k if isinstance(plan_or_k, FrequencyPlan) else tuple(plan_or_k)
    return {s for _, _, s in _run_sums(k)}


def pair_difference_counts(plan_or_k) -> dict[int, int]:
    """Pairwise differences counted with multiplicity (N(N-1)/2 entries in total)."""
    k = plan_or_k.k if isinstance(plan_or_k, FrequencyPlan) else tuple(plan_or_k)
    counts: dict[int, int] = {}
    for _, _, s in _run_sums(k):
        counts[s] = counts.get(s, 0) + 1
    return counts


def validate_plan(plan_or_k) -> list[Violation]:
    """Return every collision in the plan; an empty list means the plan is valid."""
    k = plan_or_k.k if isinstance(plan_or_k, FrequencyPlan) else tuple(plan_or_k)
    out: list[Violation] = []
    first_seen: dict[int, int] = {}
    for i, kk in enumerate(k):
        if kk in first_seen:
            out.append(Violation("duplicate", i, kk, (first_seen[kk], first_seen[kk])))
        else:
            first_seen[kk] = i
    for a, b, s in _run_sums(k, min_len=2):
        if s in first_seen:
            out.append(Violation("collision", first_seen[s], s, (a, b)))
    return out


def plan_frequencies(f_c: float, n: int, gcd: float, r: int = 0) -> FrequencyPlan:
    """Greedy spacing search: each new spacing is the first candidate on the
    1, 2 + r, 3 + 2r, ... ladder that is not already a pair difference."""
    if n < 2:
        raise ConfigurationError(f"need at least 2 tones, got {n}")
    if gcd <= 0:
        raise ConfigurationError(f"gcd must be positive, got {gcd}")
    if r < 0 or int(r) != r:
        raise ConfigurationError(f"spreading factor must be a non-negative integer, got {r}")
    ratio = Fraction(f_c).limit_denominator(10**6) / Fraction(gcd).limit_denominator(10**6)
    if ratio.denominator != 1:
        raise ConfigurationError(f"f_c={f_c} Hz is not an integer multiple of gcd={gcd} Hz")

    k = [1]
    step = k[0] + int(r)
    for _ in range(2, n):
        used = pair_differences(k)
        i = 1
        while i in used:
            i += step
        k.append(i)

    plan = FrequencyPlan(f_c=float(f_c), n=int(n), gcd=float(gcd), r=int(r), k=tuple(k))
    if plan.bw >= plan.f_c:
        raise ConfigurationError(f"bandwidth {plan.bw} Hz is not below f_c={f_c} Hz")
    bad = validate_plan(plan)
    if bad:
        raise ConsistencyError(f"greedy plan failed verification: {bad[0]}")
    return plan
