"""Finitely supported vectors over the Gaussian rationals.

This is the transparent model of the sequence space: supports are exact
index sets, the order f <= g ("f agrees with g on its support and vanishes
elsewhere") is decidable, and norms come back as certified enclosures.

sigma1 on vectors is deliberately computed from the four norms
||f||, ||g||, ||f-g||, ||f+g|| only, so the identical formula can be run
against an opaque norm oracle (see presentations.sigma1_oracle).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Dict, Iterable, Mapping

from .errors import PrecisionExhaustedError
from .scalar_core import (
    MAX_WORKING_PREC,
    DyadicInterval,
    GaussianRational,
    PExponent,
    ZERO_INTERVAL,
    _width_target,
    abs_pow,
    pow_enclosure,
    sigma_from_sigma1,
)


class FinSuppVector:
    """Sparse map index -> GaussianRational with no stored zeros."""

    __slots__ = ("entries",)

    def __init__(self, entries: Mapping[int, GaussianRational]):
        clean: Dict[int, GaussianRational] = {}
        for n, z in entries.items():
            if not isinstance(n, int) or n < 0:
                raise ValueError(f"indices must be nonnegative integers, got {n!r}")
            if not z.is_zero():
                clean[int(n)] = z
        self.entries = clean

    # -- constructors ---------------------------------------------------------

    @staticmethod
    def zero() -> "FinSuppVector":
        return FinSuppVector({})

    @staticmethod
    def basis(n: int, coeff: GaussianRational = GaussianRational.one()) -> "FinSuppVector":
        return FinSuppVector({n: coeff})

    @staticmethod
    def from_rational_entries(entries: Mapping[int, Fraction]) -> "FinSuppVector":
        return FinSuppVector({n: GaussianRational.of(q) for n, q in entries.items()})

    # -- structure ------------------------------------------------------------

    def support(self) -> frozenset:
        return frozenset(self.entries)

    def __getitem__(self, n: int) -> GaussianRational:
        return self.entries.get(n, GaussianRational.zero())

    def is_zero(self) -> bool:
        return not self.entries

    def __eq__(self, other) -> bool:
        return isinstance(other, FinSuppVector) and self.entries == other.entries

    def __hash__(self):
        return hash(frozenset(self.entries.items()))

    def __add__(self, other: "FinSuppVector") -> "FinSuppVector":
        out = dict(self.entries)
        for n, z in other.entries.items():
            s = out.get(n)
            out[n] = z if s is None else s + z
        return type(self)(out)

    def __sub__(self, other: "FinSuppVector") -> "FinSuppVector":
        out = dict(self.entries)
        for n, z in other.entries.items():
            s = out.get(n)
            out[n] = -z if s is None else s - z
        return type(self)(out)

    def __neg__(self) -> "FinSuppVector":
        return type(self)({n: -z for n, z in self.entries.items()})

    def scale(self, z: GaussianRational) -> "FinSuppVector":
        if z.is_zero():
            return type(self)({})
        return type(self)({n: v * z for n, v in self.entries.items()})

    def restrict(self, indices: Iterable[int]) -> "FinSuppVector":
        keep = set(indices)
        return type(self)({n: z for n, z in self.entries.items() if n in keep})

    def restrict_below(self, cutoff: int) -> "FinSuppVector":
        """Keep coordinates with index <= cutoff."""
        return type(self)({n: z for n, z in self.entries.items() if n <= cutoff})

    def max_index(self) -> int:
        """Largest supported index; -1 for the zero vector."""
        return max(self.entries, default=-1)

    def __str__(self) -> str:
        if not self.entries:
            return "0"
        return " + ".join(f"({self.entries[n]})e_{n}" for n in sorted(self.entries))

    def to_json(self) -> dict:
        return {"entries": {str(n): str(z) for n, z in sorted(self.entries.items())}}

    @staticmethod
    def from_json(data: dict) -> "FinSuppVector":
        return FinSuppVector(
            {int(n): GaussianRational.parse(s) for n, s in data["entries"].items()}
        )


# ---------------------------------------------------------------------------
# support calculus
# ---------------------------------------------------------------------------


def is_disjointly_supported(f: FinSuppVector, g: FinSuppVector) -> bool:
    """Exact support intersection test; sigma1 vanishes exactly on such pairs."""
    small, large = (f, g) if len(f.entries) <= len(g.entries) else (g, f)
    return all(n not in large.entries for n in small.entries)


def precedes(f: FinSuppVector, g: FinSuppVector) -> bool:
    """f <= g in the agreement order: f(n) = 0 whenever g(n) != f(n).

    Equivalent to g - f and f being disjointly supported.
    """
    return all(g[n] == z for n, z in f.entries.items())


def is_atom(f: FinSuppVector) -> bool:
    """Atoms of the order are the nonzero multiples of a single basis vector."""
    return len(f.entries) == 1


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def norm_power_p(f: FinSuppVector, p: PExponent, k: int) -> DyadicInterval:
    """Enclosure of ||f||_p^p = sum |f(n)|^p, width <= 2**-k."""
    if f.is_zero():
        return ZERO_INTERVAL
    count = len(f.entries)
    shift = max(1, count).bit_length()
    kk = k + shift
    while True:
        out = DyadicInterval.sum(abs_pow(z, p, kk) for z in f.entries.values())
        if out.width <= _width_target(k):
            return out
        kk += max(4, kk // 2)
        if kk > MAX_WORKING_PREC:
            raise PrecisionExhaustedError("norm^p refinement exceeded the precision cap")


def norm_p(f: FinSuppVector, p: PExponent, k: int) -> DyadicInterval:
    """Enclosure of ||f||_p, width <= 2**-k."""
    if f.is_zero():
        return ZERO_INTERVAL
    kk = k + 2
    while True:
        power = norm_power_p(f, p, kk)
        out = pow_enclosure(power, p, kk, over_p=True)
        if out.width <= _width_target(k):
            return out
        kk += max(4, kk // 2)
        if kk > MAX_WORKING_PREC:
            raise PrecisionExhaustedError("norm refinement exceeded the precision cap")


NormFn = Callable[[int], DyadicInterval]


def sigma1_from_norms(
    norm_f: NormFn,
    norm_g: NormFn,
    norm_diff: NormFn,
    norm_sum: NormFn,
    p: PExponent,
    k: int,
) -> DyadicInterval:
    """|2(||f||^p + ||g||^p) - (||f-g||^p + ||f+g||^p)| from norm enclosures only.

    Each argument maps a precision request to an enclosure of the
    corresponding norm (not its p-th power); this is the shape a norm
    oracle naturally provides.
    """
    kk = k + 4
    while True:
        terms = []
        for fn in (norm_f, norm_g, norm_diff, norm_sum):
            box = fn(kk)
            if box.lo < 0:
                box = DyadicInterval(Fraction(0), max(box.hi, Fraction(0)))
            terms.append(pow_enclosure(box, p, kk))
        a, b, c, d = terms
        out = ((a + b).scale(2) - (c + d)).abs()
        if out.width <= _width_target(k):
            return out
        kk += max(4, kk // 2)
        if kk > MAX_WORKING_PREC:
            raise PrecisionExhaustedError("sigma1-from-norms exceeded the precision cap")


def sigma1_vec(f: FinSuppVector, g: FinSuppVector, p: PExponent, k: int) -> DyadicInterval:
    """sigma1 on vectors, computed through the four norms only."""
    return sigma1_from_norms(
        lambda kk: norm_p(f, p, kk),
        lambda kk: norm_p(g, p, kk),
        lambda kk: norm_p(f - g, p, kk),
        lambda kk: norm_p(f + g, p, kk),
        p,
        k,
    )


def sigma_vec(f: FinSuppVector, g: FinSuppVector, p: PExponent, k: int) -> DyadicInterval:
    """sigma = c_p * sigma1 on vectors (p certified apart from 2)."""
    kk = k + 3
    while True:
        out = sigma_from_sigma1(sigma1_vec(f, g, p, kk), p, kk)
        if out.width <= _width_target(k):
            return out
        kk += max(4, kk // 2)
        if kk > MAX_WORKING_PREC:
            raise PrecisionExhaustedError("sigma on vectors exceeded the precision cap")
