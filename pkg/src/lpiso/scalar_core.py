"""Exact scalars, certified interval enclosures, and the scalar sigma functionals.

Ground rules that the rest of the package relies on:

  * scalars are Gaussian rationals (exact rational real/imaginary parts);
  * every analytic quantity is returned as a DyadicInterval that provably
    contains it, never as a float;
  * precision requests are integers k meaning "width at most 2**-k";
  * refinement is monotone: asking for a larger k yields a sub-interval.

Transcendental enclosures (exp, log, sin, cos, pi) are delegated to mpmath's
interval context, whose endpoints are binary floats, i.e. dyadic rationals;
they are converted back to exact Fractions, so no precision is lost in
transit.  Rational fast paths bypass mpmath entirely.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Union

from mpmath import iv as _iv
from mpmath.libmp import from_rational, round_ceiling, round_floor, to_rational

from .errors import PEqualsTwoError, PrecisionExhaustedError

RationalLike = Union[Fraction, int]

#: hard cap (in bits) for adaptive refinement loops; hitting it raises
#: PrecisionExhaustedError or, for p-vs-2 separation, PEqualsTwoError.
MAX_WORKING_PREC = 8192

#: initial guard bits added on top of a target precision k.
GUARD_BITS = 24


def _to_fraction(x: RationalLike) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


def parse_fraction(text: str) -> Fraction:
    """Parse 'num/den' or 'num' (unicode minus tolerated)."""
    return Fraction(text.strip().replace("−", "-"))


def format_fraction(q: Fraction) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------------------
# Gaussian rationals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianRational:
    """Complex number with exact rational real and imaginary parts."""

    re: Fraction
    im: Fraction

    def __post_init__(self):
        object.__setattr__(self, "re", _to_fraction(self.re))
        object.__setattr__(self, "im", _to_fraction(self.im))

    @staticmethod
    def of(re: RationalLike, im: RationalLike = 0) -> "GaussianRational":
        return GaussianRational(_to_fraction(re), _to_fraction(im))

    @staticmethod
    def zero() -> "GaussianRational":
        return GaussianRational(Fraction(0), Fraction(0))

    @staticmethod
    def one() -> "GaussianRational":
        return GaussianRational(Fraction(1), Fraction(0))

    def __add__(self, other: "GaussianRational") -> "GaussianRational":
        return GaussianRational(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "GaussianRational") -> "GaussianRational":
        return GaussianRational(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "GaussianRational":
        return GaussianRational(-self.re, -self.im)

    def __mul__(self, other: "GaussianRational") -> "GaussianRational":
        return GaussianRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    def scale(self, q: RationalLike) -> "GaussianRational":
        q = _to_fraction(q)
        return GaussianRational(self.re * q, self.im * q)

    def conj(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def abs_sq(self) -> Fraction:
        """|z|^2, exact."""
        return self.re * self.re + self.im * self.im

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def __str__(self) -> str:
        if self.im == 0:
            return format_fraction(self.re)
        im_part = format_fraction(abs(self.im)) + "i"
        sign = "-" if self.im < 0 else "+"
        if self.re == 0:
            return ("-" if self.im < 0 else "") + im_part
        return f"{format_fraction(self.re)}{sign}{im_part}"

    @staticmethod
    def parse(text: str) -> "GaussianRational":
        """Parse '3', '1/2', 'i', '-1/2+1/2i', '2i', '1/4-3i'."""
        s = text.strip().replace("−", "-").replace(" ", "")
        if not s:
            raise ValueError("empty scalar literal")
        if not s.endswith("i"):
            return GaussianRational(parse_fraction(s), Fraction(0))
        body = s[:-1]
        # find the split between real and imaginary parts: the last +/- not
        # inside the leading sign and not part of a fraction
        split = -1
        for idx in range(len(body) - 1, 0, -1):
            if body[idx] in "+-":
                split = idx
                break
        if split == -1:
            im_txt = body
            re_txt = ""
        else:
            re_txt, im_txt = body[:split], body[split:]
        if im_txt in ("", "+"):
            im = Fraction(1)
        elif im_txt == "-":
            im = Fraction(-1)
        else:
            im = parse_fraction(im_txt)
        re = parse_fraction(re_txt) if re_txt else Fraction(0)
        return GaussianRational(re, im)


GAUSS_ONE = GaussianRational.one()
GAUSS_ZERO = GaussianRational.zero()
GAUSS_I = GaussianRational.of(0, 1)

#: the eight Gaussian-rational unimodular scalars used in invariance tests
UNIMODULAR_UNITS = (
    GAUSS_ONE,
    -GAUSS_ONE,
    GAUSS_I,
    -GAUSS_I,
)


# ---------------------------------------------------------------------------
# Dyadic intervals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DyadicInterval:
    """Closed interval [lo, hi] with exact rational endpoints.

    Endpoints coming out of the mpmath backend are dyadic; exact rational
    fast paths may produce non-dyadic endpoints, which is harmless since
    all arithmetic here is exact.  Invariant: lo <= hi, and every operation
    returns an interval containing the exact image of its inputs.
    """

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", _to_fraction(self.lo))
        object.__setattr__(self, "hi", _to_fraction(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"inverted interval [{self.lo}, {self.hi}]")

    @staticmethod
    def point(q: RationalLike) -> "DyadicInterval":
        q = _to_fraction(q)
        return DyadicInterval(q, q)

    @staticmethod
    def of(lo: RationalLike, hi: RationalLike) -> "DyadicInterval":
        return DyadicInterval(_to_fraction(lo), _to_fraction(hi))

    # -- queries ------------------------------------------------------------

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, q: RationalLike) -> bool:
        q = _to_fraction(q)
        return self.lo <= q <= self.hi

    def encloses(self, other: "DyadicInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def is_point(self) -> bool:
        return self.lo == self.hi

    def strictly_positive(self) -> bool:
        return self.lo > 0

    def strictly_negative(self) -> bool:
        return self.hi < 0

    def separated_from_zero(self) -> bool:
        return self.lo > 0 or self.hi < 0

    def certified_lt(self, other: "DyadicInterval") -> bool:
        """True only when every point of self is below every point of other."""
        return self.hi < other.lo

    def certified_le(self, other: "DyadicInterval") -> bool:
        return self.hi <= other.lo

    # -- arithmetic (exact, containment-preserving) --------------------------

    def __add__(self, other: "DyadicInterval") -> "DyadicInterval":
        return DyadicInterval(self.lo + other.lo, self.hi + other.hi)

    def __sub__(self, other: "DyadicInterval") -> "DyadicInterval":
        return DyadicInterval(self.lo - other.hi, self.hi - other.lo)

    def __neg__(self) -> "DyadicInterval":
        return DyadicInterval(-self.hi, -self.lo)

    def __mul__(self, other: "DyadicInterval") -> "DyadicInterval":
        products = (
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        )
        return DyadicInterval(min(products), max(products))

    def scale(self, q: RationalLike) -> "DyadicInterval":
        q = _to_fraction(q)
        if q >= 0:
            return DyadicInterval(self.lo * q, self.hi * q)
        return DyadicInterval(self.hi * q, self.lo * q)

    def shift(self, q: RationalLike) -> "DyadicInterval":
        q = _to_fraction(q)
        return DyadicInterval(self.lo + q, self.hi + q)

    def abs(self) -> "DyadicInterval":
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return DyadicInterval(Fraction(0), max(-self.lo, self.hi))

    def reciprocal(self) -> "DyadicInterval":
        if not self.separated_from_zero():
            raise ZeroDivisionError("reciprocal of an interval containing 0")
        return DyadicInterval(1 / self.hi, 1 / self.lo)

    def intersect(self, other: "DyadicInterval") -> "DyadicInterval":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            raise ValueError("empty intersection; inputs were not enclosures of one value")
        return DyadicInterval(lo, hi)

    def hull(self, other: "DyadicInterval") -> "DyadicInterval":
        return DyadicInterval(min(self.lo, other.lo), max(self.hi, other.hi))

    def max_with(self, other: "DyadicInterval") -> "DyadicInterval":
        """Enclosure of max(x, y) for x in self, y in other."""
        return DyadicInterval(max(self.lo, other.lo), max(self.hi, other.hi))

    def min_with(self, other: "DyadicInterval") -> "DyadicInterval":
        return DyadicInterval(min(self.lo, other.lo), min(self.hi, other.hi))

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi}]"

    @staticmethod
    def sum(items) -> "DyadicInterval":
        lo = Fraction(0)
        hi = Fraction(0)
        for it in items:
            lo += it.lo
            hi += it.hi
        return DyadicInterval(lo, hi)


ZERO_INTERVAL = DyadicInterval.point(0)


def _width_target(k: int) -> Fraction:
    return Fraction(1, 2**k)


# ---------------------------------------------------------------------------
# mpmath bridge
# ---------------------------------------------------------------------------


def _iv_from_fraction(q: Fraction, prec: int):
    lo = from_rational(q.numerator, q.denominator, prec, round_floor)
    hi = from_rational(q.numerator, q.denominator, prec, round_ceiling)
    return _iv.make_mpf((lo, hi))


def _fraction_from_mpf_tuple(t) -> Fraction:
    num, den = to_rational(t)
    return Fraction(int(num), int(den))


def _interval_from_iv(x) -> DyadicInterval:
    lo_t, hi_t = x._mpi_
    return DyadicInterval(_fraction_from_mpf_tuple(lo_t), _fraction_from_mpf_tuple(hi_t))


class _IvPrec:
    """Temporarily set the mpmath interval context precision."""

    def __init__(self, prec: int):
        self.prec = prec
        self.saved = None

    def __enter__(self):
        self.saved = _iv.prec
        _iv.prec = self.prec
        return _iv

    def __exit__(self, *exc):
        _iv.prec = self.saved
        return False


# ---------------------------------------------------------------------------
# Computable reals
# ---------------------------------------------------------------------------


class CReal:
    """A real given by a rational approximation function with modulus 2**-k.

    The approximator must be pure: the same k always yields the same
    rational (answers are memoized, which also keeps successive queries
    consistent).  No exact comparisons are ever made on CReals; callers
    separate values only "certifiably at precision k".
    """

    def __init__(self, approx: Callable[[int], Fraction], name: str = "creal"):
        self._approx = approx
        self._memo: dict[int, Fraction] = {}
        self.name = name

    def approx(self, k: int) -> Fraction:
        if k < 0:
            raise ValueError("precision k must be >= 0")
        if k not in self._memo:
            self._memo[k] = _to_fraction(self._approx(k))
        return self._memo[k]

    def enclosure(self, k: int) -> DyadicInterval:
        q = self.approx(k)
        w = _width_target(k)
        return DyadicInterval(q - w, q + w)

    @staticmethod
    def from_fraction(q: RationalLike, name: Optional[str] = None) -> "CReal":
        q = _to_fraction(q)
        return CReal(lambda k: q, name or format_fraction(q))

    @staticmethod
    def from_interval_fn(fn: Callable[[int], DyadicInterval], name: str = "creal") -> "CReal":
        """Wrap a function producing enclosures of width <= 2**-k."""

        def approx(k: int) -> Fraction:
            box = fn(k + 1)
            return box.mid

        return CReal(approx, name)

    @staticmethod
    def sqrt_of_fraction(a: RationalLike, name: Optional[str] = None) -> "CReal":
        """sqrt(a) for rational a >= 0 via integer square roots (no floats)."""
        a = _to_fraction(a)
        if a < 0:
            raise ValueError("sqrt of a negative rational")

        import math

        def box(k: int) -> DyadicInterval:
            # scale so that sqrt(a) = isqrt(a * 4**m) / 2**m, floor version
            m = k + 2
            scaled = a * (4**m)
            root_lo = math.isqrt(scaled.numerator // scaled.denominator)
            lo = Fraction(root_lo, 2**m)
            hi = Fraction(root_lo + 1, 2**m)
            return DyadicInterval(lo, hi)

        return CReal.from_interval_fn(box, name or f"sqrt({format_fraction(a)})")


def approx_real(x: CReal, k: int) -> Fraction:
    """Rational q with |q - x| < 2**-k."""
    return x.approx(k)


# ---------------------------------------------------------------------------
# Exponents
# ---------------------------------------------------------------------------


class PExponent:
    """The exponent p >= 1, exact-rational when possible, CReal otherwise."""

    def __init__(self, value: CReal, exact: Optional[Fraction] = None):
        self.value = value
        self.exact = exact
        self._two_side: Optional[int] = None
        if exact is not None:
            if exact < 1:
                raise ValueError("p must be >= 1")
        else:
            # certify p >= 1 up to the cap; p == 1 exactly must be passed
            # as an exact rational
            prec = 8
            while True:
                box = value.enclosure(prec)
                if box.lo >= 1:
                    break
                if box.hi < 1:
                    raise ValueError("p certified < 1")
                prec *= 2
                if prec > MAX_WORKING_PREC:
                    raise PrecisionExhaustedError(
                        "cannot certify p >= 1; pass an exact rational if p == 1"
                    )

    @staticmethod
    def from_fraction(q: RationalLike) -> "PExponent":
        q = _to_fraction(q)
        return PExponent(CReal.from_fraction(q, f"p={format_fraction(q)}"), exact=q)

    @staticmethod
    def from_creal(c: CReal) -> "PExponent":
        return PExponent(c, exact=None)

    def enclosure(self, k: int) -> DyadicInterval:
        if self.exact is not None:
            return DyadicInterval.point(self.exact)
        return self.value.enclosure(k)

    def is_integer(self) -> bool:
        return self.exact is not None and self.exact.denominator == 1

    def side_of_two(self) -> int:
        """-1 if p < 2 certified, +1 if p > 2 certified; PEqualsTwoError otherwise."""
        if self._two_side is not None:
            return self._two_side
        if self.exact is not None:
            if self.exact == 2:
                raise PEqualsTwoError("p is exactly 2")
            self._two_side = -1 if self.exact < 2 else 1
            return self._two_side
        prec = 8
        while prec <= MAX_WORKING_PREC:
            box = self.enclosure(prec)
            if box.hi < 2:
                self._two_side = -1
                return -1
            if box.lo > 2:
                self._two_side = 1
                return 1
            prec *= 2
        raise PEqualsTwoError("p could not be separated from 2 at the working precision cap")

    def __str__(self) -> str:
        if self.exact is not None:
            return format_fraction(self.exact)
        return self.value.name


# ---------------------------------------------------------------------------
# Certified powers
# ---------------------------------------------------------------------------


def _exponent_iv(p: PExponent, num: Fraction, over_p: bool, prec: int):
    """Interval for num*p (over_p=False) or num/p (over_p=True) at mpmath prec."""
    scale = _iv_from_fraction(num, prec)
    if p.exact is not None:
        p_iv = _iv_from_fraction(p.exact, prec)
    else:
        # translate mpmath bits to a 2**-k enclosure request
        p_iv_box = p.enclosure(prec)
        lo = from_rational(p_iv_box.lo.numerator, p_iv_box.lo.denominator, prec, round_floor)
        hi = from_rational(p_iv_box.hi.numerator, p_iv_box.hi.denominator, prec, round_ceiling)
        p_iv = _iv.make_mpf((lo, hi))
    return scale / p_iv if over_p else scale * p_iv


def _exponent_exact(p: PExponent, num: Fraction, over_p: bool) -> Optional[Fraction]:
    if p.exact is None:
        return None
    return num / p.exact if over_p else num * p.exact


def _int_nth_root_exact(n: int, v: int) -> Optional[int]:
    """The integer v-th root of n if n is a perfect v-th power, else None."""
    if n < 0:
        return None
    if n in (0, 1) or v == 1:
        return n
    import math

    if v == 2:
        r = math.isqrt(n)
        return r if r * r == n else None
    # integer Newton iteration from an upper seed; converges to floor(n^(1/v))
    r = 1 << (-(-n.bit_length() // v))
    while True:
        nr = ((v - 1) * r + n // r ** (v - 1)) // v
        if nr >= r:
            break
        r = nr
    return r if r**v == n else None


def _fraction_power_exact(base: Fraction, e: Fraction) -> Optional[Fraction]:
    """base**e when the result is rational (perfect root), else None."""
    if e.denominator == 1:
        return base ** int(e)
    v = e.denominator
    num_root = _int_nth_root_exact(base.numerator, v)
    if num_root is None:
        return None
    den_root = _int_nth_root_exact(base.denominator, v)
    if den_root is None:
        return None
    return Fraction(num_root, den_root) ** e.numerator


def _pow_positive_fraction(base: Fraction, p: PExponent, num: Fraction, over_p: bool, prec: int) -> DyadicInterval:
    """Enclosure of base**e at mpmath precision prec, base > 0, e = num*p or num/p."""
    e_exact = _exponent_exact(p, num, over_p)
    if e_exact is not None:
        exact = _fraction_power_exact(base, e_exact)
        if exact is not None:
            return DyadicInterval.point(exact)
    with _IvPrec(prec):
        b = _iv_from_fraction(base, prec)
        e = _exponent_iv(p, num, over_p, prec)
        res = _iv.exp(e * _iv.log(b))
        return _interval_from_iv(res)


def pow_enclosure(
    base: DyadicInterval,
    p: PExponent,
    k: int,
    *,
    num: Fraction = Fraction(1),
    over_p: bool = False,
) -> DyadicInterval:
    """Certified enclosure of {x**e : x in base}, outward slop <= 2**-k.

    e = num*p (default) or num/p (over_p=True); requires e > 0 and base >= 0,
    where x**e is increasing, so endpoint powers suffice.  A base endpoint
    of 0 maps to 0 exactly.  "Slop" is everything beyond the exact image:
    when base is a point the result has width <= 2**-k; a wide base keeps
    its image width and gains at most 2**-k.
    """
    num = _to_fraction(num)
    if num <= 0:
        raise ValueError("exponent multiplier must be positive")
    if base.lo < 0:
        raise ValueError("pow_enclosure needs a nonnegative base interval")
    half_target = _width_target(k + 1)

    def endpoint(x: Fraction, prec: int) -> DyadicInterval:
        if x == 0:
            return ZERO_INTERVAL
        return _pow_positive_fraction(x, p, num, over_p, prec)

    prec = max(64, k + GUARD_BITS)
    while True:
        lo_box = endpoint(base.lo, prec)
        hi_box = lo_box if base.is_point() else endpoint(base.hi, prec)
        if lo_box.width <= half_target and hi_box.width <= half_target:
            return DyadicInterval(lo_box.lo, hi_box.hi)
        prec *= 2
        if prec > MAX_WORKING_PREC:
            raise PrecisionExhaustedError(
                f"power enclosure slop did not reach 2**-{k} by {MAX_WORKING_PREC} bits"
            )


def abs_pow(z: GaussianRational, p: PExponent, k: int) -> DyadicInterval:
    """Enclosure of |z|**p with width <= 2**-k.

    Exact fast paths: z == 0; integer p with z real; even integer p.
    General path: |z|^p = (|z|^2)^(p/2) = exp((p/2) log |z|^2) with outward
    rounding and adaptive precision.
    """
    if z.is_zero():
        return ZERO_INTERVAL
    if p.is_integer():
        n = int(p.exact)
        if z.im == 0:
            return DyadicInterval.point(abs(z.re) ** n)
        if n % 2 == 0:
            return DyadicInterval.point(z.abs_sq() ** (n // 2))
    return pow_enclosure(DyadicInterval.point(z.abs_sq()), p, k, num=Fraction(1, 2))


def root_p(box: DyadicInterval, p: PExponent, k: int) -> DyadicInterval:
    """Enclosure of box**(1/p) for a nonnegative enclosure box."""
    return pow_enclosure(box, p, k, over_p=True)


def norm_power(box: DyadicInterval, p: PExponent, k: int) -> DyadicInterval:
    """Enclosure of box**p for a nonnegative enclosure box (norm -> norm^p)."""
    return pow_enclosure(box, p, k)


# ---------------------------------------------------------------------------
# The sigma functionals
# ---------------------------------------------------------------------------


def sigma1_scalar(z: GaussianRational, w: GaussianRational, p: PExponent, k: int) -> DyadicInterval:
    """|2(|z|^p + |w|^p) - (|z-w|^p + |z+w|^p)|, width <= 2**-k.

    Vanishes exactly when zw = 0; positive otherwise (for p != 2).
    """
    kk = k + 3
    while True:
        a = abs_pow(z, p, kk)
        b = abs_pow(w, p, kk)
        c = abs_pow(z - w, p, kk)
        d = abs_pow(z + w, p, kk)
        out = ((a + b).scale(2) - (c + d)).abs()
        if out.width <= _width_target(k):
            return out
        kk += max(4, kk // 2)
        if kk > MAX_WORKING_PREC:
            raise PrecisionExhaustedError("sigma1 refinement exceeded the precision cap")


def signed_sigma1_scalar(z: GaussianRational, w: GaussianRational, p: PExponent, k: int) -> DyadicInterval:
    """2|z|^p + 2|w|^p - |z+w|^p - |z-w|^p without the absolute value.

    Nonnegative for 1 <= p < 2 and nonpositive for p > 2.
    """
    kk = k + 3
    while True:
        a = abs_pow(z, p, kk)
        b = abs_pow(w, p, kk)
        c = abs_pow(z - w, p, kk)
        d = abs_pow(z + w, p, kk)
        out = (a + b).scale(2) - (c + d)
        if out.width <= _width_target(k):
            return out
        kk += max(4, kk // 2)
        if kk > MAX_WORKING_PREC:
            raise PrecisionExhaustedError("sigma1 refinement exceeded the precision cap")


def lamperti_denominator(p: PExponent, k: int) -> DyadicInterval:
    """Enclosure of |4 - 2 sqrt(2)^p|, certified away from 0 (else PEqualsTwoError)."""
    side = p.side_of_two()  # raises when p cannot be separated from 2
    kk = k + 2
    while True:
        two_pow = pow_enclosure(DyadicInterval.point(2), p, kk, num=Fraction(1, 2))
        raw = DyadicInterval.point(4) - two_pow.scale(2)
        box = raw if side < 0 else -raw
        if box.lo > 0 and box.width <= _width_target(k):
            return box
        kk += max(4, kk // 2)
        if kk > MAX_WORKING_PREC:
            # p separated from 2 but the denominator still straddles 0:
            # cannot happen mathematically, so this is defensive
            raise PEqualsTwoError("|4 - 2 sqrt(2)^p| could not be separated from 0")


def lamperti_constant(p: PExponent, k: int) -> DyadicInterval:
    """c_p = 1 / |4 - 2 sqrt(2)^p|, width <= 2**-k."""
    cache = getattr(p, "_cp_cache", None)
    if cache is None:
        cache = {}
        p._cp_cache = cache
    hit = cache.get(k)
    if hit is not None:
        return hit
    kk = k + 2
    while True:
        den = lamperti_denominator(p, kk)
        out = den.reciprocal()
        if out.width <= _width_target(k):
            cache[k] = out
            return out
        kk += max(4, kk // 2)
        if kk > MAX_WORKING_PREC:
            raise PrecisionExhaustedError("lamperti constant refinement exceeded the cap")


def sigma_scalar(z: GaussianRational, w: GaussianRational, p: PExponent, k: int) -> DyadicInterval:
    """sigma(z, w) = c_p * sigma1(z, w), width <= 2**-k."""
    kk = k + 3
    while True:
        c = lamperti_constant(p, kk)
        s = sigma1_scalar(z, w, p, kk)
        out = c * s
        if out.width <= _width_target(k):
            return out
        kk += max(4, kk // 2)
        if kk > MAX_WORKING_PREC:
            raise PrecisionExhaustedError("sigma refinement exceeded the precision cap")


def sigma_from_sigma1(sigma1_box: DyadicInterval, p: PExponent, k: int) -> DyadicInterval:
    """Scale an already-computed sigma1 enclosure by c_p."""
    kk = k + 3
    while True:
        out = lamperti_constant(p, kk) * sigma1_box
        if out.width <= _width_target(k) or out.width <= sigma1_box.width * 2:
            return out
        kk += max(4, kk // 2)
        if kk > MAX_WORKING_PREC:
            raise PrecisionExhaustedError("sigma scaling exceeded the precision cap")


def log2_enclosure(box: DyadicInterval, k: int) -> DyadicInterval:
    """Base-2 logarithm of a strictly positive enclosure, slop <= 2**-k."""
    if box.lo <= 0:
        raise ValueError("log2 needs a strictly positive enclosure")

    def endpoint(x: Fraction, prec: int) -> DyadicInterval:
        exact_log = x.numerator.bit_length() - 1
        if x == Fraction(2) ** exact_log:
            return DyadicInterval.point(exact_log)
        if x < 1:
            inv = 1 / x
            exact_log = inv.numerator.bit_length() - 1
            if inv == Fraction(2) ** exact_log:
                return DyadicInterval.point(-exact_log)
        with _IvPrec(prec):
            out = _iv.log(_iv_from_fraction(x, prec)) / _iv.log(_iv.mpf(2))
            return _interval_from_iv(out)

    prec = max(64, k + GUARD_BITS)
    half = _width_target(k + 1)
    while True:
        lo_box = endpoint(box.lo, prec)
        hi_box = lo_box if box.is_point() else endpoint(box.hi, prec)
        if lo_box.width <= half and hi_box.width <= half:
            return DyadicInterval(lo_box.lo, hi_box.hi)
        prec *= 2
        if prec > MAX_WORKING_PREC:
            raise PrecisionExhaustedError("log2 enclosure exceeded the precision cap")


# -- trig helpers for the objective -----------------------------------------

_EXACT_COS = {
    Fraction(0): Fraction(1),
    Fraction(1, 2): Fraction(0),
    Fraction(1): Fraction(-1),
    Fraction(3, 2): Fraction(0),
}


def _cos_of_pi_multiple(theta_over_pi: Fraction, prec: int) -> DyadicInterval:
    """Enclosure of cos(theta_over_pi * pi); exact at multiples of pi/2."""
    reduced = theta_over_pi % 2
    if reduced in _EXACT_COS:
        return DyadicInterval.point(_EXACT_COS[reduced])
    with _IvPrec(prec):
        theta = _iv.pi * _iv_from_fraction(reduced, prec)
        return _interval_from_iv(_iv.cos(theta))


def lamperti_objective(theta_over_pi: RationalLike, t: RationalLike, p: PExponent, k: int) -> DyadicInterval:
    """The Lamperti minimization objective at theta = (theta_over_pi) * pi.

    For 1 <= p < 2:  2 + 2 t^p - |1 + t e^(i theta)|^p - |1 - t e^(i theta)|^p;
    for p > 2 the negation.  Requires t >= 1; the branch needs p certified
    apart from 2 (PEqualsTwoError otherwise).  Its minimum over
    theta in [0, pi], t >= 1 is |4 - 2 sqrt(2)^p|, attained at (pi/2, 1).
    """
    theta_over_pi = _to_fraction(theta_over_pi)
    t = _to_fraction(t)
    if t < 1:
        raise ValueError("the objective is only defined for t >= 1")
    side = p.side_of_two()
    target = _width_target(k)
    kk = k + 4
    while True:
        prec = max(64, kk + GUARD_BITS)
        cos_box = _cos_of_pi_multiple(theta_over_pi, prec)
        # |1 +/- t e^(i theta)|^2 = 1 +/- 2 t cos(theta) + t^2, >= 0
        base_plus = cos_box.scale(2 * t).shift(1 + t * t)
        base_minus = (-cos_box).scale(2 * t).shift(1 + t * t)
        tp = pow_enclosure(DyadicInterval.point(t), p, kk)
        clip = lambda b: DyadicInterval(max(b.lo, Fraction(0)), max(b.hi, Fraction(0)))
        term_plus = pow_enclosure(clip(base_plus), p, kk, num=Fraction(1, 2))
        term_minus = pow_enclosure(clip(base_minus), p, kk, num=Fraction(1, 2))
        out = DyadicInterval.point(2) + tp.scale(2) - term_plus - term_minus
        if side > 0:
            out = -out
        if out.width <= target:
            return out
        kk += max(4, kk // 2)
        if kk > MAX_WORKING_PREC:
            raise PrecisionExhaustedError("objective refinement exceeded the precision cap")
