"""Arbitrary-precision substrate: working contexts, outward-rounded intervals,
exact decimal rendering and the principal Lambert W branch on [0, inf).

Point values ("BigReal") are plain ``mpmath`` floats produced by a
per-:class:`Context` ``MPContext``; nothing here touches the global
``mpmath.mp`` precision, so contexts can be used from several threads.

Interval endpoints are computed with the low-level ``mpmath.libmp`` kernels
and explicit rounding modes.  Field operations (+, -, *, /) are correctly
rounded outward; transcendental results (exp, log) are additionally widened
by two ulps, which covers the <= 1 ulp error of the underlying kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from functools import cached_property
from typing import Union

import mpmath
from mpmath import libmp
from mpmath.libmp import round_ceiling as _UP
from mpmath.libmp import round_floor as _DOWN

DEFAULT_PREC = 256
MIN_PREC = 64

_make = mpmath.mp.make_mpf
_FZERO = libmp.fzero
_FONE = libmp.fone

Number = Union[int, Fraction, str, "mpmath.mpf"]


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ConvergenceError(ArithmeticError):
    """An iteration did not meet its tolerance within its iteration cap."""


@dataclass(frozen=True)
class Context:
    """Working precision (in bits) shared by every derived result."""

    prec: int = DEFAULT_PREC

    def __post_init__(self):
        if self.prec < MIN_PREC:
            raise ValueError(f"precision must be >= {MIN_PREC} bits, got {self.prec}")

    @cached_property
    def mp(self) -> mpmath.ctx_mp.MPContext:
        ctx = mpmath.ctx_mp.MPContext()
        ctx.prec = self.prec
        return ctx

    def mpf(self, x) -> mpmath.mpf:
        if isinstance(x, Fraction):
            return self.mp.mpf(x.numerator) / x.denominator
        return self.mp.mpf(x)

    def with_prec(self, prec: int) -> "Context":
        return Context(prec)

    def doubled(self) -> "Context":
        return Context(self.prec * 2)


def as_context(ctx: Context | int | None) -> Context:
    if ctx is None:
        return Context()
    if isinstance(ctx, int):
        return Context(ctx)
    return ctx


# --- raw helpers -------------------------------------------------------------


def _raw(x) -> tuple:
    """Exact libmp tuple for ``x``; raises for inexact inputs."""
    if hasattr(x, "_mpf_"):
        return x._mpf_
    if isinstance(x, int):
        return libmp.from_int(x)
    raise TypeError(f"cannot convert {type(x).__name__} exactly")


def _widen(raw: tuple, prec: int, rnd: str, ulps: int = 2) -> tuple:
    """Move ``raw`` outward by ``ulps`` units in the last place at ``prec``."""
    if raw == _FZERO:
        step = libmp.from_man_exp(ulps, -4 * prec)
    else:
        _, _, exp, bc = raw
        step = libmp.from_man_exp(ulps, exp + bc - prec)
    if rnd == _DOWN:
        return libmp.mpf_sub(raw, step, prec, _DOWN)
    return libmp.mpf_add(raw, step, prec, _UP)


def _rational_raw(q: Fraction, prec: int, rnd: str) -> tuple:
    return libmp.from_rational(q.numerator, q.denominator, prec, rnd)


# --- decimal rendering -------------------------------------------------------


def to_fraction(x: mpmath.mpf) -> Fraction:
    sign, man, exp, _ = x._mpf_
    if not man:
        return Fraction(0)
    man = -int(man) if sign else int(man)
    if exp >= 0:
        return Fraction(man << exp)
    return Fraction(man, 1 << -exp)


def _round_fraction(q: Fraction, digits: int, rnd: str) -> Decimal:
    """Round ``q`` to ``digits`` significant decimals toward floor/ceiling."""
    if q == 0:
        return Decimal(0)
    mag = abs(q)
    e = math.floor(math.log10(mag.numerator) - math.log10(mag.denominator))
    # log10 on big ints can be off by one near powers of ten
    while Fraction(10) ** e > mag:
        e -= 1
    while Fraction(10) ** (e + 1) <= mag:
        e += 1
    shift = digits - 1 - e
    scaled = q * Fraction(10) ** shift
    n = math.floor(scaled) if rnd == _DOWN else math.ceil(scaled)
    return Decimal(f"{n}E{-shift}")


def decimal_down(x: mpmath.mpf, digits: int) -> str:
    """Decimal string <= ``x`` with ``digits`` significant figures."""
    return _format_decimal(_round_fraction(to_fraction(x), digits, _DOWN))


def decimal_up(x: mpmath.mpf, digits: int) -> str:
    """Decimal string >= ``x`` with ``digits`` significant figures."""
    return _format_decimal(_round_fraction(to_fraction(x), digits, _UP))


def _format_decimal(d: Decimal) -> str:
    s = format(d, "f") if -40 < d.adjusted() < 40 else format(d, "e")
    if "." in s and "e" not in s:
        s = s.rstrip("0").rstrip(".")
    return s or "0"


def parse_decimal(s: str, prec: int, rnd: str) -> mpmath.mpf:
    q = Fraction(Decimal(s))
    return _make(_rational_raw(q, prec, rnd))


# --- intervals ---------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]`` with endpoints held exactly as binary floats.

    ``prec`` is the working precision used for results derived from this
    interval.  Binary operations use the larger of the two precisions.
    """

    lo: mpmath.mpf
    hi: mpmath.mpf
    prec: int = DEFAULT_PREC

    def __post_init__(self):
        # endpoints from per-context mpf types are rewrapped as plain mpf
        if type(self.lo) is not mpmath.mpf:
            object.__setattr__(self, "lo", _make(_raw(self.lo)))
        if type(self.hi) is not mpmath.mpf:
            object.__setattr__(self, "hi", _make(_raw(self.hi)))
        if self.lo > self.hi:
            raise ValueError(f"empty interval: lo={self.lo} > hi={self.hi}")

    # construction

    @classmethod
    def _from_raw(cls, lo: tuple, hi: tuple, prec: int) -> "Interval":
        return cls(_make(lo), _make(hi), prec)

    @classmethod
    def exact(cls, x, prec: int = DEFAULT_PREC) -> "Interval":
        """Degenerate or enclosing interval for an int, Fraction, decimal str or mpf."""
        if isinstance(x, Interval):
            return cls(x.lo, x.hi, prec)
        if isinstance(x, (str, float)):
            x = Fraction(Decimal(str(x)))
        if isinstance(x, Fraction):
            if x.denominator == 1:
                x = x.numerator
            else:
                return cls._from_raw(
                    _rational_raw(x, prec, _DOWN), _rational_raw(x, prec, _UP), prec
                )
        r = _raw(x)
        return cls._from_raw(r, r, prec)

    @classmethod
    def hull_of(cls, *items: "Interval") -> "Interval":
        prec = max(i.prec for i in items)
        return cls(min(i.lo for i in items), max(i.hi for i in items), prec)

    def with_prec(self, prec: int) -> "Interval":
        return Interval(self.lo, self.hi, prec)

    # inspection

    @property
    def width(self) -> mpmath.mpf:
        return _make(libmp.mpf_sub(self.hi._mpf_, self.lo._mpf_, self.prec, _UP))

    @property
    def mid(self) -> mpmath.mpf:
        s = libmp.mpf_add(self.lo._mpf_, self.hi._mpf_, self.prec + 8, libmp.round_nearest)
        return _make(libmp.mpf_shift(s, -1))

    def contains(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        if isinstance(x, Fraction):
            return to_fraction(self.lo) <= x <= to_fraction(self.hi)
        if isinstance(x, str):
            return self.contains(Fraction(Decimal(x)))
        return self.lo <= x <= self.hi

    __contains__ = contains

    def hull(self, other: "Interval") -> "Interval":
        return Interval.hull_of(self, other)

    def intersect(self, other: "Interval") -> "Interval":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            raise ValueError("intervals are disjoint")
        return Interval(lo, hi, max(self.prec, other.prec))

    def certainly_lt(self, other) -> bool:
        other = _coerce(other, self.prec)
        return self.hi < other.lo

    def certainly_gt(self, other) -> bool:
        other = _coerce(other, self.prec)
        return self.lo > other.hi

    def compare(self, other) -> int | None:
        """-1 / +1 when the order is certain, None when the intervals overlap."""
        if self.certainly_lt(other):
            return -1
        if self.certainly_gt(other):
            return 1
        return None

    def is_positive(self) -> bool:
        return self.lo > 0

    def __repr__(self):
        return f"Interval[{mpmath.nstr(self.lo, 15)}, {mpmath.nstr(self.hi, 15)}]"

    # arithmetic

    def _p(self, other: "Interval") -> int:
        return max(self.prec, other.prec)

    def __neg__(self) -> "Interval":
        # mpf.__neg__ would round to the global mpmath precision
        return Interval._from_raw(libmp.mpf_neg(self.hi._mpf_), libmp.mpf_neg(self.lo._mpf_), self.prec)

    def __add__(self, other) -> "Interval":
        other = _coerce(other, self.prec)
        p = self._p(other)
        return Interval._from_raw(
            libmp.mpf_add(self.lo._mpf_, other.lo._mpf_, p, _DOWN),
            libmp.mpf_add(self.hi._mpf_, other.hi._mpf_, p, _UP),
            p,
        )

    __radd__ = __add__

    def __sub__(self, other) -> "Interval":
        other = _coerce(other, self.prec)
        return self + (-other)

    def __rsub__(self, other) -> "Interval":
        return _coerce(other, self.prec) - self

    def __mul__(self, other) -> "Interval":
        other = _coerce(other, self.prec)
        p = self._p(other)
        pairs = [(a, b) for a in (self.lo._mpf_, self.hi._mpf_) for b in (other.lo._mpf_, other.hi._mpf_)]
        lows = [libmp.mpf_mul(a, b, p, _DOWN) for a, b in pairs]
        highs = [libmp.mpf_mul(a, b, p, _UP) for a, b in pairs]
        return Interval(min(map(_make, lows)), max(map(_make, highs)), p)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Interval":
        other = _coerce(other, self.prec)
        if other.lo <= 0 <= other.hi:
            raise DomainError("division by an interval containing zero")
        p = self._p(other)
        pairs = [(a, b) for a in (self.lo._mpf_, self.hi._mpf_) for b in (other.lo._mpf_, other.hi._mpf_)]
        lows = [libmp.mpf_div(a, b, p, _DOWN) for a, b in pairs]
        highs = [libmp.mpf_div(a, b, p, _UP) for a, b in pairs]
        return Interval(min(map(_make, lows)), max(map(_make, highs)), p)

    def __rtruediv__(self, other) -> "Interval":
        return _coerce(other, self.prec) / self

    def exp(self) -> "Interval":
        p = self.prec
        lo = _widen(libmp.mpf_exp(self.lo._mpf_, p, _DOWN), p, _DOWN)
        hi = _widen(libmp.mpf_exp(self.hi._mpf_, p, _UP), p, _UP)
        if libmp.mpf_sign(lo) <= 0:
            lo = _FZERO
        return Interval._from_raw(lo, hi, p)

    def log(self) -> "Interval":
        if self.lo <= 0:
            raise DomainError("log of an interval reaching zero or below")
        p = self.prec
        return Interval._from_raw(_log_bound(self.lo._mpf_, p, _DOWN), _log_bound(self.hi._mpf_, p, _UP), p)


def _log_bound(raw: tuple, prec: int, rnd: str) -> tuple:
    if raw == _FONE:
        return _FZERO
    return _widen(libmp.mpf_log(raw, prec, rnd), prec, rnd)


def _coerce(x, prec: int) -> Interval:
    if isinstance(x, Interval):
        return x
    return Interval.exact(x, prec)


def pow_unit_interval(base: Interval, exponent: Interval) -> Interval:
    """Enclosure of ``{b**e : b in base, e in exponent}`` for bases in (0, 1).

    On this domain ``b**e`` grows with ``b`` and shrinks with ``e``, so the
    lower end comes from ``(base.lo, exponent.hi)`` and the upper end from
    ``(base.hi, exponent.lo)``.
    """
    if not (base.lo > 0 and base.hi < 1):
        raise DomainError(f"base must lie inside (0, 1), got {base!r}")
    if exponent.lo < 0:
        raise DomainError(f"exponent must be >= 0, got {exponent!r}")
    return pow_unit_from_log(base.log(), exponent)


def pow_unit_from_log(log_base: Interval, exponent: Interval) -> Interval:
    """Same as :func:`pow_unit_interval` given an enclosure of ``ln(base) < 0``."""
    p = max(log_base.prec, exponent.prec)
    lo_arg = libmp.mpf_mul(exponent.hi._mpf_, log_base.lo._mpf_, p, _DOWN)
    hi_arg = libmp.mpf_mul(exponent.lo._mpf_, log_base.hi._mpf_, p, _UP)
    lo = _widen(libmp.mpf_exp(lo_arg, p, _DOWN), p, _DOWN)
    hi = _FONE if hi_arg == _FZERO else _widen(libmp.mpf_exp(hi_arg, p, _UP), p, _UP)
    if libmp.mpf_sign(lo) <= 0:
        lo = _FZERO
    if libmp.mpf_gt(hi, _FONE):
        hi = _FONE
    return Interval._from_raw(lo, hi, p)


# --- Lambert W ---------------------------------------------------------------

MAX_HALLEY_STEPS = 200


def lambert_w0(x, tol=None, ctx: Context | int | None = None) -> mpmath.mpf:
    """Principal branch W(x) for x >= 0 by Halley iteration.

    The result ``w >= 0`` satisfies ``|w e^w - x| <= tol * max(x, 1)``;
    ``tol`` defaults to ``2**(8 - prec)``.
    """
    ctx = as_context(ctx)
    mp = ctx.mp
    x = ctx.mpf(x)
    if x < 0:
        raise DomainError(f"lambert_w0 needs x >= 0, got {x}")
    tol = mp.ldexp(1, 8 - ctx.prec) if tol is None else ctx.mpf(tol)
    if x == 0:
        return mp.zero
    bound = tol * max(x, 1)
    with mp.extraprec(24):
        if x < 1:
            w = +x
        else:
            lx = mp.log(x)
            llx = mp.log(lx + 1)
            w = lx - llx + llx / (2 * (lx + 1))
        for _ in range(MAX_HALLEY_STEPS):
            ew = mp.exp(w)
            f = w * ew - x
            if abs(f) <= bound / 4:
                break
            wp1 = w + 1
            w = w - f / (ew * wp1 - (w + 2) * f / (2 * wp1))
            if w < 0:
                w = mp.zero
        else:
            raise ConvergenceError(
                f"Halley iteration for W({mp.nstr(x, 10)}) missed tol {mp.nstr(tol, 5)} "
                f"after {MAX_HALLEY_STEPS} steps"
            )
    return +w


def lambert_w0_interval(x: Interval, ctx: Context | int | None = None) -> Interval:
    """Certified enclosure of W over ``x`` (x >= 0).

    W is increasing, so it suffices to find ``w_lo, w_hi`` with
    ``w_lo e^{w_lo} <= x.lo`` and ``w_hi e^{w_hi} >= x.hi``; both inequalities
    are checked in interval arithmetic.
    """
    ctx = as_context(ctx if ctx is not None else x.prec)
    if x.lo < 0:
        raise DomainError("lambert_w0_interval needs x >= 0")
    p = ctx.prec

    def f(w: mpmath.mpf) -> Interval:
        wi = Interval.exact(w, p)
        return wi * wi.exp()

    mp = ctx.mp
    lo = lambert_w0(x.lo, ctx=ctx)
    hi = lambert_w0(x.hi, ctx=ctx)
    step = mp.ldexp(1, 4 - p)
    while lo > 0 and f(lo).hi > x.lo:
        lo = lo - step * max(abs(lo), 1)
        step *= 2
        if step > 1:
            raise ConvergenceError("could not bracket W from below")
    lo = max(lo, mp.zero)
    step = mp.ldexp(1, 4 - p)
    while f(hi).lo < x.hi:
        hi = hi + step * max(abs(hi), 1)
        step *= 2
        if step > 1:
            raise ConvergenceError("could not bracket W from above")
    return Interval(_make(lo._mpf_), _make(hi._mpf_), p)
