"""Base sequences and finite power towers.

A tower over bases ``u_m, ..., u_n`` is evaluated top-down:
``e_n = u_n ** seed`` and ``e_k = u_k ** e_{k+1}``, always as
``exp(e * ln u)`` with ``ln u`` taken from the exact rational base.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence, Union

import mpmath

from .numerics import (
    Context,
    DomainError,
    Interval,
    as_context,
    lambert_w0,
    lambert_w0_interval,
    pow_unit_from_log,
)

DEPTH_CAP = 10_000

Value = Union[mpmath.mpf, Interval]


@dataclass(frozen=True)
class BaseSequence:
    """Generator of tower bases ``u_k`` in (0, 1), indexed from 1.

    ``kind`` is ``"zi"`` (u_k = 1/(k(k+1))), ``"zii"`` (u_k = k/(k+1)!) or
    ``"custom"`` (an explicit finite list).
    """

    kind: str
    custom_bases: tuple[Fraction, ...] = field(default=())
    # caller's promise that custom bases keep decreasing past the listed ones
    decreasing_beyond: bool = False

    def __post_init__(self):
        if self.kind not in ("zi", "zii", "custom"):
            raise ValueError(f"unknown base sequence kind {self.kind!r}")
        if self.kind == "custom":
            if not self.custom_bases:
                raise ValueError("custom base sequence needs at least one base")
            bases = tuple(Fraction(b) for b in self.custom_bases)
            for i, b in enumerate(bases, 1):
                if not 0 < b < 1:
                    raise DomainError(f"custom base #{i} = {b} is not inside (0, 1)")
            object.__setattr__(self, "custom_bases", bases)

    @classmethod
    def zi(cls) -> "BaseSequence":
        return cls("zi")

    @classmethod
    def zii(cls) -> "BaseSequence":
        return cls("zii")

    @classmethod
    def custom(cls, bases: Iterable, decreasing_beyond: bool = False) -> "BaseSequence":
        return cls("custom", tuple(Fraction(b) for b in bases), decreasing_beyond)

    @classmethod
    def parse(cls, text: str) -> "BaseSequence":
        """Read a custom sequence: one ``p/q`` per line, ``#`` comments allowed."""
        bases = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                p, q = (int(s) for s in line.split("/"))
            except ValueError:
                raise ValueError(f"line {lineno}: expected 'p/q', got {line!r}") from None
            if not 0 < p < q:
                raise DomainError(f"line {lineno}: need 0 < p < q, got {line!r}")
            bases.append(Fraction(p, q))
        return cls.custom(bases)

    @classmethod
    def from_selector(cls, sel: str) -> "BaseSequence":
        """``zi``, ``zii``, ``custom:<path>`` or ``custom:p/q,p/q,...``."""
        if sel in ("zi", "zii"):
            return cls(sel)
        if sel.startswith("custom:"):
            arg = sel[len("custom:"):]
            path = Path(arg)
            if "/" in arg and "," not in arg and path.exists():
                return cls.parse(path.read_text())
            return cls.custom(Fraction(b) for b in arg.split(","))
        raise ValueError(f"unknown sequence selector {sel!r}")

    @property
    def name(self) -> str:
        if self.kind != "custom":
            return self.kind
        return "custom:" + ",".join(f"{b.numerator}/{b.denominator}" for b in self.custom_bases)

    @property
    def length(self) -> int | None:
        return len(self.custom_bases) if self.kind == "custom" else None

    def base(self, k: int) -> Fraction:
        if k < 1:
            raise IndexError(f"base index starts at 1, got {k}")
        if self.kind == "zi":
            return Fraction(1, k * (k + 1))
        if self.kind == "zii":
            return Fraction(k, math.factorial(k + 1))
        if k > len(self.custom_bases):
            raise IndexError(f"custom sequence has {len(self.custom_bases)} bases, asked for #{k}")
        return self.custom_bases[k - 1]

    def check_depth(self, n: int) -> None:
        if n < 1:
            raise ValueError(f"depth must be >= 1, got {n}")
        if n > DEPTH_CAP:
            raise ValueError(f"depth {n} exceeds cap {DEPTH_CAP}")
        if self.kind == "custom" and n > len(self.custom_bases):
            raise IndexError(f"custom sequence has only {len(self.custom_bases)} bases")


def base(seq: BaseSequence, k: int, ctx: Context | int | None = None) -> tuple[Fraction, mpmath.mpf]:
    """Exact rational ``u_k`` and its rendering at context precision."""
    ctx = as_context(ctx)
    q = seq.base(k)
    return q, ctx.mpf(q)


@dataclass(frozen=True)
class TowerValue:
    value: Value
    depth: int
    seq: BaseSequence
    start: int = 1
    seed: Value | None = None

    @property
    def is_interval(self) -> bool:
        return isinstance(self.value, Interval)

    def enclosure(self) -> Interval:
        if self.is_interval:
            return self.value
        return Interval.exact(self.value)

    def __float__(self):
        v = self.value.mid if self.is_interval else self.value
        return float(v)


class _LogCache:
    """ln(u_k) per index, as point values or intervals at one precision."""

    def __init__(self, seq: BaseSequence, ctx: Context, interval: bool):
        self.seq, self.ctx, self.interval = seq, ctx, interval
        self._cache: dict[int, Value] = {}

    def __getitem__(self, k: int) -> Value:
        v = self._cache.get(k)
        if v is None:
            q = self.seq.base(k)
            if self.interval:
                p = self.ctx.prec
                v = Interval.exact(q.numerator, p).log() - Interval.exact(q.denominator, p).log()
            else:
                mp = self.ctx.mp
                with mp.extraprec(16):
                    v = mp.log(q.numerator) - mp.log(q.denominator)
                v = +v
            self._cache[k] = v
        return v


def _as_seed(seed, ctx: Context, interval: bool) -> Value:
    if interval:
        s = seed if isinstance(seed, Interval) else Interval.exact(
            seed if not isinstance(seed, float) else str(seed), ctx.prec
        )
        if s.lo <= 0 or s.hi > 1:
            raise DomainError(f"seed must lie in (0, 1], got {s!r}")
        return s.with_prec(ctx.prec)
    if isinstance(seed, Interval):
        raise TypeError("interval seed requires interval=True")
    s = ctx.mpf(seed)
    if not 0 < s <= 1:
        raise DomainError(f"seed must lie in (0, 1], got {s}")
    return s


def _tower(seq, start, stop, seed, ctx, interval, logs=None) -> Value:
    """Tower over ``u_start .. u_stop`` whose top base is raised to ``seed``."""
    logs = logs or _LogCache(seq, ctx, interval)
    e = seed
    if interval:
        for k in range(stop, start - 1, -1):
            e = pow_unit_from_log(logs[k], e)
        return e
    mp = ctx.mp
    for k in range(stop, start - 1, -1):
        e = mp.exp(e * logs[k])
    return e


def eval_tail(
    seq: BaseSequence, m: int, n: int, ctx: Context | int | None = None, interval: bool = False
) -> TowerValue:
    """Tower over bases ``u_m .. u_n``."""
    ctx = as_context(ctx)
    if m < 1 or n < m:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    seq.check_depth(n)
    one = Interval.exact(1, ctx.prec) if interval else ctx.mp.one
    v = _tower(seq, m, n, one, ctx, interval)
    return TowerValue(v, n - m + 1, seq, start=m)


def eval_tower(
    seq: BaseSequence, n: int, ctx: Context | int | None = None, interval: bool = False
) -> TowerValue:
    """``a_n = u_1 ** u_2 ** ... ** u_n`` (right-associated)."""
    return eval_tail(seq, 1, n, ctx, interval)


def eval_with_seed(
    seq: BaseSequence, n: int, seed, ctx: Context | int | None = None, interval: bool | None = None
) -> TowerValue:
    """Tower over ``u_1 .. u_n`` with the top exponent replaced by ``seed``."""
    ctx = as_context(ctx)
    seq.check_depth(n)
    if interval is None:
        interval = isinstance(seed, Interval)
    s = _as_seed(seed, ctx, interval)
    return TowerValue(_tower(seq, 1, n, s, ctx, interval), n, seq, seed=s)


def _require_zi(seq: BaseSequence, what: str):
    if seq.kind != "zi":
        raise ValueError(f"{what} is defined for the zi sequence only")


def lambert_tail_seed(
    seq: BaseSequence, n: int, ctx: Context | int | None = None, interval: bool = False
) -> Value:
    """``T_n = exp(-W(ln(n(n+1))))``, the fixed point of ``T = (n(n+1))**(-T)``."""
    _require_zi(seq, "lambert_tail_seed")
    if n < 1:
        raise ValueError("n must be >= 1")
    ctx = as_context(ctx)
    if interval:
        x = Interval.exact(n * (n + 1), ctx.prec).log()
        return (-lambert_w0_interval(x, ctx)).exp()
    mp = ctx.mp
    with mp.extraprec(16):
        t = mp.exp(-lambert_w0(mp.log(n * (n + 1)), ctx=ctx.with_prec(ctx.prec + 16)))
    return +t


def eval_stabilized(
    seq: BaseSequence, n: int, ctx: Context | int | None = None, interval: bool = False
) -> TowerValue:
    """Tower over ``u_1 .. u_n`` seeded with the Lambert fixed point ``T_{n+1}``."""
    _require_zi(seq, "eval_stabilized")
    ctx = as_context(ctx)
    seed = lambert_tail_seed(seq, n + 1, ctx, interval)
    return eval_with_seed(seq, n, seed, ctx, interval)


def enclose_tail_limits(
    seq: BaseSequence, m: int, d: int, ctx: Context | int | None = None
) -> Interval:
    """Certified hull of the tail truncations at depths ``d-1`` and ``d``.

    Odd-depth truncations of a tail increase and even-depth ones decrease, with
    every odd one below every even one.  The hull of two adjacent depths
    therefore contains every deeper truncation and both subsequence limits of
    the tail starting at ``u_m``.
    """
    if d < 2:
        raise ValueError("depth must be >= 2")
    ctx = as_context(ctx)
    seq.check_depth(m + d - 1)
    logs = _LogCache(seq, ctx, True)
    one = Interval.exact(1, ctx.prec)
    a = _tower(seq, m, m + d - 2, one, ctx, True, logs)
    b = _tower(seq, m, m + d - 1, one, ctx, True, logs)
    return a.hull(b)


def tower_sequence(
    seq: BaseSequence, n_max: int, ctx: Context | int | None = None, interval: bool = False
) -> list[Value]:
    """``[a_1, ..., a_{n_max}]`` sharing one log cache."""
    ctx = as_context(ctx)
    seq.check_depth(n_max)
    logs = _LogCache(seq, ctx, interval)
    one = Interval.exact(1, ctx.prec) if interval else ctx.mp.one
    return [_tower(seq, 1, n, one, ctx, interval, logs) for n in range(1, n_max + 1)]


def compose_prefix(
    seq: BaseSequence, m: int, seed: Interval, ctx: Context | int | None = None
) -> Interval:
    """Interval tower over ``u_1 .. u_m`` applied to an exponent enclosure."""
    ctx = as_context(ctx)
    seq.check_depth(m)
    return _tower(seq, 1, m, seed.with_prec(ctx.prec), ctx, True)


def values_at(seq: BaseSequence, indices: Sequence[int], ctx: Context, interval: bool) -> dict[int, Value]:
    logs = _LogCache(seq, ctx, interval)
    one = Interval.exact(1, ctx.prec) if interval else ctx.mp.one
    return {n: _tower(seq, 1, n, one, ctx, interval, logs) for n in indices}


def barrier_holds(theta, t, prec: int) -> tuple[bool, Interval, Interval]:
    """Check ``t < exp(-1/theta)`` and ``t**(t**theta) >= theta`` in interval arithmetic.

    When both hold, every two-level map ``u**(v**x)`` with ``v <= u <= t`` sends
    ``[theta, 1]`` into itself.  Returns the verdict together with the
    enclosures of ``theta * (-ln t)`` (must exceed 1) and ``t**(t**theta)``.
    """
    th = theta if isinstance(theta, Interval) else Interval.exact(theta, prec)
    tt = t if isinstance(t, Interval) else Interval.exact(t, prec)
    th, tt = th.with_prec(prec), tt.with_prec(prec)
    log_t = tt.log()
    slope = th * (-log_t)
    inner = pow_unit_from_log(log_t, th)
    value = pow_unit_from_log(log_t, inner)
    ok = slope.lo > 1 and value.lo >= th.hi
    return ok, slope, value


def tail_floor(seq: BaseSequence, j: int, ctx: Context | int | None = None) -> mpmath.mpf | None:
    """A certified lower bound for every even-depth truncation of the tail from ``u_j``.

    Requires the bases to be non-increasing from ``j`` on (true for zi and
    zii).  The bound is just below the upper fixed point of
    ``x -> t**(t**x)`` with ``t = u_j``; ``None`` if no usable bound exists.
    """
    if seq.kind == "custom" and not seq.decreasing_beyond:
        return None
    ctx = as_context(ctx)
    mp = ctx.mp
    p = ctx.prec
    t_q = seq.base(j)
    log_t = Interval.exact(t_q.numerator, p).log() - Interval.exact(t_q.denominator, p).log()
    lt = log_t.mid
    # below this the map t -> t**(t**x) is not monotone on (0, t]
    slope_floor = -1 / lt
    theta = mp.one
    for _ in range(200):
        nxt = mp.exp(mp.exp(theta * lt) * lt)
        if abs(nxt - theta) < mp.ldexp(theta, -p):
            break
        theta = nxt
    if theta <= slope_floor:
        return None
    t_exact = Interval.exact(t_q, p)
    delta = mp.ldexp(1, 32 - p)
    while delta < mp.mpf("0.5"):
        cand = theta * (1 - delta)
        if cand <= slope_floor:
            return None
        if barrier_holds(cand, t_exact, p)[0]:
            return +cand
        delta *= 256
    return None


def enclose_tail_even_limit(
    seq: BaseSequence, j: int, ctx: Context | int | None = None, d: int = 2
) -> Interval:
    """Enclosure of the limit of the even-depth truncations of the tail from ``u_j``.

    Upper end: the depth-``d`` truncation (``d`` even; these decrease).
    Lower end: :func:`tail_floor` when available, otherwise the depth ``d-1``
    truncation (odd truncations lie below every even one).
    """
    if d < 2 or d % 2:
        raise ValueError("d must be an even depth >= 2")
    ctx = as_context(ctx)
    seq.check_depth(j + d - 1)
    logs = _LogCache(seq, ctx, True)
    one = Interval.exact(1, ctx.prec)
    upper = _tower(seq, j, j + d - 1, one, ctx, True, logs)
    floor = tail_floor(seq, j, ctx)
    if floor is not None and floor <= upper.hi:
        return Interval(floor, upper.hi, ctx.prec)
    lower = _tower(seq, j, j + d - 2, one, ctx, True, logs)
    return Interval(lower.lo, upper.hi, ctx.prec)
