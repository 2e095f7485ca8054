"""Even/odd subsequence limits, order checks on computed terms, and the
error-decay exponent fit."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from .numerics import Context, Interval, as_context, decimal_down, decimal_up, to_fraction
from .towers import (
    DEPTH_CAP,
    BaseSequence,
    compose_prefix,
    enclose_tail_even_limit,
    values_at,
)

PARITIES = ("even", "odd")


class InsufficientContraction(ArithmeticError):
    """The enclosure did not reach its width target within the depth/precision caps."""

    def __init__(self, message: str, best: Interval | None = None):
        super().__init__(message)
        self.best = best


# --- certified digits --------------------------------------------------------


def _scaled(x: mpmath.mpf, digits: int) -> Fraction:
    return to_fraction(x) * 10**digits


def rounded_digits(iv: Interval, digits: int) -> str | None:
    """``0.d1..dD`` rounded to nearest, or None unless both endpoints agree.

    Rounding is monotone, so agreement at the endpoints certifies every value
    inside the interval.
    """
    half = Fraction(1, 2)
    lo = math.floor(_scaled(iv.lo, digits) + half)
    hi = math.floor(_scaled(iv.hi, digits) + half)
    if lo != hi:
        return None
    return _render(lo, digits)


def truncated_digits(iv: Interval, digits: int) -> str | None:
    """``0.d1..dD`` by truncation, or None unless both endpoints agree."""
    lo = math.floor(_scaled(iv.lo, digits))
    hi = math.floor(_scaled(iv.hi, digits))
    if lo != hi:
        return None
    return _render(lo, digits)


def _render(n: int, digits: int) -> str:
    sign = "-" if n < 0 else ""
    s = str(abs(n)).rjust(digits + 1, "0")
    return f"{sign}{s[:-digits]}.{s[-digits:]}" if digits else f"{sign}{s}"


def certified_fraction_digits(iv: Interval, limit: int = 100_000) -> list[int]:
    """Leading fractional decimal digits (truncation) shared by both endpoints."""
    lo, hi = to_fraction(iv.lo), to_fraction(iv.hi)
    if math.floor(lo) != math.floor(hi):
        return []
    whole = math.floor(lo)
    lo, hi = lo - whole, hi - whole
    out = []
    # a degenerate interval's expansion terminates; trailing zeros are not reported
    while len(out) < limit and (lo or hi):
        lo *= 10
        hi *= 10
        dl, dh = math.floor(lo), math.floor(hi)
        if dl != dh:
            break
        out.append(dl)
        lo -= dl
        hi -= dh
    return out


# --- limit enclosures --------------------------------------------------------


@dataclass(frozen=True)
class LimitEnclosure:
    seq: BaseSequence
    parity: str
    interval: Interval
    depth_used: int
    decimal_digits_certified: int

    def digits(self, n: int | None = None) -> str:
        """Certified digits rounded to nearest (``n`` defaults to the certified count)."""
        n = self.decimal_digits_certified if n is None else n
        s = rounded_digits(self.interval, n)
        if s is None:
            raise InsufficientContraction(f"{n} rounded digits are not certified", self.interval)
        return s

    def to_json(self) -> dict:
        p = self.interval.prec
        sig = int(p * 0.30103) + 4
        return {
            "seq": self.seq.name,
            "parity": self.parity,
            "digits": self.decimal_digits_certified,
            "value": self.digits(),
            "lo": decimal_down(self.interval.lo, sig),
            "hi": decimal_up(self.interval.hi, sig),
            "depth": self.depth_used,
            "prec": p,
        }


def _check_parity(parity: str):
    if parity not in PARITIES:
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")


def _limit_step(seq: BaseSequence, parity: str, m: int, ctx: Context) -> Interval:
    """Enclosure of the parity limit from a prefix of length ``m`` (``m`` of matching parity).

    ``a_n`` with ``n`` of the requested parity is the prefix tower over
    ``u_1 .. u_m`` raised to an even-depth truncation of the tail from
    ``u_{m+1}``; the prefix is continuous, so the limit is its image of the
    tail's even-depth limit.
    """
    tail = enclose_tail_even_limit(seq, m + 1, ctx)
    return compose_prefix(seq, m, tail, ctx)


def limit_schedule(parity: str, ctx: Context, steps: int):
    """Fixed (prefix length, precision) schedule; identical for every target."""
    m = 8 if parity == "even" else 9
    prec = ctx.prec
    for _ in range(steps):
        yield m, prec
        m = 2 * m if parity == "even" else 2 * m - 1
        prec *= 2


def enclose_subsequence_limit(
    seq: BaseSequence,
    parity: str,
    digits: int,
    ctx: Context | int | None = None,
    max_steps: int = 9,
) -> LimitEnclosure:
    """Interval of width <= 10**-digits containing the even (``L``) or odd (``l``) limit.

    Prefix length and precision both double along a fixed schedule and each
    step is intersected with the previous one, so a larger ``digits`` always
    yields a sub-interval of the smaller one.  Stops once the width target is
    met and the rounded digits are certified.
    """
    _check_parity(parity)
    if digits < 1:
        raise ValueError("digits must be >= 1")
    if seq.kind == "custom":
        raise ValueError("subsequence limits need an infinite base sequence (zi or zii)")
    ctx = as_context(ctx)
    target = Fraction(1, 10**digits)
    best = None
    m_used = 0
    for m, prec in limit_schedule(parity, ctx, max_steps):
        if m + 2 > DEPTH_CAP:
            break
        iv = _limit_step(seq, parity, m, Context(prec))
        best = iv if best is None else best.intersect(iv)
        m_used = m
        if to_fraction(best.width) <= target and rounded_digits(best, digits) is not None:
            return LimitEnclosure(seq, parity, best, m_used, digits)
    raise InsufficientContraction(
        f"{seq.name} {parity} limit: no certified {digits}-digit enclosure "
        f"within {max_steps} refinement steps (last depth {m_used})",
        best,
    )


# --- order checks ------------------------------------------------------------


@dataclass
class LemmaReport:
    seq: str
    n: int
    lemma1_ok: bool
    lemma2_ok: bool
    first_violation: int | None = None
    indeterminate: list[tuple[int, int]] = field(default_factory=list)
    comparisons: int = 0
    max_prec: int = 0

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "n": self.n,
            "lemma1_ok": self.lemma1_ok,
            "lemma2_ok": self.lemma2_ok,
            "first_violation": self.first_violation,
            "indeterminate": [list(p) for p in self.indeterminate],
            "comparisons": self.comparisons,
            "max_prec": self.max_prec,
        }


def _order_claims(N: int):
    """(i, j, expected sign of a(j) - a(i), lemma) for every claimed order relation."""
    for i in range(1, N - 1):
        # odd terms increase, even terms decrease
        yield i, i + 2, (1 if i % 2 else -1), 1
    for i in range(1, N):
        # terms go up after odd n and down after even n
        yield i, i + 1, (1 if i % 2 else -1), 2


def check_dolan_lemmas(
    seq: BaseSequence, N: int, ctx: Context | int | None = None, max_prec: int = 1 << 15
) -> LemmaReport:
    """Verify the alternating order of ``a(1..N)`` with interval comparisons.

    A comparison counts only when the enclosures are disjoint; overlapping
    ones are retried at doubled precision up to ``max_prec`` and otherwise
    reported as indeterminate (never as violations).
    """
    if N < 3:
        raise ValueError("N must be >= 3")
    ctx = as_context(ctx)
    seq.check_depth(N)
    prec = ctx.prec
    vals = values_at(seq, range(1, N + 1), Context(prec), True)
    one = Interval.exact(1, prec)
    claims = list(_order_claims(N))
    pending = claims
    violations: list[tuple[int, int]] = []
    decided = 0
    lemma1_ok = lemma2_ok = True
    # the chain of even terms starts below 1
    top_undecided = False
    c = vals[2].compare(one)
    if c is None:
        top_undecided = True
    elif c != -1:
        violations.append((2, 1))
        lemma1_ok = False
    while True:
        undecided = []
        for i, j, sign, lemma in pending:
            c = vals[j].compare(vals[i])
            if c is None:
                undecided.append((i, j, sign, lemma))
                continue
            decided += 1
            if c != sign:
                violations.append((j, lemma))
                if lemma == 1:
                    lemma1_ok = False
                else:
                    lemma2_ok = False
        if not undecided or prec * 2 > max_prec:
            pending = undecided
            break
        prec *= 2
        need = sorted({k for i, j, _, _ in undecided for k in (i, j)})
        vals.update(values_at(seq, need, Context(prec), True))
        pending = undecided
    if top_undecided:
        # a(2) < 1 holds for any bases in (0, 1); retry it at the final precision
        c = values_at(seq, [2], Context(prec), True)[2].compare(one)
        if c is None:
            pending.insert(0, (0, 2, -1, 1))  # index 0 stands for the constant 1
        elif c != -1:
            violations.append((2, 1))
            lemma1_ok = False
    first = min((j for j, _ in violations), default=None)
    return LemmaReport(
        seq=seq.name,
        n=N,
        lemma1_ok=lemma1_ok,
        lemma2_ok=lemma2_ok,
        first_violation=first,
        indeterminate=[(i, j) for i, j, _, _ in pending],
        comparisons=decided,
        max_prec=prec,
    )


# --- error-decay exponent ----------------------------------------------------


@dataclass
class RateFit:
    k_hat: float
    c_hat: float
    residual: float
    n_range: tuple[int, int]
    points: list[tuple[int, float]] = field(default_factory=list)
    dropped: list[int] = field(default_factory=list)
    seq: str = ""
    parity: str = ""

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "parity": self.parity,
            "k_hat": self.k_hat,
            "c_hat": self.c_hat,
            "residual": self.residual,
            "n_range": list(self.n_range),
            "points": [[n, v] for n, v in self.points],
            "dropped": self.dropped,
        }


def fit_rate(ns, neg_log10_eps) -> tuple[float, float, float]:
    """Least squares ``log(-log10 eps) = k log n + c``; returns (k, c, rms residual)."""
    xs = [math.log(n) for n in ns]
    ys = [math.log(v) for v in neg_log10_eps]
    if len(xs) < 2:
        raise ValueError("need at least two points to fit")
    k, c = statistics.linear_regression(xs, ys)
    rms = math.sqrt(sum((y - (k * x + c)) ** 2 for x, y in zip(xs, ys)) / len(xs))
    return k, c, rms


def estimate_rate(
    seq: BaseSequence,
    parity: str,
    n_min: int,
    n_max: int,
    ctx: Context | int | None = None,
    max_digits: int = 4096,
) -> RateFit:
    """Fit the growth exponent of ``-log10 |a_n - limit|`` over ``n`` of one parity.

    The reference limit is refined until its width is at most a tenth of every
    error it is compared against; errors still unresolved at ``max_digits``
    are dropped and listed.
    """
    _check_parity(parity)
    ctx = as_context(ctx)
    want = 0 if parity == "even" else 1
    ns = [n for n in range(max(n_min, 1), n_max + 1) if n % 2 == want]
    if len(ns) < 4:
        raise ValueError(f"need at least 4 {parity} indices in [{n_min}, {n_max}]")
    ref_digits = 40
    while True:
        ref = enclose_subsequence_limit(seq, parity, ref_digits, ctx)
        prec = max(ref.interval.prec, int(ref_digits * 3.33) + 64)
        terms = values_at(seq, ns, Context(prec), True)
        mid = Interval.exact(ref.interval.mid, prec)
        points, dropped = [], []
        for n in ns:
            diff = terms[n] - mid
            # smallest |a_n - mid| consistent with the enclosures
            err = diff.lo if diff.lo > 0 else (-diff).lo
            noise = ref.interval.width + terms[n].width
            if diff.lo <= 0 <= diff.hi or err < 10 * noise:
                dropped.append(n)
            else:
                points.append((n, -float(mpmath.log10(abs(diff.mid)))))
        if not dropped or ref_digits >= max_digits:
            break
        ref_digits = min(2 * ref_digits, max_digits)
    if len(points) < 2:
        raise InsufficientContraction(f"only {len(points)} resolvable error samples", ref.interval)
    k, c, rms = fit_rate([n for n, _ in points], [v for _, v in points])
    return RateFit(k, c, rms, (n_min, n_max), points, dropped, seq.name, parity)
