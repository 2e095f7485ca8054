"""Machine-checkable bounds on the subsequence limits.

* ``cipra_bounds``: two consecutive terms bracket every later term and both limits.
* ``dolan_certify``: a strict bound on ``L`` (even terms) or ``l`` (odd terms),
  either by pulling a candidate back through the inverse two-level maps
  ``G_n`` until it falls below a self-mapping barrier ``theta``, or by
  exhibiting a term of the monotone subsequence past the candidate.
* ``shooting_sequence`` / ``shooting_bisect``: the forward recurrence
  ``t_{k+1} = -ln t_k / ln(k(k+1))`` and a search for the candidates whose
  orbit stays strictly decreasing.  This is a heuristic diagnostic and runs
  in point arithmetic; everything else here is interval arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction

import mpmath
from mpmath.libmp import round_ceiling, round_floor

from .numerics import (
    Context,
    DomainError,
    Interval,
    as_context,
    decimal_down,
    decimal_up,
    parse_decimal,
)
from .towers import DEPTH_CAP, BaseSequence, _LogCache, _tower, barrier_holds, values_at

KINDS = ("cipra", "dolan_lower", "dolan_upper", "shooting")


def _sig_digits(prec: int) -> int:
    return int(prec * 0.30103) + 4


def _iv_json(iv: Interval) -> list[str]:
    d = _sig_digits(iv.prec)
    return [decimal_down(iv.lo, d), decimal_up(iv.hi, d)]


def _iv_from_json(pair, prec: int) -> Interval:
    return Interval(parse_decimal(pair[0], prec, round_floor), parse_decimal(pair[1], prec, round_ceiling), prec)


def _exact(x, prec: int) -> Interval:
    if isinstance(x, Interval):
        return x.with_prec(prec)
    if isinstance(x, (str, float, Decimal)):
        x = Fraction(Decimal(str(x)))
    return Interval.exact(x, prec)


def _dec(x) -> str | None:
    if x is None:
        return None
    if isinstance(x, Fraction):
        return str(Decimal(x.numerator) / Decimal(x.denominator))
    return str(Decimal(str(x)))


@dataclass
class Check:
    name: str
    passed: bool
    evidence: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "pass": self.passed, "evidence": self.evidence}


@dataclass
class Certificate:
    kind: str
    seq: BaseSequence
    parity: str
    bound: str
    depth: int
    theta: str | None
    t_max: str | None
    orbit: list[Interval]
    checks: list[Check]
    prec: int

    @property
    def valid(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "seq": self.seq.name,
            "parity": self.parity,
            "bound": self.bound,
            "depth": self.depth,
            "theta": self.theta,
            "t_max": self.t_max,
            "orbit": [_iv_json(iv) for iv in self.orbit],
            "checks": [c.to_json() for c in self.checks],
        }


# --- truncation bounds ---------------------------------------------------------


def cipra_bounds(seq: BaseSequence, k: int, ctx: Context | int | None = None) -> Interval:
    """``[a_{2k+1}, a_{2k}]`` as certified enclosures' hull.

    Every term from ``a_{2k}`` on, and both subsequence limits, lie inside.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ctx = as_context(ctx)
    seq.check_depth(2 * k + 1)
    v = values_at(seq, [2 * k, 2 * k + 1], ctx, True)
    return Interval(v[2 * k + 1].lo, v[2 * k].hi, ctx.prec)


def cipra_certificate(seq: BaseSequence, k: int, ctx: Context | int | None = None) -> Certificate:
    ctx = as_context(ctx)
    v = values_at(seq, [2 * k, 2 * k + 1], ctx, True)
    ordered = v[2 * k + 1].certainly_lt(v[2 * k])
    checks = [
        Check("odd_term_below_even_term", ordered, {"prec": ctx.prec, "n_odd": 2 * k + 1, "n_even": 2 * k}),
    ]
    # bound is the lower end; the upper end is the second orbit entry
    lower = _iv_json(v[2 * k + 1])[0]
    return Certificate("cipra", seq, "both", lower, k, None, None, [v[2 * k + 1], v[2 * k]], checks, ctx.prec)


# --- two-level maps and their inverses ---------------------------------------


def _pair(parity: str, n: int) -> tuple[int, int]:
    """Base indices of the n-th two-level map: (2n-1, 2n) for even, (2n, 2n+1) for odd."""
    if n < 1:
        raise ValueError("map index starts at 1")
    return (2 * n - 1, 2 * n) if parity == "even" else (2 * n, 2 * n + 1)


def dolan_F(
    seq: BaseSequence, n: int, x, ctx: Context | int | None = None, parity: str = "even"
) -> Interval:
    """Enclosure of ``u_i ** (u_j ** x)`` for the n-th base pair; increasing in x."""
    ctx = as_context(ctx)
    x = _exact(x, ctx.prec)
    if x.lo < 0 or x.hi > 1:
        raise DomainError(f"F_n needs x in [0, 1], got {x!r}")
    i, j = _pair(parity, n)
    seq.check_depth(j)
    logs = _LogCache(seq, ctx, True)
    inner = (x * logs[j]).exp()
    return (inner * logs[i]).exp()


def dolan_G(
    seq: BaseSequence, n: int, x, ctx: Context | int | None = None, parity: str = "even",
    logs: _LogCache | None = None,
) -> Interval:
    """Enclosure of ``ln(ln x / ln u_i) / ln u_j``, the inverse of :func:`dolan_F`."""
    ctx = as_context(ctx)
    x = _exact(x, ctx.prec)
    if not (x.lo > 0 and x.hi < 1):
        raise DomainError(f"G_n needs x strictly inside (0, 1), got {x!r}")
    i, j = _pair(parity, n)
    seq.check_depth(j)
    logs = logs or _LogCache(seq, ctx, True)
    return (x.log() / logs[i]).log() / logs[j]


# --- invariant-interval barrier ------------------------------------------------


@dataclass
class Lemma3Result:
    ok: bool
    indeterminate: bool
    monotone_ok: bool
    slope: Interval
    value: Interval

    def __bool__(self):
        return self.ok

    def evidence(self) -> dict:
        return {
            "prec": self.slope.prec,
            "theta_times_minus_log_tmax": _iv_json(self.slope),
            "tmax_pow_tmax_pow_theta": _iv_json(self.value),
            "indeterminate": self.indeterminate,
        }


def lemma3_check(theta, t_max, ctx: Context | int | None = None) -> Lemma3Result:
    """Certify ``t**(t**theta) >= theta`` for every ``t <= t_max``.

    (i) ``t_max < exp(-1/theta)`` makes ``t -> t**(t**theta)`` decreasing on
    ``(0, t_max]``; (ii) then the inequality at ``t_max`` covers all smaller t.
    """
    ctx = as_context(ctx)
    p = ctx.prec
    th, tm = _exact(theta, p), _exact(t_max, p)
    if not (0 < th.lo and th.hi < 1 and 0 < tm.lo and tm.hi < 1):
        raise DomainError("theta and t_max must lie in (0, 1)")
    ok, slope, value = barrier_holds(th, tm, p)
    monotone_ok = slope.lo > 1
    undecided = (slope.lo <= 1 < slope.hi) or (monotone_ok and value.lo < th.hi <= value.hi)
    return Lemma3Result(ok, undecided and not ok, monotone_ok, slope, value)


# --- inverse-map certificates --------------------------------------------------


def _outer_base_index(parity: str, m: int) -> int:
    """Index of the outer base of the first pair beyond the orbit."""
    return _pair(parity, m + 1)[0]


def _tail_bases_check(seq: BaseSequence, parity: str, m: int, t_max, prec: int) -> Check:
    start = _outer_base_index(parity, m)
    tm = Fraction(Decimal(str(t_max)))
    if seq.kind in ("zi", "zii"):
        # strictly decreasing bases: one comparison covers the whole tail
        u = seq.base(start)
        return Check("tail_bases_below_tmax", u <= tm, {
            "prec": prec, "first_index": start, "base": f"{u.numerator}/{u.denominator}",
            "reason": "bases strictly decreasing",
        })
    bases = seq.custom_bases[start - 1:]
    ok = bool(bases) and all(b <= tm for b in bases)
    ok = ok and all(a >= b for a, b in zip(bases, bases[1:])) and seq.decreasing_beyond
    return Check("tail_bases_below_tmax", ok, {
        "prec": prec, "first_index": start, "checked": len(bases),
        "decreasing_beyond": seq.decreasing_beyond,
    })


def _orbit_certificate(seq, parity, c, m, theta, t_max, prec) -> Certificate:
    """Pull ``c`` back through ``G_1..G_m``; landing below theta bounds the limit.

    Even terms: ``L = F_1(...F_m(L_m))`` with ``L_m`` the even-depth limit of the
    tail after ``u_{2m}``; that tail's bases are below ``t_max``, so ``L_m >= theta``.
    If ``L <= c`` then ``L_m <= G_m(...G_1(c)) < theta``, a contradiction, so
    ``L > c``.  Odd terms first invert ``x -> u_1**x`` (decreasing), which flips
    the conclusion to ``l < c``.
    """
    ctx = Context(prec)
    logs = _LogCache(seq, ctx, True)
    cc = _exact(c, prec)
    th = _exact(theta, prec)
    orbit: list[Interval] = []
    checks: list[Check] = []
    kind = "dolan_lower" if parity == "even" else "dolan_upper"
    y = cc
    in_domain = True
    try:
        if parity == "odd":
            y = y.log() / logs[1]
            orbit.append(y)
        for n in range(1, m + 1):
            if not (y.lo > 0 and y.hi < 1):
                in_domain = False
                break
            y = dolan_G(seq, n, y, ctx, parity, logs)
            orbit.append(y)
    except DomainError:
        in_domain = False
    in_domain = in_domain and y.lo > 0 and y.hi < 1
    checks.append(Check("orbit_in_unit_interval", in_domain, {"prec": prec, "steps": len(orbit)}))
    below = in_domain and y.hi < th.lo
    checks.append(Check("orbit_below_theta", below, {
        "prec": prec, "final": _iv_json(y), "theta": _dec(theta),
        "indeterminate": in_domain and not below and y.lo < th.hi,
    }))
    l3 = lemma3_check(theta, t_max, ctx)
    checks.append(Check("lemma3_barrier", l3.ok, l3.evidence()))
    checks.append(_tail_bases_check(seq, parity, m, t_max, prec))
    return Certificate(kind, seq, parity, _dec(c), m, _dec(theta), _dec(t_max), orbit, checks, prec)


def _term_certificate(seq, parity, c, max_index, prec) -> Certificate:
    """Exhibit a term of the monotone subsequence beyond ``c``.

    Even terms decrease to ``L``, so ``a_{2N} < c`` gives ``L < c``; odd terms
    increase to ``l``, so ``a_{2N+1} > c`` gives ``l > c``.
    """
    ctx = Context(prec)
    cc = _exact(c, prec)
    kind = "dolan_upper" if parity == "even" else "dolan_lower"
    start = 2 if parity == "even" else 1
    last = min(max_index, seq.length or DEPTH_CAP)
    logs = _LogCache(seq, ctx, True)
    one = Interval.exact(1, prec)
    found, term = None, None
    for n in range(start, last + 1, 2):
        term = _tower(seq, 1, n, one, ctx, True, logs)
        beyond = term.certainly_lt(cc) if parity == "even" else term.certainly_gt(cc)
        if beyond:
            found = n
            break
    name = "term_below_bound" if parity == "even" else "term_above_bound"
    checks = [Check(name, found is not None, {"prec": prec, "index": found, "scanned_to": found or last})]
    orbit = [term] if found is not None else []
    return Certificate(kind, seq, parity, _dec(c), found or 0, None, None, orbit, checks, prec)


def dolan_certify(
    seq: BaseSequence,
    parity: str,
    candidate,
    depth: int = 7,
    theta="0.8",
    t_max="0.033",
    ctx: Context | int | None = None,
    bound: str = "lower",
    max_index: int = 2000,
) -> Certificate:
    """Certificate that the even (``L``) or odd (``l``) limit is strictly above
    (``bound="lower"``) or below (``bound="upper"``) ``candidate``.

    Which method applies follows from the monotonicity of the subsequence:
    a lower bound on ``L`` and an upper bound on ``l`` need the inverse-map
    orbit; the other two are witnessed by a single term.
    """
    if parity not in ("even", "odd"):
        raise ValueError("parity must be 'even' or 'odd'")
    if bound not in ("lower", "upper"):
        raise ValueError("bound must be 'lower' or 'upper'")
    ctx = as_context(ctx)
    c = Fraction(Decimal(str(candidate))) if not isinstance(candidate, Fraction) else candidate
    if not 0 < c < 1:
        raise DomainError("candidate must lie in (0, 1)")
    use_orbit = (parity == "even") == (bound == "lower")
    if use_orbit:
        if depth < 1:
            raise ValueError("depth must be >= 1")
        return _orbit_certificate(seq, parity, candidate, depth, theta, t_max, ctx.prec)
    return _term_certificate(seq, parity, candidate, max_index, ctx.prec)


def replay_certificate(data: dict) -> Certificate:
    """Recompute a certificate from its serialized fields."""
    prec = _prec_of(data)
    seq = BaseSequence.from_selector(data["seq"])
    kind = data["kind"]
    if kind == "cipra":
        return cipra_certificate(seq, data["depth"], Context(prec))
    if kind == "shooting":
        raise ValueError("shooting reports are heuristic and are not replayed as certificates")
    parity = data["parity"]
    orbit_kind = "dolan_lower" if parity == "even" else "dolan_upper"
    if kind == orbit_kind:
        return _orbit_certificate(seq, parity, data["bound"], data["depth"], data["theta"], data["t_max"], prec)
    return _term_certificate(seq, parity, data["bound"], max(data["depth"], 1), prec)


def verify_replay(data: dict) -> bool:
    """True iff replaying reproduces the same JSON and the certificate is valid."""
    cert = replay_certificate(data)
    return cert.valid and cert.to_json() == data


def _prec_of(data: dict) -> int:
    for c in data.get("checks", []):
        p = c.get("evidence", {}).get("prec")
        if p:
            return int(p)
    raise ValueError("certificate carries no precision in its evidence")


# --- shooting ----------------------------------------------------------------


@dataclass
class ShootingReport:
    t1: mpmath.mpf
    horizon: int
    orbit: list
    monotone_prefix: int
    first_violation: dict | None = None
    domain_exit: int | None = None

    def to_json(self, digits: int = 12) -> dict:
        return {
            "t1": mpmath.nstr(self.t1, digits),
            "horizon": self.horizon,
            "orbit": [mpmath.nstr(t, digits) for t in self.orbit],
            "monotone_prefix": self.monotone_prefix,
            "first_violation": self.first_violation,
            "domain_exit": self.domain_exit,
        }


def shooting_sequence(t1, N: int, ctx: Context | int | None = None) -> ShootingReport:
    """Orbit ``t_1 .. t_N`` of ``t_{k+1} = -ln t_k / ln(k(k+1))`` (indices from 1)."""
    ctx = as_context(ctx)
    mp = ctx.mp
    if N < 2:
        raise ValueError("horizon N must be >= 2")
    t = ctx.mpf(Fraction(Decimal(str(t1)))) if isinstance(t1, (str, float, Decimal)) else ctx.mpf(t1)
    if not 0 < t < 1:
        raise DomainError("t1 must lie in (0, 1)")
    orbit = [t]
    exit_at = None
    for k in range(1, N):
        if not 0 < orbit[-1] < 1:
            exit_at = k
            break
        orbit.append(-mp.log(orbit[-1]) / mp.log(k * (k + 1)))
    if exit_at is None and not 0 < orbit[-1] < 1:
        exit_at = len(orbit)
    prefix = 1
    while prefix < len(orbit) and orbit[prefix] < orbit[prefix - 1]:
        prefix += 1
    violation = None
    if prefix < len(orbit):
        direction = "increase" if orbit[prefix] > orbit[prefix - 1] else "stall"
        violation = {"index": prefix + 1, "direction": direction}
    return ShootingReport(orbit[0], N, orbit, prefix, violation, exit_at)


@dataclass
class BisectResult:
    t1_star: mpmath.mpf
    bracket: Interval
    prefix: int
    flagged: bool = False
    note: str = ""

    def to_json(self, digits: int = 12) -> dict:
        return {
            "t1_star": mpmath.nstr(self.t1_star, digits),
            "bracket": [mpmath.nstr(self.bracket.lo, digits), mpmath.nstr(self.bracket.hi, digits)],
            "prefix": self.prefix,
            "flagged": self.flagged,
            "note": self.note,
        }


def shooting_bisect(
    lo, hi, N: int, ctx: Context | int | None = None, grid: int = 64, tol: float = 1e-12
) -> BisectResult:
    """Locate the candidates whose orbit has the longest monotone prefix at horizon N.

    A coarse grid finds the plateau of maximal prefix length; each edge of the
    plateau is then refined by bisection.  Returns the plateau midpoint and
    the plateau itself as bracket.  A plateau split into several runs on the
    grid is flagged and the widest run is used.
    """
    ctx = as_context(ctx)
    mp = ctx.mp
    a = ctx.mpf(Fraction(Decimal(str(lo))))
    b = ctx.mpf(Fraction(Decimal(str(hi))))
    if a > b:
        raise ValueError("need lo <= hi")

    def prefix(x) -> int:
        return shooting_sequence(x, N, ctx).monotone_prefix

    if a == b:
        return BisectResult(a, Interval(a, a, ctx.prec), prefix(a))
    xs = [a + (b - a) * i / grid for i in range(grid + 1)]
    ps = [prefix(x) for x in xs]
    best = max(ps)
    runs, start = [], None
    for i, p in enumerate(ps + [None]):
        if p == best and start is None:
            start = i
        elif p != best and start is not None:
            runs.append((start, i - 1))
            start = None
    flagged = len(runs) > 1
    i0, i1 = max(runs, key=lambda r: r[1] - r[0])
    tol = ctx.mpf(tol)

    def edge(inside, outside):
        while abs(outside - inside) > tol:
            mid = (inside + outside) / 2
            if prefix(mid) == best:
                inside = mid
            else:
                outside = mid
        return inside

    left = xs[i0] if i0 == 0 else edge(xs[i0], xs[i0 - 1])
    right = xs[i1] if i1 == grid else edge(xs[i1], xs[i1 + 1])
    note = "prefix profile has several maximal runs" if flagged else ""
    return BisectResult((left + right) / 2, Interval(left, right, ctx.prec), best, flagged, note)


def shooting_certificate(t1, N: int, ctx: Context | int | None = None) -> Certificate:
    """Record of a monotone orbit up to horizon N (heuristic, point arithmetic)."""
    ctx = as_context(ctx)
    rep = shooting_sequence(t1, N, ctx)
    checks = [Check("monotone_to_horizon", rep.monotone_prefix == N, {
        "prec": ctx.prec, "monotone_prefix": rep.monotone_prefix,
        "first_violation": rep.first_violation, "domain_exit": rep.domain_exit,
    })]
    orbit = [Interval.exact(t, ctx.prec) for t in rep.orbit]
    return Certificate("shooting", BaseSequence.zi(), "none", _dec(t1), N, None, None, orbit, checks, ctx.prec)
