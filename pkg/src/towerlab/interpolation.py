"""Smooth interpolation of the zi tower sequence.

With the step kernel ``H`` and ``a_n(x) = u_n ** H(n - x)``, the recursion
``A_n(x) = a_n(x) ** A_{n+1}(x)`` gives a once-differentiable ``A_1`` with
``A_1(n) = a_n`` at every integer ``n >= 1``.  For ``n > floor(x) + 1`` the
kernel vanishes, so the recursion is exact when cut at depth ``floor(x) + 2``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import mpmath

from .numerics import Context, as_context
from .towers import BaseSequence, _LogCache


def smooth_step(x, ctx: Context | int | None = None) -> tuple[mpmath.mpf, mpmath.mpf]:
    """``(H(x), H'(x))``: 1 left of 0, ``(cos(pi x) + 1)/2`` on [0, 1], 0 right of 1."""
    ctx = as_context(ctx)
    mp = ctx.mp
    x = ctx.mpf(x)
    if x < 0:
        return mp.one, mp.zero
    if x > 1:
        return mp.zero, mp.zero
    return (mp.cospi(x) + 1) / 2, -mp.pi * mp.sinpi(x) / 2


@dataclass
class InterpState:
    x: mpmath.mpf
    depth: int
    A_values: list  # A_1 .. A_depth
    b_values: list  # ln(k(k+1)) for k = 1 .. depth


def _check_seq(seq: BaseSequence):
    if seq.kind != "zi":
        raise ValueError("interpolation is defined for the zi sequence")


def interp_state(seq: BaseSequence, x, ctx: Context | int | None = None, depth: int | None = None) -> InterpState:
    _check_seq(seq)
    ctx = as_context(ctx)
    mp = ctx.mp
    x = ctx.mpf(x)
    if x < 1:
        raise ValueError("x must be >= 1")
    fl = int(mp.floor(x))
    top = fl + 2 if depth is None else max(depth, fl + 2)
    logs = _LogCache(seq, ctx, False)
    A = [mp.one] * (top + 1)
    for n in range(top - 1, 0, -1):
        h, _ = smooth_step(n - x, ctx)
        A[n] = mp.exp(h * A[n + 1] * logs[n]) if h else mp.one
    b = [-logs[k] for k in range(1, top + 1)]
    return InterpState(x, top, A[1:], b)


def interp_value(seq: BaseSequence, x, ctx: Context | int | None = None, depth: int | None = None) -> mpmath.mpf:
    """``A_1(x)``; ``depth`` beyond ``floor(x) + 2`` only adds factors equal to 1."""
    return interp_state(seq, x, ctx, depth).A_values[0]


def interp_derivative(seq: BaseSequence, x, ctx: Context | int | None = None) -> mpmath.mpf:
    """Closed-form ``A_1'(x)``.

    With ``f = floor(x)`` and ``b_k = ln(k(k+1))``, only the kernel of level
    ``f + 1`` moves, giving
    ``A_1' = (pi/2) sin(pi (x - f)) A_{f+2} prod_{k=1}^{f+1} (-A_k b_k)``.
    Zero at integers.
    """
    ctx = as_context(ctx)
    mp = ctx.mp
    x = ctx.mpf(x)
    fl = int(mp.floor(x))
    if x == fl:
        return mp.zero
    st = interp_state(seq, x, ctx)
    prod = mp.one
    for k in range(fl + 1):
        prod *= -st.A_values[k] * st.b_values[k]
    return mp.pi / 2 * mp.sinpi(x - fl) * st.A_values[fl + 1] * prod


def finite_difference(seq: BaseSequence, x, h="1e-8", ctx: Context | int | None = None) -> mpmath.mpf:
    ctx = as_context(ctx)
    x, h = ctx.mpf(x), ctx.mpf(h)
    return (interp_value(seq, x + h, ctx) - interp_value(seq, x - h, ctx)) / (2 * h)


@dataclass
class ProductRow:
    m: int
    term: mpmath.mpf  # A_m(x_m) * b_m
    product: mpmath.mpf  # prod_{k<=m} A_k(x_m) * b_k
    factors: list


def product_diagnostic(seq: BaseSequence, m_max: int, ctx: Context | int | None = None) -> list[ProductRow]:
    """Magnitude of the product in ``A_1'`` sampled at ``x_m = m + 1/2``, m = 1..m_max."""
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    ctx = as_context(ctx)
    rows = []
    for m in range(1, m_max + 1):
        st = interp_state(seq, ctx.mpf(m) + ctx.mpf(1) / 2, ctx)
        factors = [st.A_values[k] * st.b_values[k] for k in range(m)]
        prod = ctx.mp.fprod(factors)
        rows.append(ProductRow(m, factors[-1], prod, factors))
    return rows


def interp_csv(seq: BaseSequence, xs, ctx: Context | int | None = None, digits: int = 15) -> str:
    ctx = as_context(ctx)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["x", "A1", "dA1"])
    for x in xs:
        w.writerow([
            mpmath.nstr(ctx.mpf(x), digits),
            mpmath.nstr(interp_value(seq, x, ctx), digits),
            mpmath.nstr(interp_derivative(seq, x, ctx), digits),
        ])
    return out.getvalue()


def product_csv(rows: list[ProductRow], digits: int = 15) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["m", "term", "P_m"])
    for r in rows:
        w.writerow([r.m, mpmath.nstr(r.term, digits), mpmath.nstr(r.product, digits)])
    return out.getvalue()
