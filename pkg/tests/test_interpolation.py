import random
from fractions import Fraction

import mpmath
import pytest

from oracles import tower, zi_base, zi_term
from towerlab.interpolation import (
    finite_difference,
    interp_csv,
    interp_derivative,
    interp_state,
    interp_value,
    product_csv,
    product_diagnostic,
    smooth_step,
)
from towerlab.numerics import Context, to_fraction
from towerlab.towers import BaseSequence

ZI = BaseSequence.zi()
CTX = Context(133)  # ~40 decimal digits


def test_smooth_step_branches():
    assert smooth_step(-3) == (1, 0)
    assert smooth_step("0.5")[0] == mpmath.mpf("0.5")
    v, d = smooth_step(1)
    assert v == 0 and abs(d) < 1e-30
    assert smooth_step(0) == (1, 0)
    # third branch is x > 1: H stays continuous at 1
    assert smooth_step("1.0000001")[0] == 0
    assert smooth_step("0.9999999")[0] < 1e-12


def test_smooth_step_derivative_matches_difference():
    ctx = Context(128)
    h = ctx.mpf("1e-15")
    for x in ("0.1", "0.37", "0.8"):
        fd = (smooth_step(ctx.mpf(x) + h, ctx)[0] - smooth_step(ctx.mpf(x) - h, ctx)[0]) / (2 * h)
        assert abs(fd - smooth_step(x, ctx)[1]) < 1e-20


@pytest.mark.parametrize("n", range(1, 11))
def test_integer_points_reproduce_terms(n):
    assert abs(to_fraction(interp_value(ZI, n, CTX)) - Fraction(zi_term(n, 50))) < Fraction(1, 10**35)


def test_value_at_half_integer_is_between_neighbours():
    v = interp_value(ZI, "2.5", CTX)
    assert interp_value(ZI, 3, CTX) < v < interp_value(ZI, 2, CTX)


def test_value_at_half_integer_oracle():
    # at x = 2.5: A_3 = u_3 ** H(0.5) = u_3 ** (1/2), so A_1 = u_1 ** u_2 ** sqrt(u_3)
    with mpmath.workprec(200):
        ref = tower([zi_base(1), zi_base(2)], 50, seed=mpmath.nstr(mpmath.sqrt(mpmath.mpf(1) / 12), 60))
    assert abs(to_fraction(interp_value(ZI, "2.5", CTX)) - Fraction(ref)) < Fraction(1, 10**35)


def test_continuity_at_integers():
    eps = CTX.mpf("1e-9")
    for n in range(2, 21):
        a = interp_value(ZI, n, CTX)
        assert abs(interp_value(ZI, n + eps, CTX) - a) <= 1e-6
        assert abs(interp_value(ZI, n - eps, CTX) - a) <= 1e-6


def test_truncation_is_exact():
    for x in ("1.2", "3.3", "7.9"):
        assert interp_value(ZI, x, CTX) == interp_value(ZI, x, CTX, depth=40)


def test_state_shape():
    st = interp_state(ZI, "4.5", CTX)
    assert st.depth == 6 and len(st.A_values) == 6 and len(st.b_values) == 6
    assert st.A_values[-1] == 1
    assert all(0 < a <= 1 for a in st.A_values)
    assert abs(st.b_values[0] - CTX.mp.log(2)) < 1e-30


def test_derivative_matches_finite_difference():
    rng = random.Random(2024)
    done = 0
    while done < 100:
        x = rng.uniform(2, 20)
        if abs(x - round(x)) < 1e-3:
            continue
        xs = CTX.mpf(repr(x))
        d = interp_derivative(ZI, xs, CTX)
        fd = finite_difference(ZI, xs, "1e-8", CTX)
        assert abs(d - fd) <= 1e-6 * abs(fd)
        done += 1


def test_derivative_zero_at_integers_and_sign_alternates():
    assert interp_derivative(ZI, 4, CTX) == 0
    signs = [mpmath.sign(interp_derivative(ZI, CTX.mpf(m) + CTX.mpf("0.5"), CTX)) for m in range(2, 20)]
    assert all(a == -b for a, b in zip(signs, signs[1:]))
    assert signs[0] < 0  # A_1 falls from a_2 to a_3


def test_zii_is_rejected():
    with pytest.raises(ValueError):
        interp_value(BaseSequence.zii(), 2)
    with pytest.raises(ValueError):
        interp_value(ZI, "0.5")


def test_product_diagnostic():
    rows = product_diagnostic(ZI, 30, CTX)
    assert [r.m for r in rows] == list(range(1, 31))
    assert rows[0].product < 1
    assert abs(rows[0].product - interp_value(ZI, "1.5", CTX) * CTX.mp.log(2)) < 1e-30
    for r in rows:
        assert abs(r.product - CTX.mp.fprod(r.factors)) <= abs(r.product) * 1e-30
    # the factors alternate around 1: A_k(x) is a tail tower, small for odd k
    f = rows[-1].factors
    assert all(a < 1 for a in f[0::2]) and all(b > 1 for b in f[1::2])


def test_csv_outputs():
    text = interp_csv(ZI, ["2.5", "3"], CTX, 8)
    lines = text.splitlines()
    assert lines[0] == "x,A1,dA1"
    assert lines[2].endswith(",0.0")
    p = product_csv(product_diagnostic(ZI, 3, CTX), 6).splitlines()
    assert p[0] == "m,term,P_m" and len(p) == 4
