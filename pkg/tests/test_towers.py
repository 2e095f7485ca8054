from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import tower, zi_base, zi_term, zii_base
from towerlab.numerics import Context, DomainError, Interval, to_fraction
from towerlab.towers import (
    DEPTH_CAP,
    BaseSequence,
    enclose_tail_limits,
    eval_stabilized,
    eval_tail,
    eval_tower,
    eval_with_seed,
    lambert_tail_seed,
    tower_sequence,
)

ZI = BaseSequence.zi()
ZII = BaseSequence.zii()


def close(x, ref: Decimal, tol=Fraction(1, 10**50)) -> bool:
    return abs(to_fraction(x) - Fraction(ref)) <= tol


def inside(iv: Interval, ref: Decimal, slack=Fraction(1, 10**55)) -> bool:
    r = Fraction(ref)
    return to_fraction(iv.lo) - slack <= r <= to_fraction(iv.hi) + slack


def test_bases_are_exact():
    assert ZI.base(1) == Fraction(1, 2)
    assert ZI.base(3) == Fraction(1, 12)
    assert ZII.base(1) == Fraction(1, 2)
    assert ZII.base(2) == Fraction(1, 3)
    assert ZII.base(4) == Fraction(1, 30)
    for k in range(1, 30):
        assert ZI.base(k) == zi_base(k)
        assert ZII.base(k) == zii_base(k)


def test_base_index_and_depth_errors():
    with pytest.raises(IndexError):
        ZI.base(0)
    with pytest.raises(ValueError):
        eval_tower(ZI, 0)
    with pytest.raises(ValueError):
        eval_tower(ZI, DEPTH_CAP + 1)
    with pytest.raises(IndexError):
        eval_tower(BaseSequence.custom(["1/2", "1/3"]), 3)


def test_custom_rejects_bases_outside_unit_interval():
    with pytest.raises(DomainError):
        BaseSequence.custom([Fraction(3, 2)])
    with pytest.raises(DomainError):
        BaseSequence.custom([0])


def test_custom_parse_reports_line_numbers():
    seq = BaseSequence.parse("# comment\n1/2\n\n1/6  # tail\n")
    assert seq.custom_bases == (Fraction(1, 2), Fraction(1, 6))
    with pytest.raises(ValueError, match="line 2"):
        BaseSequence.parse("1/2\nhalf\n")
    with pytest.raises(DomainError, match="line 1"):
        BaseSequence.parse("3/2\n")


def test_selectors(tmp_path):
    assert BaseSequence.from_selector("zi") == ZI
    assert BaseSequence.from_selector("custom:1/2,1/3").custom_bases == (Fraction(1, 2), Fraction(1, 3))
    f = tmp_path / "b.txt"
    f.write_text("1/2\n1/5\n")
    assert BaseSequence.from_selector(f"custom:{f}").custom_bases == (Fraction(1, 2), Fraction(1, 5))
    with pytest.raises(ValueError):
        BaseSequence.from_selector("zeta")


@pytest.mark.parametrize("n", [1, 2, 3, 7, 15])
def test_point_and_interval_agree_with_decimal_oracle(n):
    ref = zi_term(n, 70)
    assert close(eval_tower(ZI, n, Context(256)).value, ref)
    assert inside(eval_tower(ZI, n, Context(256), interval=True).value, ref)


def test_zii_terms_match_oracle():
    for n in (1, 4, 9):
        ref = tower([zii_base(k) for k in range(1, n + 1)], 70)
        assert inside(eval_tower(ZII, n, Context(256), True).value, ref)


def test_tail_tower_starts_at_m():
    ref = tower([zi_base(k) for k in range(3, 8)], 70)
    assert close(eval_tail(ZI, 3, 7, Context(256)).value, ref)


def test_tower_sequence_matches_single_evaluations():
    seq = tower_sequence(ZI, 8, Context(128))
    for n, v in enumerate(seq, 1):
        assert v == eval_tower(ZI, n, Context(128)).value


@given(st.lists(st.fractions(min_value=Fraction(1, 1000), max_value=Fraction(999, 1000), max_denominator=1000),
                min_size=1, max_size=12))
@settings(max_examples=60, deadline=None)
def test_interval_encloses_point_value(bases):
    seq = BaseSequence.custom(bases)
    n = len(bases)
    iv = eval_tower(seq, n, Context(160), interval=True).value
    ref = tower(bases, 60)
    assert inside(iv, ref, Fraction(1, 10**40))


@given(st.lists(st.fractions(min_value=Fraction(1, 100), max_value=Fraction(99, 100), max_denominator=100),
                min_size=3, max_size=10))
@settings(max_examples=60, deadline=None)
def test_alternating_order_holds_for_any_unit_bases(bases):
    seq = BaseSequence.custom(bases)
    vals = tower_sequence(seq, len(bases), Context(192), interval=True)
    for i in range(len(vals) - 2):
        c = vals[i + 2].compare(vals[i])
        assert c in ((1, None) if i % 2 == 0 else (-1, None))  # odd index i+1 rises, even falls


def test_seed_monotonicity():
    # each base below the seed is a decreasing map, so the sign flips with depth
    ctx = Context(128)
    lo3 = eval_with_seed(ZI, 3, Fraction(1, 5), ctx).value
    hi3 = eval_with_seed(ZI, 3, Fraction(4, 5), ctx).value
    lo4 = eval_with_seed(ZI, 4, Fraction(1, 5), ctx).value
    hi4 = eval_with_seed(ZI, 4, Fraction(4, 5), ctx).value
    assert lo3 > hi3
    assert lo4 < hi4


def test_lambert_seed_fixed_point():
    ctx = Context(256)
    mp = ctx.mp
    for n in (1, 2, 10, 50):
        t = lambert_tail_seed(ZI, n, ctx)
        assert abs(t - mp.power(n * (n + 1), -t)) < mp.mpf(10) ** -70
        iv = lambert_tail_seed(ZI, n, ctx, interval=True)
        assert iv.lo <= t <= iv.hi


def test_lambert_seed_value_at_one():
    t = lambert_tail_seed(ZI, 1, Context(128))
    assert f"{float(t):.12f}" == "0.641185744505"


def test_stabilized_is_zi_only():
    with pytest.raises(ValueError):
        eval_stabilized(ZII, 3)


def test_stabilized_damps_oscillation():
    ctx = Context(128)
    a = tower_sequence(ZI, 6, ctx)
    b = [eval_stabilized(ZI, n, ctx).value for n in range(1, 7)]
    for n in range(5):
        assert abs(b[n + 1] - b[n]) < abs(a[n + 1] - a[n])


def test_tail_limits_hull_contains_deeper_truncations():
    ctx = Context(256)
    hull = enclose_tail_limits(ZI, 3, 4, ctx)
    for d in range(4, 12):
        v = eval_tail(ZI, 3, 3 + d - 1, ctx).value
        assert hull.lo <= v <= hull.hi
