import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expbasis import (
    BrokenInterval,
    IntervalUnion,
    Parallelepiped,
    RotatedSquare,
    ValidationError,
    as_interval_union,
    as_rational,
    broken_interval,
    contains,
    format_domain,
    measure,
    normalize_intervals,
    parse_domain,
    rotated_square,
)

rationals = st.fractions(min_value=-5, max_value=5, max_denominator=50)


@st.composite
def raw_intervals(draw, max_size=6):
    out = []
    for _ in range(draw(st.integers(1, max_size))):
        a = draw(rationals)
        length = draw(st.fractions(min_value=F(1, 50), max_value=3, max_denominator=50))
        out.append((a, a + length))
    return out


def test_as_rational_reads_decimals_exactly():
    assert as_rational("0.6") == F(3, 5)
    assert as_rational(" 2/7 ") == F(2, 7)
    assert as_rational(0.5) == F(1, 2)
    # floats convert bit-exactly, not to the nearest short decimal
    assert as_rational(0.1) == F(0.1) != F(1, 10)


@pytest.mark.parametrize("bad", ["x", "1/0", float("nan"), float("inf"), True, None])
def test_as_rational_rejects(bad):
    with pytest.raises(ValidationError):
        as_rational(bad)


@pytest.mark.parametrize("raw, expected, m", [
    ([(0, 1)], [(0, 1)], 1),
    ([(0, F("0.6")), (F("0.5"), F("1.4"))], [(0, F("1.4"))], F("1.4")),
    ([(1, F("1.4")), (0, F("0.6"))], [(0, F("0.6")), (1, F("1.4"))], 1),
])
def test_normalize_examples(raw, expected, m):
    u = normalize_intervals(raw)
    assert list(u) == expected
    assert u.measure == m


def test_normalize_merges_touching():
    assert list(normalize_intervals([(0, 1), (1, 2)])) == [(0, 2)]


@pytest.mark.parametrize("raw", [[], [(1, 1)], [(2, 1)]])
def test_normalize_rejects(raw):
    with pytest.raises(ValidationError):
        normalize_intervals(raw)


def test_interval_union_requires_canonical_form():
    with pytest.raises(ValidationError):
        IntervalUnion(((F(0), F(2)), (F(1), F(3))))


@given(raw_intervals())
def test_normalize_idempotent_and_measure_preserving(raw):
    u = normalize_intervals(raw)
    assert normalize_intervals(list(u)) == u
    # measure of the union via a fine rational grid of all endpoints
    pts = sorted({p for iv in raw for p in iv})
    covered = sum((b - a) for a, b in zip(pts, pts[1:])
                  if any(lo <= (a + b) / 2 < hi for lo, hi in raw))
    assert u.measure == covered


@given(raw_intervals(), st.integers(-4, 4))
def test_shift_preserves_measure(raw, n):
    u = normalize_intervals(raw)
    assert u.shifted(n).measure == u.measure


@pytest.mark.parametrize("args, expected", [
    ((F(1, 2), 1, 2), [(0, F(1, 2)), (F(5, 2), 3)]),
    ((F(1, 2), 1, 0), [(0, 1)]),
    ((F("0.3"), F("0.8"), F("1.1")), [(0, F("0.3")), (F("1.4"), F("1.9"))]),
])
def test_broken_interval_examples(args, expected):
    assert list(broken_interval(*args)) == expected


@pytest.mark.parametrize("args", [(0, 1, 0), (1, 1, 0), (F(1, 2), 1, -1)])
def test_broken_interval_rejects(args):
    with pytest.raises(ValidationError):
        broken_interval(*args)


@given(st.fractions(min_value=F(1, 100), max_value=3, max_denominator=100),
       st.fractions(min_value=F(1, 100), max_value=3, max_denominator=100),
       st.fractions(min_value=0, max_value=3, max_denominator=100))
def test_broken_measure_is_L(x, y, r):
    alpha, L = min(x, y), max(x, y)
    if alpha == L:
        return
    assert measure(broken_interval(alpha, L, r)) == L
    assert measure(BrokenInterval(alpha, L, r)) == L


def test_rotated_square_examples():
    box = rotated_square(1, 0)
    np.testing.assert_allclose(box.matrix, np.eye(2))
    np.testing.assert_allclose(box.offset, [-0.5, -0.5])
    assert rotated_square(2, 0).measure == pytest.approx(4)
    c = math.sqrt(2) / 2
    np.testing.assert_allclose(rotated_square(1, math.pi / 4).matrix[:, 0], [c, -c])
    np.testing.assert_allclose(rotated_square(1, math.pi / 4).matrix[:, 1], [c, c])


@given(st.floats(0.05, 3), st.floats(-10, 10))
def test_rotated_square_period(h, theta):
    a = rotated_square(h, theta).matrix
    b = rotated_square(h, theta + 2 * math.pi).matrix
    assert np.abs(a - b).max() <= 1e-12


@given(st.floats(0.05, 3), st.floats(0, 2 * math.pi))
def test_rotated_square_centred_with_area_h2(h, theta):
    box = rotated_square(h, theta)
    lo, hi = box.bounding_box()
    np.testing.assert_allclose(lo, -hi, atol=1e-12)
    assert box.measure == pytest.approx(h * h, rel=1e-12)


def test_measure_examples():
    assert measure(parse_domain("intervals:0,1")) == 1
    assert measure(BrokenInterval(F("0.3"), F("0.8"), F("1.1"))) == F("0.8")
    assert measure(RotatedSquare(0.7, 0.3)) == pytest.approx(0.49)


def test_contains_examples():
    unit = parse_domain("intervals:0,1")
    assert contains(unit, 0.5)
    assert not contains(unit, 1.0)
    shear = Parallelepiped([[1, 0.5], [0, 1]])
    assert contains(shear, (0.2, 0.4))
    assert not contains(shear, (1.2, 0.1))


@given(raw_intervals())
def test_contains_half_open(raw):
    u = normalize_intervals(raw)
    for a, b in u:
        assert contains(u, a)
        assert not contains(u, b)


def test_parallelepiped_validation():
    with pytest.raises(ValidationError):
        Parallelepiped([[1, 2], [2, 4]])
    with pytest.raises(ValidationError):
        Parallelepiped([[1, 0, 0], [0, 1, 0]])
    with pytest.raises(ValidationError):
        Parallelepiped(np.eye(5))
    with pytest.raises(ValidationError):
        Parallelepiped(np.eye(2), [0, 0, 0])
    box = Parallelepiped([[2, 0], [0, -1]], [1, 1])
    assert box.measure == pytest.approx(2)
    assert box.matrix.flags.writeable is False


def test_one_dim_box_becomes_exact_interval():
    u = as_interval_union(Parallelepiped([[-0.5]], [1.0]))
    assert list(u) == [(F(1, 2), F(1))]


@pytest.mark.parametrize("text", [
    "intervals:0,0.6;1.0,1.4", "broken:a=0.3,L=0.8,r=1.1", "square:h=0.7,theta=0.3",
    "box:1,0.5;0,1", "box:2,0;0,0.5;t=0.25,-1",
])
def test_parse_format_round_trip(text):
    spec = parse_domain(text)
    again = parse_domain(format_domain(spec))
    assert type(again) is type(spec)
    if isinstance(spec, Parallelepiped):
        np.testing.assert_allclose(again.matrix, spec.matrix)
        np.testing.assert_allclose(again.offset, spec.offset)
    else:
        assert again == spec


@settings(max_examples=50)
@given(raw_intervals())
def test_interval_grammar_round_trip(raw):
    u = normalize_intervals(raw)
    text = "intervals:" + ";".join(f"{a},{b}" for a, b in u)
    assert parse_domain(text) == u


def test_parse_degrees():
    sq = parse_domain("square:h=1,theta=45", degrees=True)
    assert sq.theta == pytest.approx(math.pi / 4)
    assert parse_domain("broken:a=0.3,L=0.8,r=1.1").alpha == F(3, 10)


@pytest.mark.parametrize("text", [
    "nonsense", "disk:r=1", "intervals:0", "broken:a=1,L=2", "broken:a=1,L=2,r=0,x=1",
    "square:h=-1,theta=0", "square:h=1,theta=inf", "box:1,2;3", "box:1,2;2,4", "broken:a=2,L=1,r=0",
])
def test_parse_rejects(text):
    with pytest.raises(ValidationError):
        parse_domain(text)
