"""Domain families and the arithmetic conventions they share.

Three families are supported: finite unions of half-open intervals with exact
rational endpoints, the broken interval ``[0, a) u [a + r, L + r)``, and
parallelepipeds ``{A x + t : x in [0, 1)^d}`` (rotated squares are the 2-D
special case ``A = h * R(theta)`` centred at the origin).

Interval endpoints are kept as :class:`fractions.Fraction`; a binary float is
converted exactly, a decimal string is parsed exactly (``"0.6"`` is ``3/5``).
Parallelepipeds use float matrices with the geometric tolerance :data:`EPS`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from numbers import Rational, Real
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ValidationError

EPS = 1e-9
MAX_DIM = 4

__all__ = [
    "EPS",
    "MAX_DIM",
    "IntervalUnion",
    "BrokenInterval",
    "RotatedSquare",
    "Parallelepiped",
    "DomainSpec",
    "as_rational",
    "normalize_intervals",
    "broken_interval",
    "rotated_square",
    "measure",
    "contains",
    "dimension",
    "as_interval_union",
    "as_parallelepiped",
    "parse_domain",
    "format_domain",
]


def as_rational(value) -> Fraction:
    """Convert ``value`` to an exact rational.

    Strings are parsed as decimals or ``p/q``; floats are converted bit-exactly.
    """
    if isinstance(value, bool):
        raise ValidationError(f"not a number: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (str, Rational)):
        try:
            return Fraction(value.strip() if isinstance(value, str) else value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"not a rational number: {value!r}") from exc
    if isinstance(value, Real):
        x = float(value)
        if not math.isfinite(x):
            raise ValidationError(f"non-finite endpoint: {value!r}")
        return Fraction(x)
    raise ValidationError(f"not a number: {value!r}")


@dataclass(frozen=True)
class IntervalUnion:
    """Sorted, pairwise disjoint half-open intervals ``[a_i, b_i)``.

    Use :func:`normalize_intervals` to build one from arbitrary pairs; the
    constructor only validates.
    """

    intervals: tuple[tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        ivs = tuple((as_rational(a), as_rational(b)) for a, b in self.intervals)
        if not ivs:
            raise ValidationError("interval union must contain at least one interval")
        for a, b in ivs:
            if not a < b:
                raise ValidationError(f"empty or reversed interval [{a}, {b})")
        for (_, b), (a, _) in zip(ivs, ivs[1:]):
            if b > a:
                raise ValidationError("intervals must be sorted and disjoint")
        object.__setattr__(self, "intervals", ivs)

    dim = 1

    @property
    def measure(self) -> Fraction:
        return sum((b - a for a, b in self.intervals), Fraction(0))

    def shifted(self, n) -> "IntervalUnion":
        n = as_rational(n)
        return IntervalUnion(tuple((a + n, b + n) for a, b in self.intervals))

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)


def normalize_intervals(raw: Iterable[Sequence]) -> IntervalUnion:
    """Sort ``(a, b)`` pairs and merge those that overlap or touch.

    >>> normalize_intervals([(1, 1.5), (0, 0.5)]).intervals
    ((Fraction(0, 1), Fraction(1, 2)), (Fraction(1, 1), Fraction(3, 2)))
    """
    pairs = []
    for item in raw:
        try:
            a, b = item
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"expected an (a, b) pair, got {item!r}") from exc
        a, b = as_rational(a), as_rational(b)
        if not a < b:
            raise ValidationError(f"empty or reversed interval [{a}, {b})")
        pairs.append((a, b))
    if not pairs:
        raise ValidationError("no intervals given")
    pairs.sort()
    merged = [list(pairs[0])]
    for a, b in pairs[1:]:
        if a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return IntervalUnion(tuple((a, b) for a, b in merged))


@dataclass(frozen=True)
class BrokenInterval:
    alpha: Fraction
    L: Fraction
    r: Fraction

    def __post_init__(self):
        alpha, L, r = (as_rational(v) for v in (self.alpha, self.L, self.r))
        if not 0 < alpha < L:
            raise ValidationError(f"broken interval needs 0 < alpha < L, got alpha={alpha}, L={L}")
        if r < 0:
            raise ValidationError(f"broken interval needs r >= 0, got r={r}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "r", r)

    dim = 1

    def to_intervals(self) -> IntervalUnion:
        return broken_interval(self.alpha, self.L, self.r)


def broken_interval(alpha, L, r) -> IntervalUnion:
    """``[0, alpha) u [alpha + r, L + r)``, a single interval when ``r == 0``."""
    alpha, L, r = as_rational(alpha), as_rational(L), as_rational(r)
    if not 0 < alpha < L:
        raise ValidationError(f"broken interval needs 0 < alpha < L, got alpha={alpha}, L={L}")
    if r < 0:
        raise ValidationError(f"broken interval needs r >= 0, got r={r}")
    if r == 0:
        return IntervalUnion(((Fraction(0), L),))
    return IntervalUnion(((Fraction(0), alpha), (alpha + r, L + r)))


@dataclass(frozen=True, eq=False)
class Parallelepiped:
    """The half-open image ``A [0, 1)^d + t``.

    Columns of ``matrix`` are the edge vectors.  ``offset`` defaults to zero.
    """

    matrix: np.ndarray
    offset: np.ndarray | None = None
    tol: float = EPS

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float)
        if A.ndim == 0:
            A = A.reshape(1, 1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValidationError(f"edge matrix must be square, got shape {A.shape}")
        d = A.shape[0]
        if not 1 <= d <= MAX_DIM:
            raise ValidationError(f"dimension must be between 1 and {MAX_DIM}, got {d}")
        if not np.all(np.isfinite(A)):
            raise ValidationError("edge matrix has non-finite entries")
        t = np.zeros(d) if self.offset is None else np.array(self.offset, dtype=float).reshape(-1)
        if t.shape != (d,):
            raise ValidationError(f"offset must have length {d}, got {t.shape[0]}")
        det = float(np.linalg.det(A))
        if not abs(det) > self.tol:
            raise ValidationError(f"edge matrix is singular (det={det:.3g})")
        A.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "offset", t)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    @cached_property
    def inverse(self) -> np.ndarray:
        B = np.linalg.inv(self.matrix)
        B.setflags(write=False)
        return B

    @property
    def measure(self) -> float:
        return abs(self.det)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate-wise bounds of the closure of the domain."""
        A = self.matrix
        lo = self.offset + np.minimum(A, 0).sum(axis=1)
        hi = self.offset + np.maximum(A, 0).sum(axis=1)
        return lo, hi

    def local_coords(self, x) -> np.ndarray:
        """``A^{-1} (x - t)`` for a point or an ``(..., d)`` array of points."""
        x = np.asarray(x, dtype=float)
        return (x - self.offset) @ self.inverse.T

    def __eq__(self, other):
        if not isinstance(other, Parallelepiped):
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix) and np.array_equal(self.offset, other.offset)

    __hash__ = object.__hash__

    def __repr__(self):
        return f"Parallelepiped(matrix={self.matrix.tolist()}, offset={self.offset.tolist()})"


@dataclass(frozen=True)
class RotatedSquare:
    """Square of side ``h`` centred at the origin, rotated by ``theta`` radians."""

    h: float
    theta: float

    def __post_init__(self):
        h, theta = float(self.h), float(self.theta)
        if not (math.isfinite(h) and h > 0):
            raise ValidationError(f"square side must be positive, got h={self.h}")
        if not math.isfinite(theta):
            raise ValidationError(f"non-finite angle {self.theta}")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "theta", theta)

    dim = 2

    def to_parallelepiped(self) -> Parallelepiped:
        return rotated_square(self.h, self.theta)


def rotated_square(h, theta) -> Parallelepiped:
    """``h * R(theta)`` with ``R = [[cos, sin], [-sin, cos]]``, centred at the origin."""
    h = float(h)
    if not (math.isfinite(h) and h > 0):
        raise ValidationError(f"square side must be positive, got h={h}")
    c, s = math.cos(theta), math.sin(theta)
    A = h * np.array([[c, s], [-s, c]])
    return Parallelepiped(A, -A.sum(axis=1) / 2)


DomainSpec = Union[IntervalUnion, BrokenInterval, RotatedSquare, Parallelepiped]


def _check_spec(spec):
    if not isinstance(spec, (IntervalUnion, BrokenInterval, RotatedSquare, Parallelepiped)):
        raise ValidationError(f"unsupported domain type {type(spec).__name__}")


def dimension(spec: DomainSpec) -> int:
    _check_spec(spec)
    return spec.dim


def as_interval_union(spec: DomainSpec) -> IntervalUnion | None:
    """Exact 1-D form of ``spec``; ``None`` for domains of dimension >= 2."""
    _check_spec(spec)
    if isinstance(spec, IntervalUnion):
        return spec
    if isinstance(spec, BrokenInterval):
        return spec.to_intervals()
    if isinstance(spec, Parallelepiped) and spec.dim == 1:
        # floats become exact rationals; a negative edge flips the interval
        a = Fraction(float(spec.matrix[0, 0]))
        t = Fraction(float(spec.offset[0]))
        lo, hi = sorted((t, t + a))
        return IntervalUnion(((lo, hi),))
    return None


def as_parallelepiped(spec: DomainSpec) -> Parallelepiped | None:
    _check_spec(spec)
    if isinstance(spec, Parallelepiped):
        return spec
    if isinstance(spec, RotatedSquare):
        return spec.to_parallelepiped()
    return None


def measure(spec: DomainSpec) -> Fraction | float:
    """Lebesgue measure; exact for interval unions.

    >>> measure(RotatedSquare(0.5, 1.0))
    0.25
    """
    _check_spec(spec)
    if isinstance(spec, RotatedSquare):
        return spec.h ** 2
    if isinstance(spec, BrokenInterval):
        return spec.L
    return spec.measure


def contains(spec: DomainSpec, x) -> bool:
    """Half-open membership test.

    For parallelepipeds the local coordinates must lie in ``[-eps, 1 - eps)``:
    both faces move by the same amount, so integer translates of a tile still
    partition space while points computed to within rounding of a face land
    on a definite side.
    """
    _check_spec(spec)
    ivs = as_interval_union(spec) if not isinstance(spec, Parallelepiped) else None
    if ivs is not None:
        if isinstance(x, (list, tuple, np.ndarray)):
            if len(x) != 1:
                raise ValidationError(f"point of dimension {len(x)} for a 1-D domain")
            x = x[0]
        q = as_rational(x.item() if isinstance(x, np.generic) else x)
        return any(a <= q < b for a, b in ivs)
    box = as_parallelepiped(spec)
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.shape != (box.dim,):
        raise ValidationError(f"point of dimension {p.size} for a {box.dim}-D domain")
    y = box.local_coords(p)
    return bool(np.all((y >= -box.tol) & (y < 1 - box.tol)))


# --- text grammar --------------------------------------------------------------

_FAMILIES = ("intervals", "broken", "square", "box")


def _keyvals(body: str, allowed: Sequence[str]) -> dict[str, str]:
    out = {}
    for part in body.split(","):
        if "=" not in part:
            raise ValidationError(f"expected key=value, got {part!r}")
        k, v = (s.strip() for s in part.split("=", 1))
        if k not in allowed:
            raise ValidationError(f"unknown parameter {k!r}; expected one of {', '.join(allowed)}")
        if k in out:
            raise ValidationError(f"parameter {k!r} given twice")
        out[k] = v
    missing = [k for k in allowed if k not in out]
    if missing:
        raise ValidationError(f"missing parameter(s): {', '.join(missing)}")
    return out


def _float(s: str) -> float:
    try:
        v = float(s)
    except ValueError as exc:
        raise ValidationError(f"not a number: {s!r}") from exc
    if not math.isfinite(v):
        raise ValidationError(f"non-finite value {s!r}")
    return v


def parse_domain(text: str, *, degrees: bool = False) -> DomainSpec:
    """Parse the compact CLI grammar.

    ``intervals:0,0.6;1.0,1.4``, ``broken:a=0.3,L=0.8,r=1.1``,
    ``square:h=0.7,theta=0.3``, ``box:1,0.5;0,1`` with an optional trailing
    ``;t=x,y`` offset.  Decimal literals in interval and broken-interval specs
    are read as exact rationals.
    """
    if ":" not in text:
        raise ValidationError(f"domain spec needs a family prefix ({'|'.join(_FAMILIES)}): {text!r}")
    family, body = (s.strip() for s in text.split(":", 1))
    body = re.sub(r"\s+", "", body)
    if family == "intervals":
        pairs = []
        for chunk in filter(None, body.split(";")):
            parts = chunk.split(",")
            if len(parts) != 2:
                raise ValidationError(f"interval needs two endpoints, got {chunk!r}")
            pairs.append(tuple(as_rational(p) for p in parts))
        return normalize_intervals(pairs)
    if family == "broken":
        kv = _keyvals(body, ("a", "L", "r"))
        return BrokenInterval(as_rational(kv["a"]), as_rational(kv["L"]), as_rational(kv["r"]))
    if family == "square":
        kv = _keyvals(body, ("h", "theta"))
        theta = _float(kv["theta"])
        return RotatedSquare(_float(kv["h"]), math.radians(theta) if degrees else theta)
    if family == "box":
        rows, offset = [], None
        for chunk in filter(None, body.split(";")):
            if chunk.startswith("t="):
                offset = [_float(v) for v in chunk[2:].split(",")]
            else:
                rows.append([_float(v) for v in chunk.split(",")])
        if not rows or any(len(r) != len(rows) for r in rows):
            raise ValidationError(f"box matrix must be square, got rows {rows}")
        return Parallelepiped(np.array(rows), offset)
    raise ValidationError(f"unknown domain family {family!r}; expected one of {', '.join(_FAMILIES)}")


def _num(x) -> str:
    return f"{float(x):.12g}"


def format_domain(spec: DomainSpec) -> str:
    """Inverse of :func:`parse_domain` up to 12 significant digits."""
    _check_spec(spec)
    if isinstance(spec, IntervalUnion):
        return "intervals:" + ";".join(f"{_num(a)},{_num(b)}" for a, b in spec)
    if isinstance(spec, BrokenInterval):
        return f"broken:a={_num(spec.alpha)},L={_num(spec.L)},r={_num(spec.r)}"
    if isinstance(spec, RotatedSquare):
        return f"square:h={_num(spec.h)},theta={_num(spec.theta)}"
    rows = ";".join(",".join(_num(v) for v in row) for row in spec.matrix)
    if np.any(spec.offset != 0):
        rows += ";t=" + ",".join(_num(v) for v in spec.offset)
    return "box:" + rows
