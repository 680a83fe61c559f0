"""The covering function ``Phi(x) = sum_m chi_D(x + m)`` and translate overlaps.

In one dimension ``Phi`` is computed exactly as a step function on ``[0, 1)``
with rational breakpoints.  For parallelepipeds it is evaluated on a uniform
grid: each grid line parallel to a coordinate axis meets every translate of
the domain in a single interval, so along such lines ``Phi`` is obtained
exactly by a sweep over interval endpoints, and at cell centres by counting.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from bisect import bisect_right
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import ResourceError, ValidationError
from .geometry import (
    DomainSpec,
    IntervalUnion,
    Parallelepiped,
    as_interval_union,
    as_parallelepiped,
    as_rational,
)

CSV_HEADER = "# expbasis-csv v1"
DEFAULT_CELL_BUDGET = 1 << 24
EXACT_OVERLAP_TOL = 1e-12
SAMPLED_OVERLAP_TOL = 1e-6

__all__ = [
    "CoveringProfile1D",
    "SampledCovering",
    "EssentialRange",
    "fold_1d",
    "phi_at",
    "sampled_profile",
    "essential_range",
    "overlap_shifts",
    "covering_profile",
]


@dataclass(frozen=True)
class CoveringProfile1D:
    """``Phi`` on ``[0, 1)``: value ``values[i]`` on ``[breakpoints[i], breakpoints[i+1])``."""

    breakpoints: tuple[Fraction, ...]
    values: tuple[int, ...]

    def __post_init__(self):
        bp, vals = self.breakpoints, self.values
        if len(bp) != len(vals) + 1 or bp[0] != 0 or bp[-1] != 1:
            raise ValidationError("profile breakpoints must run from 0 to 1, one more than values")
        if any(x >= y for x, y in zip(bp, bp[1:])):
            raise ValidationError("profile breakpoints must be strictly increasing")
        if any(v < 0 for v in vals):
            raise ValidationError("covering values must be non-negative")
        if any(v == w for v, w in zip(vals, vals[1:])):
            raise ValidationError("adjacent pieces must differ (canonical form)")

    @property
    def phi_min(self) -> int:
        return min(self.values)

    @property
    def phi_max(self) -> int:
        return max(self.values)

    @property
    def mass(self) -> Fraction:
        """``int_0^1 Phi``, which equals the measure of the folded domain."""
        return sum((v * (y - x) for x, y, v in self.pieces()), Fraction(0))

    def pieces(self):
        """Iterate ``(start, stop, value)`` triples."""
        return zip(self.breakpoints, self.breakpoints[1:], self.values)

    def value_at(self, x) -> int:
        q = as_rational(x)
        q -= math.floor(q)
        return self.values[bisect_right(self.breakpoints, q) - 1]

    def to_text(self) -> str:
        """One ``breakpoint value`` line per piece; the final line is the right end ``1``."""
        lines = [f"{float(x):.12g} {v}" for x, _, v in self.pieces()]
        lines.append("1")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class SampledCovering:
    """Grid evaluation of ``Phi`` on ``[0, 1)^d``.

    ``counts`` holds ``Phi`` at the ``resolution**d`` cell centres (index
    order ``i, j, ...`` is the coordinate order).  ``phi_min`` and
    ``phi_max`` are the extremes of ``Phi`` along every axis-parallel grid line
    through cell centres, ignoring pieces shorter than the geometric
    tolerance; they bracket the cell-centre values.  ``boundary_margin`` is
    the fraction of cells whose centre lies within one cell diagonal of a face
    of some translate.
    """

    resolution: int
    counts: np.ndarray
    phi_min: int
    phi_max: int
    boundary_margin: float
    approximate: bool = field(default=True, init=False)

    @property
    def dim(self) -> int:
        return self.counts.ndim

    def to_csv(self, fh=None) -> str | None:
        """Write ``i,j,...,count`` rows; returns the text when ``fh`` is None."""
        out = io.StringIO() if fh is None else fh
        names = ["i", "j", "k", "l"][: self.dim]
        out.write(CSV_HEADER + "\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(names + ["count"])
        for idx in np.ndindex(self.counts.shape):
            writer.writerow([*idx, int(self.counts[idx])])
        return out.getvalue() if fh is None else None


class EssentialRange(NamedTuple):
    phi_min: int
    phi_max: int
    approximate: bool


# --- one dimension ---------------------------------------------------------------


def fold_1d(u) -> CoveringProfile1D:
    """Cut every interval at integers and stack the pieces in ``[0, 1)``.

    >>> p = fold_1d(IntervalUnion(((0, Fraction(3, 2)),)))
    >>> [(str(a), str(b), v) for a, b, v in p.pieces()]
    [('0', '1/2', 2), ('1/2', '1', 1)]
    """
    if not isinstance(u, IntervalUnion):
        u = as_interval_union(u)
        if u is None:
            raise ValidationError("fold_1d needs a one-dimensional domain")
    base = 0
    events: dict[Fraction, int] = defaultdict(int)
    for a, b in u:
        full, rem = divmod(b - a, 1)
        base += int(full)
        if rem:
            s = a - math.floor(a)
            e = s + rem
            events[s] += 1
            if e <= 1:
                events[e] -= 1
            else:
                events[Fraction(1)] -= 1
                events[Fraction(0)] += 1
                events[e - 1] -= 1
    cuts = sorted(set(events) | {Fraction(0), Fraction(1)})
    breakpoints, values = [Fraction(0)], []
    level = base
    for x, y in zip(cuts, cuts[1:]):
        level += events.get(x, 0)
        if values and values[-1] == level:
            continue
        if values:
            breakpoints.append(x)
        values.append(level)
    breakpoints.append(Fraction(1))
    return CoveringProfile1D(tuple(breakpoints), tuple(values))


def _overlap_1d(u: IntervalUnion, s: int) -> Fraction:
    total = Fraction(0)
    for a, b in u:
        for c, d in u:
            lo, hi = max(a, c + s), min(b, d + s)
            if hi > lo:
                total += hi - lo
    return total


# --- parallelepipeds ---------------------------------------------------------------


def _candidate_shifts(box: Parallelepiped, x_lo=0.0, x_hi=1.0) -> np.ndarray:
    """Integer ``n`` for which ``x + n`` can meet the domain when ``x_lo <= x < x_hi``."""
    lo, hi = box.bounding_box()
    # pad by a margin well above the membership tolerance
    pad = 1e-6 * (1 + np.abs(box.matrix).sum(axis=1))
    n_lo = np.floor(lo - x_hi - pad).astype(int)
    n_hi = np.ceil(hi - x_lo + pad).astype(int)
    return np.array(list(itertools.product(*(range(a, b + 1) for a, b in zip(n_lo, n_hi)))), dtype=int)


def phi_at(box, x) -> int:
    """Number of integer vectors ``n`` with ``x + n`` in the domain."""
    box = as_parallelepiped(box) if not isinstance(box, Parallelepiped) else box
    if box is None:
        raise ValidationError("phi_at needs a parallelepiped or rotated square")
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.shape != (box.dim,):
        raise ValidationError(f"point of dimension {p.size} for a {box.dim}-D domain")
    if not np.all(np.isfinite(p)):
        raise ValidationError("point has non-finite coordinates")
    shifts = _candidate_shifts(box, p, p)
    y = box.local_coords(p + shifts)
    inside = np.all((y >= -box.tol) & (y < 1 - box.tol), axis=1)
    return int(inside.sum())


class _LineHits(NamedTuple):
    """Nonempty intersections of grid lines with translates, one row per hit."""

    n_lines: int
    line: np.ndarray
    shift: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


def _line_intervals(box: Parallelepiped, axis: int, resolution: int, shifts: np.ndarray,
                    widen=None) -> _LineHits:
    """Parameter intervals ``[lo, hi)`` where grid lines along ``axis`` meet each translate.

    Lines pass through cell centres in the other coordinates, numbered in C
    order.  ``widen`` (per local coordinate) grows the slabs outward when
    positive and shrinks them when negative.  Intervals are clipped to
    ``[0, 1]``; only nonempty ones are returned.
    """
    d = box.dim
    B = box.inverse
    others = [k for k in range(d) if k != axis]
    w = np.zeros(d) if widen is None else np.asarray(widen)
    lo_face = -box.tol - w
    hi_face = 1 - box.tol + w

    # each translate only meets the lines inside its projected bounding box
    grow = np.abs(box.matrix) @ np.maximum(w, 0)
    blo, bhi = box.bounding_box()
    blo, bhi = blo - grow - 1e-9, bhi + grow + 1e-9
    line_ids, shift_ids = [], []
    strides = resolution ** np.arange(d - 2, -1, -1)
    for si, n in enumerate(shifts):
        ranges = []
        for k in others:
            i0 = max(0, math.ceil((blo[k] - n[k]) * resolution - 0.5))
            i1 = min(resolution - 1, math.floor((bhi[k] - n[k]) * resolution - 0.5))
            if i1 < i0:
                break
            ranges.append(np.arange(i0, i1 + 1))
        else:
            if ranges:
                mesh = np.meshgrid(*ranges, indexing="ij")
                ids = sum(m.ravel() * st for m, st in zip(mesh, strides))
            else:
                ids = np.zeros(1, dtype=int)
            line_ids.append(ids)
            shift_ids.append(np.full(ids.size, si))
    n_lines = resolution ** (d - 1)
    if not line_ids:
        empty = np.zeros(0)
        return _LineHits(n_lines, empty.astype(int), empty.astype(int), empty, empty)
    line = np.concatenate(line_ids).astype(int)
    shift = np.concatenate(shift_ids)

    # cell-centre coordinates of each line, with 0 along ``axis``
    base = np.zeros((line.size, d))
    rem = line.copy()
    for k, st in zip(others, strides):
        base[:, k] = (rem // st + 0.5) / resolution
        rem %= st
    y0_all = (base + shifts[shift] - box.offset) @ B.T
    slope = B[:, axis]
    lo = np.zeros(line.size)
    hi = np.ones(line.size)
    for j in range(d):
        y0 = y0_all[:, j]
        s = slope[j]
        if abs(s) > 1e-300:
            a = (lo_face[j] - y0) / s
            b = (hi_face[j] - y0) / s
            if s < 0:
                a, b = b, a
            np.maximum(lo, a, out=lo)
            np.minimum(hi, b, out=hi)
        else:
            hi[~((y0 >= lo_face[j]) & (y0 < hi_face[j]))] = -1.0
    keep = hi > lo
    return _LineHits(n_lines, line[keep], shift[keep], lo[keep], hi[keep])


def _line_extremes(hits: _LineHits, tol: float) -> tuple[int, int]:
    """Exact min/max of the interval-count function over all lines, sweeping endpoints."""
    n_lines = hits.n_lines
    keep = hits.hi - hits.lo > tol
    line = hits.line[keep]
    arange = np.arange(n_lines)
    pos = np.concatenate([hits.lo[keep], hits.hi[keep], np.zeros(n_lines), np.ones(n_lines)])
    delta = np.concatenate([np.ones(line.size, int), -np.ones(line.size, int),
                            np.zeros(2 * n_lines, int)])
    lines = np.concatenate([line, line, arange, arange])
    order = np.lexsort((pos, lines))
    pos, delta, lines = pos[order], delta[order], lines[order]
    level = np.cumsum(delta)
    # each line's deltas sum to zero, so the running sum restarts at every line
    seg = (lines[1:] == lines[:-1]) & (pos[1:] - pos[:-1] > tol)
    vals = level[:-1][seg]
    return int(vals.min()), int(vals.max())


def _count_centres(n_lines, line, lo, hi, resolution):
    """Per line, how many intervals contain each cell centre ``(i + 1/2) / res``."""
    start = np.clip(np.ceil(lo * resolution - 0.5), 0, resolution).astype(int)
    stop = np.clip(np.ceil(hi * resolution - 0.5), 0, resolution).astype(int)
    keep = stop > start
    diff = np.zeros(n_lines * (resolution + 1), dtype=np.int64)
    row = line[keep] * (resolution + 1)
    diff += np.bincount(row + start[keep], minlength=diff.size)
    diff -= np.bincount(row + stop[keep], minlength=diff.size)
    return np.cumsum(diff.reshape(n_lines, resolution + 1)[:, :-1], axis=1)


def _check_budget(d, resolution, n_shifts, cell_budget):
    if resolution < 2:
        raise ValidationError(f"resolution must be at least 2, got {resolution}")
    cells = resolution ** d
    if cells > cell_budget:
        raise ResourceError(f"{resolution}^{d} = {cells} cells exceeds the budget of {cell_budget}")
    if resolution ** (d - 1) * n_shifts * d > 8 * cell_budget:
        raise ResourceError("too many translates meet the unit cube for this resolution")


def sampled_profile(spec: DomainSpec, resolution: int, cell_budget: int = DEFAULT_CELL_BUDGET) -> SampledCovering:
    box = as_parallelepiped(spec)
    if box is None or box.dim < 2:
        raise ValidationError("sampled_profile needs a domain of dimension >= 2")
    d = box.dim
    resolution = int(resolution)
    shifts = _candidate_shifts(box)
    _check_budget(d, resolution, len(shifts), cell_budget)

    hits = _line_intervals(box, d - 1, resolution, shifts)
    counts = _count_centres(hits.n_lines, hits.line, hits.lo, hits.hi, resolution)
    counts = counts.reshape((resolution,) * d)
    phi_min, phi_max = _line_extremes(hits, box.tol)
    for axis in range(d - 1):
        mn, mx = _line_extremes(_line_intervals(box, axis, resolution, shifts), box.tol)
        phi_min, phi_max = min(phi_min, mn), max(phi_max, mx)

    # slab widths in local coordinates equivalent to one cell diagonal in space
    delta = math.sqrt(d) / resolution * np.linalg.norm(box.inverse, axis=1)
    grown = _line_intervals(box, d - 1, resolution, shifts, widen=delta)
    shrunk = _line_intervals(box, d - 1, resolution, shifts, widen=-delta)
    # near a face = inside the grown slab but outside the shrunk one
    key_g = grown.line * len(shifts) + grown.shift
    key_s = shrunk.line * len(shifts) + shrunk.shift
    order = np.argsort(key_s)
    key_s, s_lo, s_hi = key_s[order], shrunk.lo[order], shrunk.hi[order]
    pos = np.minimum(np.searchsorted(key_s, key_g), max(key_s.size - 1, 0))
    has = key_s[pos] == key_g if key_s.size else np.zeros(key_g.size, bool)
    s_lo = np.where(has, s_lo[pos] if key_s.size else 0.0, grown.hi)
    s_hi = np.where(has, s_hi[pos] if key_s.size else 0.0, grown.hi)
    near = _count_centres(hits.n_lines, np.concatenate([grown.line, grown.line]),
                          np.concatenate([grown.lo, s_hi]),
                          np.concatenate([s_lo, grown.hi]), resolution)
    margin = float(np.mean(near > 0))
    return SampledCovering(resolution, counts, phi_min, phi_max, margin)


def covering_profile(spec: DomainSpec, resolution: int = 512):
    """Exact profile in 1-D, grid profile otherwise."""
    u = as_interval_union(spec)
    if u is not None:
        return fold_1d(u)
    return sampled_profile(spec, resolution)


def essential_range(profile) -> EssentialRange:
    if isinstance(profile, CoveringProfile1D):
        return EssentialRange(profile.phi_min, profile.phi_max, False)
    if isinstance(profile, SampledCovering):
        return EssentialRange(profile.phi_min, profile.phi_max, True)
    raise ValidationError(f"not a covering profile: {type(profile).__name__}")


def overlap_shifts(spec: DomainSpec, radius: int, resolution: int = 256):
    """Nonzero integer shifts ``s`` (``|s|_inf <= radius``) with ``|D n (D + s)| > 0``.

    Returns ``(shift, measure)`` pairs sorted by shift.  Interval unions are
    handled exactly; parallelepipeds integrate exact line overlaps over a
    ``resolution``-point midpoint rule in the remaining coordinates.
    """
    radius = int(radius)
    if radius < 1:
        raise ValidationError(f"radius must be at least 1, got {radius}")
    u = as_interval_union(spec)
    if u is not None:
        out = []
        for s in range(-radius, radius + 1):
            if s:
                m = _overlap_1d(u, s)
                if m > EXACT_OVERLAP_TOL:
                    out.append(((s,), m))
        return out

    box = as_parallelepiped(spec)
    d = box.dim
    shifts = _candidate_shifts(box)
    _check_budget(d, resolution, len(shifts), DEFAULT_CELL_BUDGET)
    hits = _line_intervals(box, d - 1, resolution, shifts)
    lo = np.zeros((hits.n_lines, len(shifts)))
    hi = np.zeros((hits.n_lines, len(shifts)))
    lo[hits.line, hits.shift] = hits.lo
    hi[hits.line, hits.shift] = hits.hi
    index = {tuple(n): i for i, n in enumerate(shifts)}
    out = []
    for s in itertools.product(range(-radius, radius + 1), repeat=d):
        if not any(s):
            continue
        pairs = [(i, index[m]) for n, i in index.items()
                 if (m := tuple(a - b for a, b in zip(n, s))) in index]
        if not pairs:
            continue
        ia, ib = np.array(pairs).T
        length = np.minimum(hi[:, ia], hi[:, ib]) - np.maximum(lo[:, ia], lo[:, ib])
        m = float(np.clip(length, 0, None).sum()) / lo.shape[0]
        if m > SAMPLED_OVERLAP_TOL:
            out.append((s, m))
    return out
