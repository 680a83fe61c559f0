"""Frame / Riesz-sequence / Riesz-basis verdicts for ``E(Z^d)`` on a domain.

Two routes are provided.  :func:`classify_general` reads the verdicts off the
covering function: a frame exactly when ``Phi <= 1``, a Riesz sequence exactly
when ``Phi >= 1``, with constants ``min Phi`` and ``max Phi``.  The
family-specific functions evaluate closed-form parameter inequalities as
printed, including their weak/strict choices.  Neither route silently
overrides the other; disagreements, density violations and near-threshold
inputs are reported in ``warnings``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
import numpy as np

from .covering import covering_profile, essential_range, fold_1d, sampled_profile
from .errors import ResourceError, ValidationError
from .geometry import (
    EPS,
    BrokenInterval,
    DomainSpec,
    IntervalUnion,
    Parallelepiped,
    RotatedSquare,
    as_interval_union,
    as_parallelepiped,
    measure,
)

CLOSED_FORM = "closed_form"
COVERING_ORACLE = "covering_oracle"
BOUNDARY_TOL = 1e-9
DENSITY_WARNING = "violates density corollary"
DEFAULT_SPOT_RESOLUTION = {2: 256, 3: 64, 4: 16}
DEFAULT_ENUM_BUDGET = 10 ** 7

__all__ = [
    "BasisClassification",
    "classify",
    "classify_general",
    "classify_broken_interval",
    "classify_rotated_square",
    "classify_parallelepiped",
    "shortest_vector_sup",
    "density_check",
    "normalize_angle",
]


@dataclass(frozen=True)
class BasisClassification:
    frame: bool
    riesz_sequence: bool
    riesz_basis: bool
    complete: bool
    orthonormal_basis: bool
    frame_constants: tuple[int, int] | None
    method: str
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "warnings", tuple(self.warnings))
        self.check()

    def check(self):
        """Raise ``ValueError`` unless the implication chain holds."""
        if self.riesz_basis and not (self.frame and self.riesz_sequence):
            raise ValueError("riesz_basis requires frame and riesz_sequence")
        if self.orthonormal_basis and not self.riesz_basis:
            raise ValueError("orthonormal_basis requires riesz_basis")
        if self.frame and not self.complete:
            raise ValueError("a frame is complete")
        if self.frame_constants is not None:
            A, B = self.frame_constants
            if not (isinstance(A, int) and isinstance(B, int) and 1 <= A <= B):
                raise ValueError(f"frame constants must be integers with 1 <= A <= B, got {A}, {B}")
        if self.method not in (CLOSED_FORM, COVERING_ORACLE):
            raise ValueError(f"unknown method {self.method!r}")

    def with_warning(self, message: str) -> "BasisClassification":
        return replace(self, warnings=self.warnings + (message,))

    @property
    def bits(self) -> tuple[int, int, int, int, int]:
        """``frame, riesz_sequence, riesz_basis, complete, orthonormal_basis`` as 0/1."""
        return tuple(int(v) for v in (self.frame, self.riesz_sequence, self.riesz_basis,
                                      self.complete, self.orthonormal_basis))

    def to_record(self) -> str:
        """Fixed-key ``key: value`` text; warnings follow as indented list items."""
        A, B = self.frame_constants if self.frame_constants else ("-", "-")
        lines = [
            f"frame: {str(self.frame).lower()}",
            f"riesz_sequence: {str(self.riesz_sequence).lower()}",
            f"riesz_basis: {str(self.riesz_basis).lower()}",
            f"complete: {str(self.complete).lower()}",
            f"orthonormal_basis: {str(self.orthonormal_basis).lower()}",
            f"A: {A}",
            f"B: {B}",
            f"method: {self.method}",
            f"warnings: {len(self.warnings)}",
        ]
        lines += [f"  - {w}" for w in self.warnings]
        return "\n".join(lines) + "\n"


def density_check(c: BasisClassification, m, eps: float = 1e-9) -> BasisClassification:
    """Append a warning when the verdicts contradict ``|D| <= 1`` (frames) or ``|D| >= 1`` (Riesz)."""
    m = float(m)
    if c.frame and m > 1 + eps:
        c = c.with_warning(f"frame with measure {m:.12g} > 1 {DENSITY_WARNING}")
    if c.riesz_sequence and m < 1 - eps:
        c = c.with_warning(f"riesz sequence with measure {m:.12g} < 1 {DENSITY_WARNING}")
    return c


def _near(x, target, tol=BOUNDARY_TOL) -> bool:
    return abs(float(x) - float(target)) <= tol


# --- covering oracle ------------------------------------------------------------


def classify_general(spec: DomainSpec, resolution: int = 512, eps: float = BOUNDARY_TOL) -> BasisClassification:
    """Verdicts from the essential range of ``Phi``; exact in 1-D."""
    profile = covering_profile(spec, resolution)
    phi_min, phi_max, approximate = essential_range(profile)
    rs = phi_min >= 1
    frame = phi_max <= 1
    rb = phi_min == phi_max == 1
    warnings = []
    if approximate:
        warnings.append(f"approximate: sampled at resolution {profile.resolution}, "
                        f"boundary margin {profile.boundary_margin:.6g}")
    c = BasisClassification(
        frame=frame,
        riesz_sequence=rs,
        riesz_basis=rb,
        complete=frame,
        orthonormal_basis=rb,
        frame_constants=(phi_min, phi_max) if rs else None,
        method=COVERING_ORACLE,
        warnings=tuple(warnings),
    )
    return density_check(c, measure(spec), eps)


# --- closed forms ----------------------------------------------------------------


def _closed(frame, rs, m, warnings, complete=None, eps=BOUNDARY_TOL) -> BasisClassification:
    rb = frame and rs
    onb = rb and _near(m, 1, EPS)
    c = BasisClassification(
        frame=frame,
        riesz_sequence=rs,
        riesz_basis=rb,
        complete=frame if complete is None else (complete or frame),
        orthonormal_basis=onb,
        frame_constants=(1, 1) if onb else None,
        method=CLOSED_FORM,
        warnings=tuple(warnings),
    )
    return density_check(c, m, eps)


def classify_broken_interval(alpha, L, r, eps: float = BOUNDARY_TOL) -> BasisClassification:
    """Closed-form verdicts for ``[0, alpha) u [alpha + r, L + r)``.

    With ``{r}`` the fractional part: a frame iff ``L + {r} <= 1``; a Riesz
    sequence iff ``alpha >= 1`` or ``L - alpha >= 1``, or ``{r} = 0`` and
    ``L >= 1``, or ``1 <= L < 2`` and ``L + {r} >= 2``.
    """
    spec = BrokenInterval(alpha, L, r)
    alpha, L, r = spec.alpha, spec.L, spec.r
    fr = r - math.floor(r)
    frame = L + fr <= 1
    case_i = alpha >= 1 or L - alpha >= 1
    case_ii = fr == 0 and L >= 1
    case_iii = 1 <= L < 2 and L + fr >= 2
    warnings = []
    surfaces = {
        "L + {r} = 1": L + fr - 1,
        "alpha = 1": alpha - 1,
        "L - alpha = 1": L - alpha - 1,
        "{r} = 0": min(fr, 1 - fr),
        "L = 1": L - 1,
        "L = 2": L - 2,
        "L + {r} = 2": L + fr - 2,
    }
    near = [name for name, gap in surfaces.items() if _near(gap, 0, eps)]
    if near:
        warnings.append(f"boundary: within {eps:g} of " + ", ".join(near))
    return _closed(frame, case_i or case_ii or case_iii, L, warnings, eps=eps)


def normalize_angle(theta: float) -> float:
    """Reduce ``theta`` to ``[0, pi/4]`` using the square's symmetries."""
    t = math.fmod(float(theta), math.pi / 2)
    if t < 0:
        t += math.pi / 2
    if t > math.pi / 4:
        t = math.pi / 2 - t
    return t


def classify_rotated_square(h, theta, eps: float = BOUNDARY_TOL) -> BasisClassification:
    """Closed-form verdicts for the square of side ``h`` rotated by ``theta``.

    After reducing the angle to ``[0, pi/4]``: a frame iff
    ``h <= 1 / (sin + cos)``, a Riesz sequence iff ``h >= 1 - sin(2 theta)``.
    The second threshold is below 1 for oblique angles, so such verdicts
    carry a density warning.
    """
    sq = RotatedSquare(h, theta)
    t = normalize_angle(sq.theta)
    frame_thr = 1 / (math.sin(t) + math.cos(t))
    riesz_thr = 1 - math.sin(2 * t)
    frame = sq.h <= frame_thr
    rs = sq.h >= riesz_thr
    warnings = []
    if _near(sq.h, frame_thr, eps):
        warnings.append(f"boundary: h within {eps:g} of frame threshold {frame_thr:.12g}")
    if _near(sq.h, riesz_thr, eps):
        warnings.append(f"boundary: h within {eps:g} of riesz threshold {riesz_thr:.12g}")
    return _closed(frame, rs, sq.h ** 2, warnings, eps=eps)


def _pair_row_max(A: np.ndarray) -> float:
    """``max |a_ij| + |a_ik|`` over rows ``i`` and columns ``j != k``; 0 when d == 1."""
    d = A.shape[0]
    if d < 2:
        return 0.0
    top2 = np.sort(np.abs(A), axis=1)[:, -2:]
    return float(top2.sum(axis=1).max())


def _oracle_verdicts(spec: DomainSpec, resolution: int | None):
    u = as_interval_union(spec)
    if u is not None:
        p = fold_1d(u)
        return p.phi_min, p.phi_max, "exact fold"
    d = as_parallelepiped(spec).dim
    res = resolution or DEFAULT_SPOT_RESOLUTION[d]
    p = sampled_profile(spec, res)
    return p.phi_min, p.phi_max, f"resolution {res}"


def classify_parallelepiped(box: Parallelepiped, resolution: int | None = None,
                            spot_check: bool = True, eps: float = BOUNDARY_TOL) -> BasisClassification:
    """Closed-form verdicts for ``A [0, 1)^d + t``.

    A frame iff ``|det A| <= 1`` and ``|a_ij| + |a_ik| <= 1`` for every row and
    column pair; a Riesz sequence iff ``|det A| >= 1`` and every entry of
    ``A^{-1}`` is at most 1 in modulus.  Completeness comes from the lattice
    criterion of :func:`shortest_vector_sup`.  With ``spot_check`` the covering
    oracle is run at ``resolution`` and any disagreement is recorded.
    """
    box = as_parallelepiped(box) if not isinstance(box, Parallelepiped) else box
    if box is None:
        raise ValidationError("classify_parallelepiped needs a parallelepiped")
    A, B = box.matrix, box.inverse
    det = abs(box.det)
    pair_max = _pair_row_max(A)
    b_max = float(np.abs(B).max())
    frame = det <= 1 and pair_max <= 1
    rs = det >= 1 and b_max <= 1
    warnings = []
    near = [name for name, v in (("|det A| = 1", det), ("pair row sum = 1", pair_max),
                                 ("max |b_ij| = 1", b_max)) if _near(v, 1, eps)]
    if near:
        warnings.append(f"boundary: within {eps:g} of " + ", ".join(near))

    try:
        lam, lattice_complete = shortest_vector_sup(box)
    except ResourceError:
        lam, lattice_complete = None, frame
        warnings.append("lattice enumeration budget exceeded; completeness taken from frame verdict")
    if frame and not lattice_complete:
        warnings.append(f"discrepancy: closed-form frame but a lattice point of A^-1 Z^d "
                        f"has sup-norm {lam:.12g} < 1")
    if spot_check:
        phi_min, phi_max, how = _oracle_verdicts(box, resolution)
        if (phi_max <= 1) != frame:
            warnings.append(f"discrepancy: closed-form frame={str(frame).lower()} but covering oracle "
                            f"({how}) finds phi_max={phi_max}")
        if (phi_min >= 1) != rs:
            warnings.append(f"discrepancy: closed-form riesz_sequence={str(rs).lower()} but covering "
                            f"oracle ({how}) finds phi_min={phi_min}")
    return _closed(frame, rs, det, warnings, complete=lattice_complete, eps=eps)


def shortest_vector_sup(box: Parallelepiped, radius: int = 1, budget: int = DEFAULT_ENUM_BUDGET,
                        eps: float = EPS) -> tuple[float, bool]:
    """Minimum of ``|A^{-1} n|_inf`` over nonzero integer ``n`` and the completeness flag.

    Translates of ``A [0,1)^d`` overlap exactly when some nonzero lattice point
    of ``A^{-1} Z^d`` lies in the open unit sup-ball, so the system is
    complete iff the minimum is at least 1.  Any ``n`` with
    ``|A^{-1} n|_inf <= lam`` satisfies ``|n_k| <= lam * sum_j |a_kj|``; the
    search box is widened until it contains that region for the current best
    ``lam``.
    """
    box = as_parallelepiped(box) if not isinstance(box, Parallelepiped) else box
    radius = int(radius)
    if radius < 1:
        raise ValidationError(f"radius must be at least 1, got {radius}")
    A, B = box.matrix, box.inverse
    d = box.dim
    row_abs = np.abs(A).sum(axis=1)
    # columns of A^{-1} give an upper bound to start from
    best = float(np.abs(B).max(axis=0).min())
    searched = np.zeros(d, dtype=int)
    bounds = np.full(d, radius)
    while True:
        need = np.floor(best * row_abs * (1 + 1e-12) + 1e-12).astype(int)
        bounds = np.maximum(bounds, need)
        if np.all(searched >= bounds):
            break
        count = int(np.prod(2 * bounds + 1))
        if count > budget:
            raise ResourceError(f"sup-norm enumeration needs {count} lattice points (budget {budget})")
        best = min(best, _min_sup_norm(B, bounds))
        searched = bounds.copy()
    return best, best >= 1 - eps


def _min_sup_norm(B: np.ndarray, bounds: np.ndarray, chunk: int = 1 << 18) -> float:
    d = len(bounds)
    axes = [np.arange(-b, b + 1) for b in bounds]
    # enumerate the last axis in bulk, the leading ones by iteration
    last = axes[-1]
    if d == 1:
        pts = last[last != 0].astype(float)[:, None]
        return float(np.abs(pts @ B.T).max(axis=1).min())
    lead = list(itertools.product(*axes[:-1]))
    best = math.inf
    step = max(1, chunk // last.size)
    for i in range(0, len(lead), step):
        head = np.array(lead[i:i + step], dtype=float).reshape(-1, d - 1)
        pts = np.concatenate([np.repeat(head, last.size, axis=0),
                              np.tile(last, head.shape[0])[:, None]], axis=1)
        pts = pts[np.any(pts != 0, axis=1)]
        if pts.size:
            best = min(best, float(np.abs(pts @ B.T).max(axis=1).min()))
    return best


def classify(spec: DomainSpec, oracle: bool = False, resolution: int | None = None,
             eps: float = BOUNDARY_TOL) -> BasisClassification:
    """Closed form for the family of ``spec``, or the covering oracle when asked or when
    no closed form exists (general interval unions)."""
    if oracle or isinstance(spec, IntervalUnion):
        return classify_general(spec, resolution or 512, eps)
    if isinstance(spec, BrokenInterval):
        return classify_broken_interval(spec.alpha, spec.L, spec.r, eps)
    if isinstance(spec, RotatedSquare):
        return classify_rotated_square(spec.h, spec.theta, eps)
    return classify_parallelepiped(spec, resolution, eps=eps)
