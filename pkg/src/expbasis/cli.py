"""Command-line front end: ``classify``, ``sweep``, ``covering`` and ``gram``.

Exit codes: 0 success, 2 usage/validation, 3 resource budget, 4 numerical
non-convergence.  All numbers are printed with 12 significant digits.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import itertools
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .classify import BOUNDARY_TOL, classify, classify_broken_interval, classify_rotated_square
from .covering import CSV_HEADER, covering_profile
from .errors import ExpBasisError, ResourceError, ValidationError
from .geometry import as_interval_union, dimension, measure, parse_domain
from .spectral import energy_identities, extremal_eigenvalues, gram_matrix

SWEEP_BUDGET = 10 ** 6
SWEEP_COLUMNS = ("frame", "riesz_seq", "riesz_basis", "complete", "onb", "warnings")
FAMILIES = {"broken": ("a", "L", "r"), "square": ("h", "theta")}


def _g(x) -> str:
    return f"{float(x):.12g}"


@dataclass(frozen=True)
class SweepGrid:
    """Cartesian grid of ``start:stop:step`` ranges, parsed exactly as rationals."""

    names: tuple[str, ...]
    ranges: tuple[tuple[Fraction, Fraction, Fraction], ...]
    budget: int = SWEEP_BUDGET

    def __post_init__(self):
        for name, (start, stop, step) in zip(self.names, self.ranges):
            if step <= 0:
                raise ValidationError(f"--{name}: step must be positive")
            if start > stop:
                raise ValidationError(f"--{name}: start must not exceed stop")
        if self.count > self.budget:
            raise ResourceError(f"sweep of {self.count} points exceeds the budget of {self.budget}")

    @staticmethod
    def parse_range(text: str) -> tuple[Fraction, Fraction, Fraction]:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"range {text!r} is not start:stop:step")
        try:
            return tuple(Fraction(p.strip()) for p in parts)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"range {text!r}: {exc}") from None

    def axis(self, i: int) -> list[Fraction]:
        start, stop, step = self.ranges[i]
        return [start + k * step for k in range(math.floor((stop - start) / step) + 1)]

    @property
    def count(self) -> int:
        return math.prod(math.floor((stop - start) / step) + 1 for start, stop, step in self.ranges)

    def points(self):
        """Grid points in lexicographic order (first parameter varies slowest)."""
        return itertools.product(*(self.axis(i) for i in range(len(self.names))))


def _sweep_row(family: str, point: tuple, degrees: bool, eps: float) -> list[str]:
    try:
        if family == "broken":
            c = classify_broken_interval(*point, eps=eps)
        else:
            h, theta = point
            theta = math.radians(theta) if degrees else float(theta)
            c = classify_rotated_square(float(h), theta, eps=eps)
    except ValidationError:
        return [""] * 5 + ["1"]
    return ["true" if b else "false" for b in c.bits] + [str(len(c.warnings))]


def _sweep_chunk(args):
    family, points, degrees, eps = args
    return [_sweep_row(family, p, degrees, eps) for p in points]


def run_sweep(args, out) -> int:
    names = FAMILIES[args.family]
    ranges = []
    for name in names:
        text = getattr(args, name)
        if text is None:
            raise ValidationError(f"sweep {args.family} needs --{name} start:stop:step")
        ranges.append(SweepGrid.parse_range(text))
    grid = SweepGrid(names, tuple(ranges), args.budget)
    points = list(grid.points())
    if args.jobs > 1:
        size = max(1, len(points) // (4 * args.jobs))
        chunks = [(args.family, points[i:i + size], args.deg, args.eps) for i in range(0, len(points), size)]
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = [row for part in pool.map(_sweep_chunk, chunks) for row in part]
    else:
        rows = _sweep_chunk((args.family, points, args.deg, args.eps))
    out.write(CSV_HEADER + "\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(list(names) + list(SWEEP_COLUMNS))
    for p, row in zip(points, rows):
        writer.writerow([_g(v) for v in p] + row)
    return 0


def run_classify(args, out) -> int:
    spec = parse_domain(args.domain, degrees=args.deg)
    c = classify(spec, oracle=args.oracle, resolution=args.resolution, eps=args.eps)
    out.write(c.to_record())
    return 0


def run_covering(args, out) -> int:
    spec = parse_domain(args.domain, degrees=args.deg)
    profile = covering_profile(spec, args.resolution)
    if dimension(spec) == 1:
        out.write(f"phi_min: {profile.phi_min}\nphi_max: {profile.phi_max}\n"
                  f"measure: {_g(profile.mass)}\npieces:\n")
        for x0, x1, v in profile.pieces():
            out.write(f"  [{_g(x0)}, {_g(x1)}): {v}\n")
        return 0
    out.write(f"phi_min: {profile.phi_min}\nphi_max: {profile.phi_max}\n"
              f"boundary_margin: {_g(profile.boundary_margin)}\nresolution: {profile.resolution}\n"
              f"approximate: true\n")
    if args.cells:
        with open(args.cells, "w", newline="") as fh:
            profile.to_csv(fh)
    return 0


def _parse_indices(text: str, d: int) -> list:
    try:
        rows = [[int(v) for v in item.split()] for item in text.split(",")]
    except ValueError:
        raise ValidationError(f"--indices {text!r}: expected integers") from None
    if any(len(r) != d for r in rows):
        raise ValidationError(f"--indices: each index needs {d} integer(s), space-separated")
    return rows


def run_gram(args, out) -> int:
    spec = parse_domain(args.domain, degrees=args.deg)
    d = dimension(spec)
    if args.indices:
        G = gram_matrix(spec, indices=_parse_indices(args.indices, d))
    else:
        G = gram_matrix(spec, args.N)
    est = extremal_eigenvalues(G)
    u = as_interval_union(spec)
    phi = None
    if u is not None:
        p = covering_profile(u)
        phi = (p.phi_min, p.phi_max)
    out.write(est.to_text(measure(spec), phi))
    if args.dump:
        with open(args.dump, "w", newline="") as fh:
            G.to_csv(fh)
    if args.identities:
        if u is None:
            raise ValidationError("--identities is only supported for one-dimensional domains")
        idx = G.indices[:, 0]
        K = int(np.abs(idx).max())
        rng = np.random.default_rng(args.seed)
        for t in range(args.trials):
            a = np.zeros(2 * K + 1, dtype=complex)
            a[idx + K] = rng.standard_normal(idx.size) + 1j * rng.standard_normal(idx.size)
            a /= np.linalg.norm(a)
            r = energy_identities(u, a)
            out.write(f"trial {t}: q1={_g(r.q1)} q2={_g(r.q2)} q3={_g(r.q3)} q4={_g(r.q4)} "
                      f"delta_12={r.delta_12:.3e} delta_34={r.delta_34:.3e}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--eps", type=float, default=BOUNDARY_TOL, help="geometric tolerance (default 1e-9)")
    common.add_argument("--out", help="write the report or CSV here instead of stdout")
    common.add_argument("--oracle", action="store_true", help="force the covering-function oracle")
    common.add_argument("--resolution", type=int, default=512, help="grid resolution per axis for d >= 2")
    common.add_argument("--deg", action="store_true", help="read angles in degrees")

    parser = argparse.ArgumentParser(prog="expbasis", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common], help="frame / Riesz verdicts for one domain")
    p.add_argument("domain")
    p.set_defaults(run=run_classify)

    p = sub.add_parser("sweep", parents=[common], help="verdict CSV over a parameter grid")
    p.add_argument("family", choices=sorted(FAMILIES))
    for name in ("a", "L", "r", "h", "theta"):
        p.add_argument(f"--{name}", metavar="START:STOP:STEP")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--budget", type=int, default=SWEEP_BUDGET)
    p.set_defaults(run=run_sweep)

    p = sub.add_parser("covering", parents=[common], help="covering-function report")
    p.add_argument("domain")
    p.add_argument("--cells", metavar="PATH", help="write the per-cell counts (d >= 2) as CSV")
    p.set_defaults(run=run_covering)

    p = sub.add_parser("gram", parents=[common], help="Gram-section eigenvalue report")
    p.add_argument("domain")
    p.add_argument("--N", type=int, default=16, help="truncation per axis")
    p.add_argument("--indices", help="explicit index set, e.g. '0,1' or '0 0,0 1'")
    p.add_argument("--identities", action="store_true", help="check the energy identities on random vectors")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump", metavar="PATH", help="write the matrix as m,n,re,im CSV")
    p.set_defaults(run=run_gram)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with contextlib.ExitStack() as stack:
            out = stack.enter_context(open(args.out, "w", newline="")) if args.out else sys.stdout
            return args.run(args, out)
    except ExpBasisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
