"""Gram matrices of ``E(Z^d)`` on a domain and their spectral diagnostics.

With ``S(a)(x) = sum_n a_n e^{2 pi i n x}`` the Gram matrix
``G[m, n] = <e_n, e_m>_{L^2(D)} = chi_hat_D(m - n)`` satisfies
``<G a, a> = ||S(a)||^2_{L^2(D)} = int_{[0,1)^d} |S(a)|^2 Phi``, so the
extremal eigenvalues of every finite section lie in ``[min Phi, max Phi]``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh
from scipy.special import polygamma

from .covering import fold_1d
from .errors import NumericalError, ResourceError, ValidationError
from .geometry import DomainSpec, as_interval_union, as_parallelepiped, dimension, measure

DENSE_LIMIT = 4096
GRAM_SIZE_BUDGET = 4500
POWER_TOL = 1e-10
POWER_MAX_ITER = 100_000
SINC_CUTOFF = 1e-8
GAUSS_ORDER = 8

__all__ = [
    "GramMatrix",
    "GramEstimate",
    "BracketSum",
    "EnergyReport",
    "chi_hat",
    "gram_matrix",
    "extremal_eigenvalues",
    "power_iteration",
    "bracket_sum",
    "operator_apply",
    "energy_identities",
    "haase_gap",
]


def _sinc(s):
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    small = np.abs(s) < SINC_CUTOFF
    ps = np.pi * s[~small]
    out[~small] = np.sin(ps) / ps
    out[small] = 1 - (np.pi * s[small]) ** 2 / 6
    return out


def chi_hat(spec: DomainSpec, xi):
    """Fourier transform ``int_D e^{-2 pi i xi . x} dx`` of the indicator of ``spec``.

    For 1-D domains ``xi`` may be a scalar or any array of frequencies; for
    ``d >= 2`` the last axis of ``xi`` holds the ``d`` components.
    """
    u = as_interval_union(spec)
    if u is not None:
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape, dtype=complex)
        for a, b in u:
            a, b = float(a), float(b)
            out += (b - a) * np.exp(-1j * np.pi * xi * (a + b)) * _sinc(xi * (b - a))
        return out[()] if out.ndim == 0 else out
    box = as_parallelepiped(spec)
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1:] != (box.dim,):
        raise ValidationError(f"frequency of dimension {xi.shape[-1:]} for a {box.dim}-D domain")
    eta = xi @ box.matrix
    phase = np.exp(-2j * np.pi * (xi @ box.offset)) * np.prod(np.exp(-1j * np.pi * eta) * _sinc(eta), axis=-1)
    out = abs(box.det) * phase
    return out[()] if np.ndim(out) == 0 else out


def _index_set(N: int, d: int) -> np.ndarray:
    r = np.arange(-N, N + 1)
    grids = np.meshgrid(*([r] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """``matrix[p, q] = chi_hat(indices[p] - indices[q])``, rows/columns in lexicographic index order."""

    N: int | None
    indices: np.ndarray
    matrix: np.ndarray
    measure: float

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def hermitian_defect(self) -> float:
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def to_csv(self, fh=None) -> str | None:
        """``m,n,re,im`` rows; multi-dimensional indices are space-separated inside a field."""
        out = io.StringIO() if fh is None else fh
        out.write("# expbasis-csv v1\nm,n,re,im\n")
        labels = [" ".join(str(int(v)) for v in row) for row in self.indices]
        for p, lp in enumerate(labels):
            for q, lq in enumerate(labels):
                z = self.matrix[p, q]
                out.write(f"{lp},{lq},{z.real:.12g},{z.imag:.12g}\n")
        return out.getvalue() if fh is None else None


class GramEstimate(NamedTuple):
    N: int | None
    lambda_min: float
    lambda_max: float
    size: int
    method: str

    def to_text(self, measure=None, phi_range=None) -> str:
        lines = [f"N: {self.N if self.N is not None else '-'}",
                 f"size: {self.size}",
                 f"lambda_min: {self.lambda_min:.12g}",
                 f"lambda_max: {self.lambda_max:.12g}",
                 f"eigensolver: {self.method}"]
        if measure is not None:
            lines.append(f"measure: {float(measure):.12g}")
        if phi_range is not None:
            lines += [f"phi_min: {phi_range[0]}", f"phi_max: {phi_range[1]}"]
        return "\n".join(lines) + "\n"


def gram_matrix(spec: DomainSpec, N: int | None = None, indices=None,
                budget: int = GRAM_SIZE_BUDGET) -> GramMatrix:
    """Finite section over ``{n : |n|_inf <= N}`` or over an explicit index list."""
    d = dimension(spec)
    if indices is None:
        if N is None or int(N) < 1:
            raise ValidationError(f"truncation N must be at least 1, got {N}")
        N = int(N)
        size = (2 * N + 1) ** d
        if size > budget:
            raise ResourceError(f"Gram section of size {size} exceeds the budget of {budget}")
        idx = _index_set(N, d)
    else:
        idx = np.array(indices, dtype=int).reshape(len(indices), -1)
        if idx.shape[1] != d:
            raise ValidationError(f"indices of dimension {idx.shape[1]} for a {d}-D domain")
        if idx.shape[0] > budget:
            raise ResourceError(f"Gram section of size {idx.shape[0]} exceeds the budget of {budget}")
    diff = idx[:, None, :] - idx[None, :, :]
    G = chi_hat(spec, diff[..., 0] if d == 1 else diff)
    return GramMatrix(N, idx, np.asarray(G, dtype=complex), float(measure(spec)))


def power_iteration(G: np.ndarray, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER,
                    seed: int = 0) -> float:
    """Largest eigenvalue of a Hermitian positive semidefinite matrix.

    The Rayleigh quotients of the iterates increase monotonically to the top
    eigenvalue; iteration stops once successive quotients differ by at most
    ``tol`` (relative to ``max(1, lam)``). A vector residual test is not used
    because Gram sections have clustered top eigenvalues and the iterate
    itself converges far more slowly than its Rayleigh quotient.
    Raises :class:`NumericalError` carrying the last quotient otherwise.
    """
    rng = np.random.default_rng(seed)
    n = G.shape[0]
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = -math.inf
    for _ in range(max_iter):
        w = G @ v
        new = float(np.vdot(v, w).real)
        if abs(new - lam) <= tol * max(1.0, abs(new)):
            return new
        lam = new
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
    raise NumericalError(f"power iteration did not settle to {tol} in {max_iter} steps", partial=lam)


def _lanczos(M: np.ndarray, tol: float, max_iter: int) -> tuple[float, float]:
    n = M.shape[0]
    op = LinearOperator((n, n), matvec=lambda v: M @ v, dtype=complex)
    v0 = np.random.default_rng(0).standard_normal(n).astype(complex)
    ends = []
    for which in ("SA", "LA"):
        try:
            w = eigsh(op, k=1, which=which, tol=tol, maxiter=max_iter, v0=v0, return_eigenvectors=False)
        except ArpackNoConvergence as exc:
            partial = float(exc.eigenvalues[0]) if len(exc.eigenvalues) else float("nan")
            raise NumericalError(f"Lanczos ({which}) did not converge in {max_iter} restarts",
                                 partial=tuple(ends) + (partial,)) from exc
        ends.append(float(w[0]))
    return ends[0], ends[1]


def extremal_eigenvalues(G, method: str = "auto", tol: float = POWER_TOL,
                         max_iter: int = POWER_MAX_ITER) -> GramEstimate:
    """Smallest and largest eigenvalue of a Gram section.

    ``method="auto"`` uses a dense Hermitian solver up to 4096 rows and
    restarted Lanczos (ARPACK) beyond. ``method="power"`` runs shifted power
    iteration, which is only reliable when the extremal eigenvalues are
    well separated.
    """
    N = G.N if isinstance(G, GramMatrix) else None
    M = G.matrix if isinstance(G, GramMatrix) else np.asarray(G)
    n = M.shape[0]
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "lanczos"
    if method == "dense":
        w = np.linalg.eigvalsh(M)
        return GramEstimate(N, float(w[0]), float(w[-1]), n, "dense")
    if method == "lanczos":
        lo, hi = _lanczos(M, tol, max_iter)
        return GramEstimate(N, lo, hi, n, "lanczos")
    if method != "power":
        raise ValidationError(f"unknown eigensolver {method!r}")
    top = power_iteration(M, tol, max_iter)
    try:
        # (top I - G) is PSD; its largest eigenvalue is top - lambda_min
        gap = power_iteration(top * np.eye(n) - M, tol, max_iter, seed=1)
    except NumericalError as exc:
        raise NumericalError(str(exc), partial=(top - exc.partial, top)) from exc
    return GramEstimate(N, top - gap, top, n, "power")


class BracketSum(NamedTuple):
    value: float
    tail_bound: float | None


def bracket_sum(spec: DomainSpec, y, M: int) -> BracketSum:
    """``sum_{|m|_inf <= M} |chi_hat(y + m)|^2``.

    For interval unions with ``k`` pieces the omitted tail is at most
    ``2 (k / pi)^2 / (M - |y|)``; no bound is reported otherwise.
    """
    M = int(M)
    if M < 1:
        raise ValidationError(f"truncation M must be at least 1, got {M}")
    d = dimension(spec)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (d,):
        raise ValidationError(f"point of dimension {y.size} for a {d}-D domain")
    if d == 1:
        xi = y[0] + np.arange(-M, M + 1)
        value = float(np.sum(np.abs(chi_hat(spec, xi)) ** 2))
        k = len(as_interval_union(spec))
        return BracketSum(value, float(2 * (k / math.pi) ** 2 / (M - abs(y[0]))))
    xi = y + _index_set(M, d)
    return BracketSum(float(np.sum(np.abs(chi_hat(spec, xi)) ** 2)), None)


def operator_apply(spec: DomainSpec, a, out_radius: int) -> np.ndarray:
    """``(T_D a)_m = sum_n a_n chi_hat(m - n)`` for ``|m| <= out_radius`` (1-D).

    ``a`` is indexed by ``n = -N..N``.
    """
    a = np.asarray(a, dtype=complex)
    N = (a.size - 1) // 2
    k = np.arange(-(out_radius + N), out_radius + N + 1)
    return np.convolve(chi_hat(spec, k), a, mode="valid")


@dataclass(frozen=True)
class EnergyReport:
    """``q1 = <G a, a>``, ``q2 = int |S|^2 Phi``, ``q3 = ||T_D a||^2``, ``q4 = int |S|^2 Phi^2``.

    ``q3_section = ||G_N a||^2`` keeps only the rows of the finite section;
    it falls short of ``q3`` by the energy of ``T_D a`` outside the index set.
    """

    q1: float
    q2: float
    q3: float
    q4: float
    q3_section: float = float("nan")

    @property
    def delta_12(self) -> float:
        return abs(self.q1 - self.q2)

    @property
    def delta_34(self) -> float:
        return abs(self.q3 - self.q4)


def _trig_poly(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    N = (a.size - 1) // 2
    n = np.arange(-N, N + 1)
    return np.exp(2j * np.pi * np.outer(x, n)) @ a


def energy_identities(spec: DomainSpec, a, quadrature_n: int = 1 << 14,
                      tail_terms: int = 1 << 15) -> EnergyReport:
    """Evaluate both sides of ``<G a, a> = int |S|^2 Phi`` and ``||T_D a||^2 = int |S|^2 Phi^2``.

    The integrals use composite Gauss-Legendre panels aligned with the
    breakpoints of ``Phi`` (about ``quadrature_n`` panels in total).
    ``||T_D a||^2`` is summed over ``|m| <= tail_terms`` from closed-form
    transforms, plus the leading asymptotic tail: the coefficients of the
    jump function ``S Phi`` decay like ``J e^{-2 pi i m x_j} / (2 pi i m)``.
    """
    u = as_interval_union(spec)
    if u is None:
        raise ValidationError("energy identities are only supported for one-dimensional domains")
    a = np.asarray(a, dtype=complex).ravel()
    if a.size % 2 != 1:
        raise ValidationError("coefficient vector must have odd length 2N + 1 (indices -N..N)")
    N = (a.size - 1) // 2
    profile = fold_1d(u)

    G = gram_matrix(u, max(N, 1)).matrix if N else np.array([[complex(measure(u))]])
    q1 = float(np.vdot(a, G @ a).real)

    nodes, weights = leggauss(GAUSS_ORDER)
    degree = max(2 * N, 1)
    q2 = q4 = 0.0
    for x0, x1, v in profile.pieces():
        if v == 0:
            continue
        x0, x1 = float(x0), float(x1)
        length = x1 - x0
        panels = max(1, math.ceil(quadrature_n * length), math.ceil(2 * degree * length))
        edges = np.linspace(x0, x1, panels + 1)
        mid, half = (edges[1:] + edges[:-1]) / 2, (edges[1:] - edges[:-1]) / 2
        x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        w = (half[:, None] * weights[None, :]).ravel()
        s2 = np.abs(_trig_poly(a, x)) ** 2
        q2 += v * float(w @ s2)
        q4 += v * v * float(w @ s2)

    c = operator_apply(u, a, tail_terms)
    head = float(np.sum(np.abs(c) ** 2))
    bp = [float(x) for x in profile.breakpoints[:-1]]
    vals = profile.values
    jumps = np.array([vals[i] - vals[i - 1] for i in range(len(vals))], dtype=float)
    s_at = _trig_poly(a, np.array(bp))
    tail = float(np.sum(np.abs(s_at * jumps) ** 2)) * 2 * float(polygamma(1, tail_terms + 1)) / (4 * math.pi ** 2)
    Ga = G @ a
    return EnergyReport(q1, q2, head + tail, q4, float(np.vdot(Ga, Ga).real))


def haase_gap(G, a) -> tuple[float, float, float]:
    """``(||G a||^2 / lam_max, <G a, a>, lam_max)`` for a unit vector ``a``.

    For a positive semidefinite section these are always ordered.
    """
    M = G.matrix if isinstance(G, GramMatrix) else np.asarray(G)
    a = np.asarray(a, dtype=complex).ravel()
    if not math.isclose(float(np.linalg.norm(a)), 1.0, rel_tol=1e-9):
        raise ValidationError("haase_gap needs a unit coefficient vector")
    lam_max = extremal_eigenvalues(M).lambda_max
    Ga = M @ a
    return float(np.vdot(Ga, Ga).real) / lam_max, float(np.vdot(a, Ga).real), lam_max
