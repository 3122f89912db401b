"""Dense complex linear algebra used throughout the package.

Everything here works on small dense ``complex128`` arrays.  Eigenpairs come
from LAPACK (via numpy) and matrix exponentials from scipy; both are wrapped so
the rest of the code gets residual-checked results and explicit errors instead
of silent NaNs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

__all__ = [
    "LinalgError",
    "NonConvergence",
    "Overflow",
    "EigenDecomposition",
    "GeneratorPiece",
    "GeneratorPath",
    "as_matrix",
    "eig_general",
    "expm",
    "jacobi_eigh",
    "path_ordered_exp",
    "pair_eigenvalues",
]

DEFAULT_EIG_TOL = 1e-8


class LinalgError(ArithmeticError):
    pass


class NonConvergence(LinalgError):
    pass


class Overflow(LinalgError):
    pass


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a finite square complex matrix (raises ValueError)."""
    m = np.array(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    vectors: np.ndarray  # right eigenvectors as unit-norm columns
    residual: float  # max_k |A v_k - lam_k v_k|, absolute
    min_gap: float
    near_degenerate: bool


def eig_general(a, tol: float = DEFAULT_EIG_TOL) -> EigenDecomposition:
    """Eigendecomposition of a general complex matrix.

    Eigenvalues are sorted lexicographically by (real, imag) so identical
    inputs always give identical ordering.  ``near_degenerate`` is set when two
    eigenvalues are closer than ``tol * ||A||``; that is a flag for the caller,
    not an error.  NonConvergence is raised if LAPACK fails or the residual
    exceeds ``tol * ||A||``.
    """
    m = as_matrix(a)
    try:
        w, v = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc
    order = np.lexsort((w.imag, w.real))
    w = w[order]
    v = v[:, order]
    v = v / np.linalg.norm(v, axis=0)
    res = float(np.max(np.linalg.norm(m @ v - v * w, axis=0)))
    scale = max(np.linalg.norm(m, 2), np.finfo(float).tiny)
    if not np.isfinite(res) or res > tol * scale:
        raise NonConvergence(f"eigen residual {res:.3e} exceeds {tol * scale:.3e}")
    n = len(w)
    gap = math.inf
    if n > 1:
        d = np.abs(w[:, None] - w[None, :]) + np.diag(np.full(n, np.inf))
        gap = float(d.min())
    return EigenDecomposition(w, v, res, gap, gap < tol * scale)


def expm(a) -> np.ndarray:
    """Matrix exponential (scipy's scaling-and-squaring Pade)."""
    m = as_matrix(a)
    with np.errstate(over="ignore", invalid="ignore"):
        out = scipy.linalg.expm(m)
    if not np.all(np.isfinite(out)):
        raise Overflow("matrix exponential overflowed")
    return out


def jacobi_eigh(h, tol: float = 1e-15, max_sweeps: int = 60):
    """Eigen-decomposition of a Hermitian positive definite matrix by cyclic Jacobi.

    Rotations stop once every ``|h_pq| <= tol * sqrt(h_pp h_qq)``.  With that
    relative test the eigenvalues of a graded matrix ``D G D`` (``D`` diagonal,
    ``G`` well conditioned) come out with small *relative* error even when they
    span many orders of magnitude, which a dense QR solver cannot promise.
    Returns ``(eigenvalues ascending, unitary eigenvector columns)``.
    """
    a = as_matrix(h).copy()
    n = a.shape[0]
    u = np.eye(n, dtype=complex)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                app, aqq = a[p, p].real, a[q, q].real
                if app <= 0 or aqq <= 0:
                    raise LinalgError("matrix is not positive definite")
                mag = abs(apq)
                if mag <= tol * math.sqrt(app * aqq):
                    continue
                rotated = True
                phase = apq / mag
                tau = (aqq - app) / (2.0 * mag)
                t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                # J = [[c, s e^{i phi}], [-s e^{-i phi}, c]] on (p, q); A <- J* A J
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * np.conj(phase) * cq
                a[:, q] = s * phase * cp + c * cq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * phase * rq
                a[q, :] = s * np.conj(phase) * rp + c * rq
                # the textbook diagonal update keeps small pivots accurate
                a[p, p] = app - t * mag
                a[q, q] = aqq + t * mag
                a[p, q] = a[q, p] = 0.0
                up, uq = u[:, p].copy(), u[:, q].copy()
                u[:, p] = c * up - s * np.conj(phase) * uq
                u[:, q] = s * phase * up + c * uq
        if not rotated:
            lam = np.diag(a).real.copy()
            order = np.argsort(lam)
            return lam[order], u[:, order]
    raise NonConvergence("Jacobi sweeps did not converge")


@dataclass(frozen=True)
class GeneratorPiece:
    """Generator on ``[start, stop]``: ``M(xi) = constant + xi * slope``.

    ``xi`` runs over [0, 1] across the piece.  ``slope=None`` marks a constant
    piece.
    """

    start: float
    stop: float
    constant: np.ndarray
    slope: np.ndarray | None = None

    @property
    def length(self) -> float:
        return self.stop - self.start

    def at(self, xi):
        if self.slope is None:
            return self.constant
        return self.constant + xi * self.slope


@dataclass(frozen=True)
class GeneratorPath:
    pieces: tuple[GeneratorPiece, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.pieces:
            raise ValueError("a generator path needs at least one piece")
        for p in self.pieces:
            if not p.stop > p.start:
                raise ValueError("piece endpoints must be strictly increasing")
        for a, b in zip(self.pieces, self.pieces[1:]):
            if a.stop != b.start:
                raise ValueError("pieces must partition the interval")

    @classmethod
    def from_pieces(cls, pieces):
        return cls(tuple(pieces))

    @property
    def start(self) -> float:
        return self.pieces[0].start

    @property
    def stop(self) -> float:
        return self.pieces[-1].stop


_GL2 = 0.5 / math.sqrt(3.0)


def _step(piece: GeneratorPiece, xa: float, xb: float, method: str) -> np.ndarray:
    """Propagator over [xa, xb] (both normalized coordinates) of one piece."""
    L = piece.length
    h = (xb - xa) * L
    if piece.slope is None:
        return expm(h * piece.constant)
    if method == "midpoint":
        return expm(h * piece.at(0.5 * (xa + xb)))
    if method == "magnus4":
        c = 0.5 * (xa + xb)
        d = _GL2 * (xb - xa)
        m1 = piece.at(c - d)
        m2 = piece.at(c + d)
        omega = 0.5 * h * (m1 + m2) + (math.sqrt(3.0) / 12.0) * h * h * (m2 @ m1 - m1 @ m2)
        return expm(omega)
    raise ValueError(f"unknown path-ordering method {method!r}")


def path_ordered_exp(path: GeneratorPath, steps_per_unit: int, method: str = "midpoint",
                     at=None):
    """Product integral of ``dS/dx = M(x) S`` with ``S(path.start) = I``.

    Later points act from the left.  Each piece is cut into
    ``ceil(steps_per_unit * length)`` substeps.  ``method="midpoint"`` is the
    exponential-midpoint rule (order 2); ``"magnus4"`` is the two-point Gauss
    Magnus integrator (order 4).  Constant pieces are always exact.

    With ``at`` (increasing x values inside the path) the partial products at
    those points are returned as an array of shape ``(len(at), N, N)``.
    """
    if steps_per_unit < 1:
        raise ValueError("steps_per_unit must be >= 1")
    n = path.pieces[0].constant.shape[0]
    targets = [] if at is None else sorted(float(x) for x in at)
    if targets and (targets[0] < path.start - 1e-14 or targets[-1] > path.stop + 1e-14):
        raise ValueError("requested points lie outside the path")
    out = []
    ti = 0
    acc = np.eye(n, dtype=complex)
    for piece in path.pieces:
        L = piece.length
        # normalized breakpoints: regular substeps plus any requested points
        nsub = max(1, math.ceil(steps_per_unit * L))
        marks = set(np.linspace(0.0, 1.0, nsub + 1).tolist())
        local = []
        while ti < len(targets) and targets[ti] <= piece.stop:
            xi = min(max((targets[ti] - piece.start) / L, 0.0), 1.0)
            local.append(xi)
            marks.add(xi)
            ti += 1
        grid = sorted(marks)
        snaps = {}
        if 0.0 in local:
            snaps[0.0] = acc.copy()
        for xa, xb in zip(grid, grid[1:]):
            if xb - xa <= 0.0:
                continue
            if piece.slope is None:
                acc = expm((xb - xa) * L * piece.constant) @ acc
            else:
                acc = _step(piece, xa, xb, method) @ acc
            snaps[xb] = acc.copy()
        out.extend(snaps[xi] for xi in local)
    if at is None:
        return acc
    return np.array(out)


def pair_eigenvalues(prev, curr):
    """Match each previous eigenvalue to a current one.

    Returns ``(perm, ambiguous)`` where ``curr[perm[i]]`` is the partner of
    ``prev[i]``.  The matching minimizes the total distance.  When another
    assignment ties the optimum, the lexicographically smallest permutation
    wins and ``ambiguous`` is True.
    """
    prev = np.asarray(prev, dtype=complex).ravel()
    curr = np.asarray(curr, dtype=complex).ravel()
    if prev.shape != curr.shape:
        raise ValueError("eigenvalue lists differ in length")
    n = len(prev)
    cost = np.abs(prev[:, None] - curr[None, :])
    if n <= 6:
        best = None
        ties = 0
        scale = 1e-12 * max(1.0, float(cost.max(initial=0.0)))
        for perm in permutations(range(n)):
            c = float(sum(cost[i, perm[i]] for i in range(n)))
            if best is None or c < best[0] - scale:
                best, ties = (c, perm), 0
            elif abs(c - best[0]) <= scale:
                ties += 1
        return np.array(best[1], dtype=int), ties > 0
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(n, dtype=int)
    perm[rows] = cols
    return perm, False
