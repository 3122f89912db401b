"""Exact solutions from the free gauge field.

In the temporal gauge the electric field is static and the spatial gauge field
grows linearly in time, so the whole evolution is encoded in the monodromy

    S(t, pi) = e^{c pi Q0} [ordered product of e^{c t L_j B_j}] e^{c pi Q0}

with c = -i g (trigonometric cases) or c = g (hyperbolic case).  Positions are
read off from its eigenvalues lambda = e^{2 pi c q}, momenta and spins from the
diagonalizing matrix V.

The residual diagonal gauge freedom in V is fixed so that the returned spins
obey the equations of motion with vanishing gauge functions a(t) = 0, which is
the same convention the ODE integrator uses.  Positions, momenta and every
gauge-invariant spin observable do not depend on this choice.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .linalg import GeneratorPath, GeneratorPiece, eig_general, expm, pair_eigenvalues
from .models import (
    DeltaSites,
    PhaseState,
    PiecewiseExp,
    RationalSpin,
    SutherlandHyp,
    SutherlandTrig,
    SystemConfig,
    hamiltonian,
)

__all__ = [
    "CollisionAtStart",
    "CollisionDetected",
    "BlockField",
    "Monodromy",
    "GaugeFrame",
    "Trajectory",
    "SolverSettings",
    "build_initial_field",
    "blocks_from_state",
    "monodromy_at",
    "extract_positions",
    "extract_spins",
    "momenta",
    "gauge_transform",
    "field_energy",
    "solve",
    "track",
    "casimirs_of",
    "COLLISION_GAP",
]

COLLISION_GAP = 1e-8
_GL8 = np.polynomial.legendre.leggauss(8)


class CollisionAtStart(ValueError):
    pass


class CollisionDetected(RuntimeError):
    """Raised when two eigenvalues of the monodromy merge.

    ``partial`` holds the trajectory up to the last regular sample.
    """

    def __init__(self, msg, t, partial=None):
        super().__init__(msg)
        self.t = t
        self.partial = partial


def coefficient(kind: str, g: float) -> complex:
    return complex(g) if kind == "hyp" else -1j * g


@dataclass(frozen=True)
class BlockField:
    """Initial electric field in the frame co-moving with ``Q0``.

    ``blocks[j]`` is the (constant) block on ``[bounds[j], bounds[j+1]]``; for
    piecewise charges it is the value at the left end and ``slopes[j]`` is the
    total increase across the panel.  The rational model has a single block,
    the x-independent initial field.
    """

    kind: str
    g: float
    q0: np.ndarray
    bounds: np.ndarray
    blocks: np.ndarray
    slopes: np.ndarray | None = None

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.bounds)

    @property
    def coeff(self) -> complex:
        return coefficient(self.kind, self.g)

    def value(self, x: float) -> np.ndarray:
        """B(0, x) for x in [-pi, pi] (right-continuous at interior bounds)."""
        j = int(np.clip(np.searchsorted(self.bounds, x, side="right") - 1, 0, len(self.blocks) - 1))
        if self.slopes is None:
            return self.blocks[j]
        xi = (x - self.bounds[j]) / (self.bounds[j + 1] - self.bounds[j])
        return self.blocks[j] + xi * self.slopes[j]

    def electric(self, x: float) -> np.ndarray:
        """E(0, x) = e^{c Q0 x} B(0, x) e^{-c Q0 x} in the temporal gauge."""
        ph = np.exp(self.coeff * self.q0 * x)
        return ph[:, None] * self.value(x) / ph[None, :]


def _offdiag(n):
    return ~np.eye(n, dtype=bool)


def _sutherland_blocks(kind, g, e, q, p):
    n = len(q)
    r = q[:, None] - q[None, :]
    off = _offdiag(n)
    a = math.pi * g
    rs = np.where(off, r, 0.5 / g)
    if kind == "trig":
        sn = np.sin(a * rs)
        if n > 1 and np.min(np.abs(sn[off])) < 1e-12:
            raise CollisionAtStart("coincident positions")
        bp = np.where(off, e * a * np.exp(1j * a * r) / (1j * sn), 0.0)
        bm = np.where(off, e * a * np.exp(-1j * a * r) / (1j * sn), 0.0)
    else:
        sh = np.sinh(a * rs)
        if n > 1 and np.min(np.abs(sh[off])) < 1e-12:
            raise CollisionAtStart("coincident positions")
        bp = np.where(off, 1j * e * a * np.exp(-a * r) / sh, 0.0)
        bm = np.where(off, 1j * e * a * np.exp(a * r) / sh, 0.0)
    P = np.diag(np.asarray(p, dtype=complex))
    return np.array([P + bm, P + bp])


def _delta_blocks(g, sites, rho, q, p):
    n = len(q)
    x = np.asarray(sites)
    r = q[:, None] - q[None, :]
    off = _offdiag(n)
    z = np.exp(2j * math.pi * g * np.where(off, r, 0.0))
    den = np.where(off, z - 1.0, 1.0)
    if n > 1 and np.min(np.abs(den[off])) < 1e-12:
        raise CollisionAtStart("coincident positions")
    # charges conjugated into the co-moving frame: e^{i g r x_l} rho_l
    jumps = np.exp(1j * g * r[None] * x[:, None, None]) * rho
    bounds = np.concatenate([[-math.pi], x, [math.pi]])
    L = np.diff(bounds)
    cum = np.concatenate([np.zeros((1, n, n), complex), np.cumsum(jumps, axis=0)])
    B0 = np.where(off, jumps.sum(axis=0) / den, 0.0)
    dcum = np.einsum("jaa->ja", cum)
    B0[np.diag_indices(n)] = p - (L[:, None] * dcum).sum(axis=0) / (2.0 * math.pi)
    return bounds, B0[None] + cum


def _piecewise_blocks(g, bps, s, q, p):
    n = len(q)
    r = q[:, None] - q[None, :]
    off = _offdiag(n)
    sn = np.sin(math.pi * g * np.where(off, r, 0.5 / g))
    if n > 1 and np.min(np.abs(sn[off])) < 1e-12:
        raise CollisionAtStart("coincident positions")
    bounds = np.asarray(bps)
    D = np.diff(bounds)
    cum = np.concatenate([np.zeros((1, n, n), complex), np.cumsum(s, axis=0)[:-1]])
    Bm = np.where(off, np.exp(-1j * math.pi * g * r) / (2j * sn) * s.sum(axis=0), 0.0)
    sd = np.einsum("jaa->ja", s)
    cd = np.einsum("jaa->ja", cum)
    Bm[np.diag_indices(n)] = p - (D[:, None] * (0.5 * sd + cd)).sum(axis=0) / (2.0 * math.pi)
    return bounds, Bm[None] + cum


def blocks_from_state(config: SystemConfig, q, p, spins) -> BlockField:
    """Blocks of the electric field built from a phase-space point."""
    v = config.variant
    g = config.g
    q = np.asarray(q, dtype=complex)
    p = np.asarray(p, dtype=complex)
    if isinstance(v, RationalSpin):
        S = np.asarray(spins[0])
        n = len(q)
        off = _offdiag(n)
        r = q[:, None] - q[None, :]
        if n > 1 and np.min(np.abs(r[off])) < 1e-12:
            raise CollisionAtStart("coincident positions")
        E = np.diag(p) + np.where(off, S / (1j * np.where(off, r, 1.0)), 0.0)
        return BlockField("rational", g, q, np.array([-math.pi, math.pi]), E[None])
    if isinstance(v, (SutherlandTrig, SutherlandHyp)):
        blocks = _sutherland_blocks(v.kind, g, v.e, q, p)
        return BlockField(v.kind, g, q, np.array([-math.pi, 0.0, math.pi]), blocks)
    if isinstance(v, DeltaSites):
        bounds, blocks = _delta_blocks(g, v.sites, np.asarray(spins), q, p)
        return BlockField("delta", g, q, bounds, blocks)
    if isinstance(v, PiecewiseExp):
        s = np.asarray(spins)
        bounds, blocks = _piecewise_blocks(g, v.breakpoints, s, q, p)
        return BlockField("piecewise", g, q, bounds, blocks, s.copy())
    raise TypeError(f"unsupported variant {type(v).__name__}")


def build_initial_field(config: SystemConfig) -> BlockField:
    return blocks_from_state(config, config.q0, config.p0, config.variant.spins0)


@dataclass(frozen=True)
class Monodromy:
    """S(t, pi) with the data needed for momenta, spins and time derivatives.

    ``tilde[i]`` is e^{-c Q0 y_i} S(t, y_i) at the nodes ``y``; ``K[i]`` is the
    field block conjugated by it, ``w`` and ``wy`` are quadrature weights for
    int dy and int (pi - y) dy.  For the rational model ``S_pi`` is the gauge
    field A1(t) itself.
    """

    t: float
    S_pi: np.ndarray
    dS: np.ndarray  # time derivative of S_pi
    y: np.ndarray
    tilde: np.ndarray
    K: np.ndarray
    w: np.ndarray
    wy: np.ndarray
    site_tilde: np.ndarray | None = None  # tilde at the interval bounds

    def partial(self, field: BlockField, j: int) -> np.ndarray:
        """S(t, x) at ``field.bounds[j]``."""
        x = field.bounds[j]
        return np.exp(field.coeff * field.q0 * x)[:, None] * self.site_tilde[j]


def _gl_nodes(a, b, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


@dataclass(frozen=True)
class SolverSettings:
    max_dt: float = 0.25
    max_phase_step: float = math.pi / 4
    collision_gap: float = COLLISION_GAP
    steps_per_unit: int = 16  # path-ordered products for piecewise charges
    path_method: str = "magnus4"
    panel_nodes: int = 64
    eig_tol: float = 1e-8
    max_bisections: int = 40
    graded_hyperbolic: bool = True  # Jacobi on the factored monodromy for real hyperbolic data
    restart_interval: float | None = 1.0  # rebuild the field from the exact state this often


def monodromy_at(t: float, field: BlockField, settings: SolverSettings | None = None) -> Monodromy:
    if t < 0:
        raise ValueError("t must be nonnegative")
    settings = settings or SolverSettings()
    n = len(field.q0)
    if field.kind == "rational":
        E = field.blocks[0]
        A = np.diag(field.q0) + E * t
        one = np.eye(n, dtype=complex)[None]
        return Monodromy(t, A, E, np.array([0.0]), one, E[None], np.array([2 * math.pi]),
                         np.array([2 * math.pi ** 2]), np.concatenate([one, one]))
    c = field.coeff
    edge = np.diag(np.exp(c * math.pi * field.q0))
    if field.slopes is None:
        L = field.lengths
        tildes = [edge]
        for j, B in enumerate(field.blocks):
            tildes.append(expm(c * t * L[j] * B) @ tildes[-1])
        tildes = np.array(tildes)
        K = np.array([np.linalg.solve(tildes[j], B @ tildes[j]) for j, B in enumerate(field.blocks)])
        S = edge @ tildes[-1]
        dS = S @ (c * np.einsum("j,jab->ab", L, K))
        wy = L * (0.5 * L + math.pi - field.bounds[1:])
        return Monodromy(t, S, dS, 0.5 * (field.bounds[1:] + field.bounds[:-1]), tildes[:-1], K,
                         L, wy, tildes)
    # piecewise affine blocks: ordered products evaluated at Gauss nodes
    pieces = []
    ys, ws = [], []
    for j in range(len(field.blocks)):
        a, b = field.bounds[j], field.bounds[j + 1]
        pieces.append(GeneratorPiece(a, b, c * t * field.blocks[j], c * t * field.slopes[j]))
        y, w = _gl_nodes(a, b, settings.panel_nodes)
        ys.append(y)
        ws.append(w)
    y = np.concatenate(ys)
    w = np.concatenate(ws)
    at = np.concatenate([field.bounds, y])
    order = np.argsort(at, kind="stable")
    prods = linalg.path_ordered_exp(GeneratorPath.from_pieces(pieces), settings.steps_per_unit,
                                    settings.path_method, at=at[order])
    full = np.empty_like(prods)
    full[order] = prods
    full = full @ edge
    site_tilde = full[: len(field.bounds)]
    tilde = full[len(field.bounds):]
    Bv = np.array([field.value(yi) for yi in y])
    K = np.linalg.solve(tilde, Bv @ tilde)
    S = edge @ site_tilde[-1]
    dS = S @ (c * np.einsum("i,iab->ab", w, K))
    return Monodromy(t, S, dS, y, tilde, K, w, w * (math.pi - y), site_tilde)


@dataclass
class GaugeFrame:
    """Diagonalizing frame of the monodromy at one time.

    ``V`` columns are eigenvectors matched to ``q``.  ``log_lambda`` carries the
    continuous branch of the logarithm of each eigenvalue.
    """

    t: float
    V: np.ndarray
    q: np.ndarray
    eigenvalues: np.ndarray
    log_lambda: np.ndarray
    gap: float  # smallest pairwise relative eigenvalue gap
    residual: float
    ambiguous: bool = False


def _relative_gap(lam, kind):
    n = len(lam)
    if n < 2:
        return math.inf
    d = np.abs(lam[:, None] - lam[None, :])
    if kind == "rational":
        scale = np.maximum(1.0, np.maximum(np.abs(lam)[:, None], np.abs(lam)[None, :]))
    else:
        scale = np.maximum(np.abs(lam)[:, None], np.abs(lam)[None, :])
    rel = d / scale + np.diag(np.full(n, np.inf))
    return float(rel.min())


def extract_positions(mono: Monodromy, prev: GaugeFrame | None, field: BlockField,
                      settings: SolverSettings | None = None) -> GaugeFrame:
    """Positions from the eigenvalues of ``mono.S_pi``.

    With ``prev=None`` (only valid at t = 0) the eigenvalues are matched to the
    initial positions; otherwise to ``prev`` and the logarithm is continued.
    """
    settings = settings or SolverSettings()
    dec = eig_general(mono.S_pi, settings.eig_tol)
    lam, V = dec.eigenvalues, dec.vectors
    kind = field.kind
    c = field.coeff
    gap = _relative_gap(lam, kind)
    if gap < settings.collision_gap:
        raise CollisionDetected(f"eigenvalues of the monodromy merged at t={mono.t:.6g}", mono.t)
    if prev is None:
        ref_q = field.q0
        ref_lam = ref_q if kind == "rational" else np.exp(2 * math.pi * c * ref_q)
        perm, amb = pair_eigenvalues(ref_lam, lam)
        lam, V = lam[perm], V[:, perm]
        if kind == "rational":
            logl = lam.copy()
        else:
            logl = 2 * math.pi * c * ref_q + np.log(lam / ref_lam)
    else:
        perm, amb = pair_eigenvalues(prev.eigenvalues, lam)
        lam, V = lam[perm], V[:, perm]
        if kind == "rational":
            logl = lam.copy()
        else:
            logl = prev.log_lambda + np.log(lam / prev.eigenvalues)
    q = logl if kind == "rational" else logl / (2 * math.pi * c)
    return GaugeFrame(mono.t, V, q, lam, logl, gap, dec.residual, amb)


def _Vinv(V):
    return np.linalg.inv(V)


def momenta(mono: Monodromy, V: np.ndarray) -> np.ndarray:
    Vi = _Vinv(V)
    d = np.einsum("ab,ibc,ca->ia", Vi, mono.K, V)
    return (mono.w[:, None] * d).sum(axis=0) / (2 * math.pi)


def _kappa(mono: Monodromy, V: np.ndarray) -> np.ndarray:
    Vi = _Vinv(V)
    d = np.einsum("ab,ibc,ca->ia", Vi, mono.K, V)
    p = (mono.w[:, None] * d).sum(axis=0) / (2 * math.pi)
    return (mono.wy[:, None] * d).sum(axis=0) / (2 * math.pi) - math.pi * p


def extract_spins(mono: Monodromy, frame: GaugeFrame, field: BlockField,
                  config: SystemConfig) -> list:
    """Spin matrices at ``mono.t`` in the gauge fixed by ``frame.V``."""
    v = config.variant
    V = frame.V
    Vi = _Vinv(V)
    if isinstance(v, RationalSpin):
        return [Vi @ v.S0 @ V]
    if isinstance(v, (SutherlandTrig, SutherlandHyp)):
        return []
    c = field.coeff
    Q = frame.q
    if isinstance(v, DeltaSites):
        out = []
        for j, x in enumerate(v.sites, start=1):
            M = Vi @ (mono.K[j] - mono.K[j - 1]) @ V
            ph = np.exp(c * (x + math.pi) * Q)
            out.append(ph[:, None] * M / ph[None, :])
        return out
    # piecewise: average the transported charge density over each panel
    ph = np.exp(c * math.pi * Q)
    out = []
    npan = len(field.blocks)
    nodes = len(mono.y) // npan
    for j in range(npan):
        sl = slice(j * nodes, (j + 1) * nodes)
        T = mono.tilde[sl]
        X = np.linalg.solve(T, field.slopes[j][None] @ T)
        Xi = np.einsum("i,iab->ab", mono.w[sl], X) / field.lengths[j]
        M = Vi @ Xi @ V
        out.append(ph[:, None] * M / ph[None, :])
    return out


def gauge_transform(mono: Monodromy, frame: GaugeFrame, field: BlockField, x: float) -> np.ndarray:
    """U(t, x) = S(t, x) V e^{-c (x + pi) Q}, periodic in x when the frame is exact."""
    if field.kind == "rational":
        return frame.V.copy()
    c = field.coeff
    bounds = field.bounds
    if field.slopes is not None and not np.any(np.isclose(bounds, x, rtol=0, atol=1e-15)):
        raise ValueError("piecewise monodromy only stores bounds; pass a bound")
    j = int(np.argmin(np.abs(bounds - x))) if np.any(np.isclose(bounds, x, rtol=0, atol=1e-15)) else None
    if j is not None:
        Sx = np.exp(c * field.q0 * x)[:, None] * mono.site_tilde[j]
    else:
        k = int(np.clip(np.searchsorted(bounds, x, side="right") - 1, 0, len(field.blocks) - 1))
        Sx = np.exp(c * field.q0 * x)[:, None] * (
            expm(c * mono.t * (x - bounds[k]) * field.blocks[k]) @ mono.site_tilde[k])
    return Sx @ frame.V * np.exp(-c * (x + math.pi) * frame.q)[None, :]


def field_energy(field: BlockField) -> complex:
    """(1/4 pi) int tr E^2 dx for constant blocks."""
    if field.slopes is not None:
        raise NotImplementedError("field energy is only tabulated for constant blocks")
    if field.kind == "rational":
        return complex(0.5 * np.trace(field.blocks[0] @ field.blocks[0]))
    tr = np.einsum("jab,jba->j", field.blocks, field.blocks)
    return complex((field.lengths * tr).sum() / (4 * math.pi))


@dataclass
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    spins: np.ndarray  # shape (T, m, N, N), m may be 0
    energy: np.ndarray
    casimirs: np.ndarray  # shape (T, blocks, 4): tr B_j^n, n = 1..4
    gap: np.ndarray
    source: str = "exact"
    meta: dict = field(default_factory=dict)

    def state(self, i: int) -> PhaseState:
        return PhaseState(float(self.t[i]), self.q[i].copy(), self.p[i].copy(), list(self.spins[i]))

    def __len__(self):
        return len(self.t)


def casimirs_of(field: BlockField, powers=(1, 2, 3, 4)) -> np.ndarray:
    """tr B^n for every block (piecewise: at the left end of every panel)."""
    out = np.empty((len(field.blocks), len(powers)), dtype=complex)
    for j, B in enumerate(field.blocks):
        M = np.eye(len(B), dtype=complex)
        k = 0
        for n in range(1, max(powers) + 1):
            M = M @ B
            if n in powers:
                out[j, k] = np.trace(M)
                k += 1
    return out


def diagnostics(config: SystemConfig, q, p, spins):
    st = PhaseState(0.0, q, p, list(spins))
    H = hamiltonian(st, config)
    cas = casimirs_of(blocks_from_state(config, q, p, spins))
    return H, cas


def assemble(config, times, qs, ps, spins, gaps, source, meta=None) -> Trajectory:
    n = config.N
    m = len(config.variant.spins0)
    H, C = [], []
    for q, p, s in zip(qs, ps, spins):
        h, c = diagnostics(config, q, p, s)
        H.append(h)
        C.append(c)
    sp = np.array(spins, dtype=complex).reshape(len(times), m, n, n)
    return Trajectory(np.array(times, dtype=float), np.array(qs), np.array(ps), sp,
                      np.array(H), np.array(C), np.array(gaps, dtype=float), source, meta or {})


class _Tracker:
    """Carries the frame forward in time with the a = 0 gauge normalization."""

    def __init__(self, config, field, settings):
        self.config = config
        self.field = field
        self.settings = settings
        self.has_spins = len(config.variant.spins0) > 0
        mono = monodromy_at(0.0, field, settings)
        fr = extract_positions(mono, None, field, settings)
        # at t = 0 the monodromy is diagonal: align V with the identity frame
        V = np.eye(config.N, dtype=complex)
        fr.V = V
        self.frame = fr
        self.mono = mono

    def _natural(self, t, ref: GaugeFrame, left):
        mono = monodromy_at(t, self.field, self.settings)
        fr = extract_positions(mono, ref, self.field, self.settings)
        V = fr.V / np.einsum("ab,ba->a", left, fr.V)[None, :]
        fr.V = V
        return mono, fr

    def _moved_too_far(self, a: GaugeFrame, b: GaugeFrame) -> bool:
        if self.field.kind == "rational":
            lam = a.eigenvalues
            if len(lam) < 2:
                return np.max(np.abs(b.q - a.q)) > 1e6
            d = np.abs(lam[:, None] - lam[None, :]) + np.diag(np.full(len(lam), np.inf))
            return bool(np.max(np.abs(b.eigenvalues - a.eigenvalues)) > 0.25 * d.min())
        return bool(np.max(np.abs(b.log_lambda - a.log_lambda)) > self.settings.max_phase_step)

    def _gauge_rate(self, mono, fr, left):
        V = fr.V
        Vi = _Vinv(V)
        lam = fr.eigenvalues
        Y = Vi @ mono.dS @ V
        n = len(lam)
        den = lam[None, :] - lam[:, None]  # [b, a] -> lam_a - lam_b
        W = np.where(_offdiag(n), Y / np.where(_offdiag(n), den, 1.0), 0.0)
        G = left @ V  # G[a, b] = l_a . v_b
        wdiag = -np.einsum("ab,ba->a", np.where(_offdiag(n), G, 0.0), W)
        if self.field.kind == "rational":
            target = 0.0
        else:
            target = 1j * self.config.g * _kappa(mono, V)
        return target - wdiag

    def step(self, t_b: float, depth=0):
        a = self.frame
        t_a = a.t
        left = _Vinv(a.V)
        mono_b, fr_b = self._natural(t_b, a, left)
        if self._moved_too_far(a, fr_b) or fr_b.ambiguous:
            if depth >= self.settings.max_bisections:
                raise CollisionDetected(f"branch tracking failed near t={t_b:.6g}", t_b)
            mid = 0.5 * (t_a + t_b)
            self.step(mid, depth + 1)
            self.step(t_b, depth + 1)
            return
        if self.has_spins:
            x, w = _GL8
            h = t_b - t_a
            acc = np.zeros(len(a.q), dtype=complex)
            for xi, wi in zip(x, w):
                tau = t_a + 0.5 * h * (xi + 1.0)
                mono, fr = self._natural(tau, a, left)
                acc += 0.5 * h * wi * self._gauge_rate(mono, fr, left)
            fr_b.V = fr_b.V * np.exp(acc)[None, :]
        self.frame = fr_b
        self.mono = mono_b


def track(config: SystemConfig, times, settings: SolverSettings | None = None, field=None):
    """Yield ``(monodromy, frame)`` at each of ``times`` (nondecreasing, >= 0)."""
    settings = settings or SolverSettings()
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise ValueError("output times must be nonnegative and nondecreasing")
    field = field if field is not None else build_initial_field(config)
    tracker = _Tracker(config, field, settings)
    for t in times:
        while tracker.frame.t < t:
            tracker.step(min(t, tracker.frame.t + settings.max_dt))
        yield tracker.mono, tracker.frame


def _real_hyperbolic(config: SystemConfig) -> bool:
    return (isinstance(config.variant, SutherlandHyp)
            and not np.any(np.imag(config.q0)) and not np.any(np.imag(config.p0)))


def _solve_hyperbolic_graded(config: SystemConfig, times, settings: SolverSettings,
                             field: BlockField) -> Trajectory:
    """Real hyperbolic data: S(t, pi) = e^{a t B} E^2 e^{a t B} with a = pi g, E = e^{a Q0}.

    B = E B_+ E^{-1} is Hermitian, so with B = W Lam W* the monodromy is
    W (D G D) W* where D = e^{a t Lam} and G = W* E^2 W.  The eigenvalues
    e^{2 pi g q} spread exponentially in time; forming S explicitly loses the
    small ones, Jacobi on the graded D G D does not.  Momenta follow from
    d(log lambda)/dt = 2 a (V* B V)_aa.
    """
    g = config.g
    a = math.pi * g
    q0 = np.real(config.q0)
    ex = np.exp(a * q0)
    B = ex[:, None] * field.blocks[1] / ex[None, :]
    B = 0.5 * (B + B.conj().T)
    Lam, W = np.linalg.eigh(B)
    G = W.conj().T @ (np.exp(2 * a * q0)[:, None] * W)
    G = 0.5 * (G + G.conj().T)
    rank = np.argsort(q0, kind="stable")
    done_t, qs, ps, gaps = [], [], [], []
    m = len(config.variant.spins0)
    try:
        for t in np.asarray(times, dtype=float):
            arg = a * t * Lam
            if np.max(np.abs(arg)) > 300.0:
                raise linalg.Overflow(f"graded monodromy out of range at t={t:.6g}")
            d = np.exp(arg)
            lam, U = linalg.jacobi_eigh(d[:, None] * G * d[None, :])
            logl = np.log(lam)
            # relative gap of consecutive eigenvalues, in log form
            gap = float(np.min(-np.expm1(logl[:-1] - logl[1:]))) if len(lam) > 1 else math.inf
            if gap < settings.collision_gap:
                raise CollisionDetected(f"eigenvalues of the monodromy merged at t={t:.6g}", t)
            p_sorted = np.einsum("ka,k,ka->a", U.conj(), Lam, U).real
            q = np.empty(config.N)
            p = np.empty(config.N)
            q[rank] = logl / (2 * math.pi * g)
            p[rank] = p_sorted
            done_t.append(t)
            qs.append(q.astype(complex))
            ps.append(p.astype(complex))
            gaps.append(gap)
    except CollisionDetected as exc:
        empty = [np.zeros((m, config.N, config.N))] * len(done_t)
        partial = assemble(config, done_t, qs, ps, empty, gaps, "exact") if done_t else None
        raise CollisionDetected(str(exc), exc.t, partial) from None
    empty = [np.zeros((m, config.N, config.N))] * len(done_t)
    return assemble(config, done_t, qs, ps, empty, gaps, "exact",
                    {"field": field, "method": "graded"})


def solve(config: SystemConfig, output_times, settings: SolverSettings | None = None) -> Trajectory:
    """Exact trajectory sampled at ``output_times`` (nonnegative, nondecreasing).

    Raises CollisionDetected (carrying the partial trajectory) when two
    eigenvalues of the monodromy merge.
    """
    field = build_initial_field(config)
    settings = settings or SolverSettings()
    times = np.asarray(output_times, dtype=float)
    if times.ndim != 1 or len(times) == 0 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise ValueError("output times must be nonnegative and nondecreasing")
    if settings.graded_hyperbolic and _real_hyperbolic(config):
        return _solve_hyperbolic_graded(config, times, settings, field)
    # The reduced phase space determines the field completely except for
    # piecewise charges, whose field leaves the affine ansatz once t > 0.
    every = settings.restart_interval
    if every is None or isinstance(config.variant, (RationalSpin, PiecewiseExp)):
        every = math.inf
    done_t, qs, ps, ss, gaps = [], [], [], [], []
    origin = 0.0
    tracker = _Tracker(config, field, settings)

    def advance(tau):
        while tracker.frame.t < tau:
            tracker.step(min(tau, tracker.frame.t + settings.max_dt))

    def sample():
        mono, fr = tracker.mono, tracker.frame
        return fr.q.copy(), momenta(mono, fr.V), extract_spins(mono, fr, tracker.field, config)

    try:
        for t in times:
            while t - origin > every * (1 + 1e-12):
                # the field is rebuilt from the state, the exponentials stay
                # bounded and the spread of |lambda| sits in the diagonal edges
                advance(every)
                q, p, sp = sample()
                tracker = _Tracker(config, blocks_from_state(config, q, p, sp), settings)
                origin += every
            advance(t - origin)
            q, p, sp = sample()
            done_t.append(t)
            qs.append(q)
            ps.append(p)
            ss.append(sp)
            gaps.append(tracker.frame.gap)
    except (CollisionDetected, CollisionAtStart) as exc:
        partial = assemble(config, done_t, qs, ps, ss, gaps, "exact") if done_t else None
        t_hit = getattr(exc, "t", None)
        t_hit = origin if t_hit is None else origin + t_hit
        msg = str(exc) if origin == 0 else f"collision near t={t_hit:.6g} ({exc}, local time)"
        raise CollisionDetected(msg, t_hit, partial) from None
    return assemble(config, done_t, qs, ps, ss, gaps, "exact", {"field": field})
