"""System variants, configurations and Hamiltonians.

Five charge structures are supported:

``RationalSpin``   spin Calogero model with 1/r^2 couplings S^{ab} S^{ba}
``SutherlandTrig`` (pi g)^2 e^2 / sin^2 pair potential
``SutherlandHyp``  (pi g)^2 e^2 / sinh^2 pair potential
``DeltaSites``     point charges rho_j at fixed sites x_j on the circle
``PiecewiseExp``   charges spread over panels [x_{j-1}, x_j] with weights s_j

Every spin-carrying Hamiltonian has the shape

    H = 1/2 sum p^2 + 1/2 sum_{a,b} sum_{j,k} K_jk[a,b] X_k^{ab} X_j^{ba}

where ``K_jk[a,b]`` depends on q^a - q^b off the diagonal and is constant on
it.  ``pair_tables`` returns K and dK/dr for a configuration and the rest of
the module is written once against that form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import kernels
from .kernels import PoleAtInteger, reduce_2pi

__all__ = [
    "ConfigError",
    "CollisionSingularity",
    "RationalSpin",
    "SutherlandTrig",
    "SutherlandHyp",
    "DeltaSites",
    "PiecewiseExp",
    "SystemConfig",
    "PhaseState",
    "PotentialTables",
    "potential_tables",
    "pair_tables",
    "site_pair_tables",
    "site_tables",
    "spin_coupling",
    "bracket_scale",
    "hamiltonian",
    "grad_q_hamiltonian",
    "grad_spin_hamiltonian",
    "initial_state",
]

CONSTRAINT_TOL = 1e-12
REGULARITY_TOL = 1e-8


class ConfigError(ValueError):
    pass


class CollisionSingularity(ArithmeticError):
    pass


def _cmat(a, name) -> np.ndarray:
    m = np.array(a, dtype=complex)
    if not np.all(np.isfinite(m)):
        raise ConfigError(f"{name} has non-finite entries")
    return m


@dataclass(frozen=True)
class RationalSpin:
    """1/r^2 spin model.  ``frozen=True`` selects the residual gauge that keeps
    S = e (1 - delta) fixed; it requires all off-diagonal S0 entries equal."""

    S0: np.ndarray
    frozen: bool = False
    kind = "rational"

    def __post_init__(self):
        s = _cmat(self.S0, "S0")
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ConfigError("S0 must be square")
        if np.any(np.diag(s) != 0):
            raise ConfigError("S0 must have an exactly zero diagonal")
        if self.frozen:
            off = s[~np.eye(len(s), dtype=bool)]
            if off.size and np.ptp(off.real) + np.ptp(off.imag) > 0:
                raise ConfigError("frozen preset needs identical off-diagonal S0 entries")
        object.__setattr__(self, "S0", s)

    @property
    def spins0(self):
        return [self.S0]


@dataclass(frozen=True)
class SutherlandTrig:
    e: float
    kind = "trig"

    def __post_init__(self):
        if not math.isfinite(self.e):
            raise ConfigError("e must be finite")
        object.__setattr__(self, "e", float(self.e))

    @property
    def spins0(self):
        return []


@dataclass(frozen=True)
class SutherlandHyp:
    e: float
    kind = "hyp"

    def __post_init__(self):
        if not math.isfinite(self.e):
            raise ConfigError("e must be finite")
        object.__setattr__(self, "e", float(self.e))

    @property
    def spins0(self):
        return []


@dataclass(frozen=True)
class DeltaSites:
    sites: tuple
    rho0: np.ndarray  # shape (m, N, N)
    kind = "delta"

    def __post_init__(self):
        x = tuple(float(v) for v in self.sites)
        rho = _cmat(self.rho0, "rho0")
        if rho.ndim != 3 or rho.shape[0] != len(x) or rho.shape[1] != rho.shape[2]:
            raise ConfigError("rho0 must have shape (m, N, N) matching the sites")
        if not x:
            raise ConfigError("at least one site is required")
        if any(not (-math.pi < v < math.pi) for v in x):
            raise ConfigError("sites must lie in (-pi, pi)")
        if any(b <= a for a, b in zip(x, x[1:])):
            raise ConfigError("sites must be strictly increasing")
        diag = np.einsum("jaa->a", rho)
        if np.max(np.abs(diag)) > CONSTRAINT_TOL * max(1.0, np.abs(rho).max()):
            raise ConfigError("diagonal charges must sum to zero over the sites")
        object.__setattr__(self, "sites", x)
        object.__setattr__(self, "rho0", rho)

    @property
    def spins0(self):
        return list(self.rho0)


@dataclass(frozen=True)
class PiecewiseExp:
    breakpoints: tuple
    s0: np.ndarray  # shape (m, N, N)
    kind = "piecewise"

    def __post_init__(self):
        b = tuple(float(v) for v in self.breakpoints)
        s = _cmat(self.s0, "s0")
        if len(b) < 2 or b[0] != -math.pi or b[-1] != math.pi:
            raise ConfigError("breakpoints must start at -pi and end at pi")
        if any(v <= u for u, v in zip(b, b[1:])):
            raise ConfigError("breakpoints must be strictly increasing")
        if s.ndim != 3 or s.shape[0] != len(b) - 1 or s.shape[1] != s.shape[2]:
            raise ConfigError("s0 must have shape (m, N, N) with m panels")
        diag = np.einsum("jaa->a", s)
        if np.max(np.abs(diag)) > CONSTRAINT_TOL * max(1.0, np.abs(s).max()):
            raise ConfigError("diagonal panel weights must sum to zero")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "s0", s)
        # panel moments are r-independent, compute them once
        m = len(b) - 1
        mom = np.array([[kernels.panel_moments(b[j], b[j + 1], b[k], b[k + 1])
                         for k in range(m)] for j in range(m)])
        object.__setattr__(self, "_moments", mom)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def spins0(self):
        return list(self.s0)


ChargeAnsatz = Union[RationalSpin, SutherlandTrig, SutherlandHyp, DeltaSites, PiecewiseExp]


@dataclass(frozen=True)
class SystemConfig:
    variant: ChargeAnsatz
    g: float
    q0: np.ndarray
    p0: np.ndarray
    t_max: float = 1.0
    real: bool = False  # reject complex data when set

    def __post_init__(self):
        q = np.atleast_1d(_cmat(self.q0, "q0"))
        p = np.atleast_1d(_cmat(self.p0, "p0"))
        if q.ndim != 1 or q.shape != p.shape or len(q) < 1:
            raise ConfigError("q0 and p0 must be equal-length vectors")
        if not (math.isfinite(self.g) and self.g != 0):
            raise ConfigError("g must be finite and nonzero")
        if not (math.isfinite(self.t_max) and self.t_max > 0):
            raise ConfigError("t_max must be positive")
        n = len(q)
        for s in self.variant.spins0:
            if s.shape != (n, n):
                raise ConfigError(f"spin matrices must be {n}x{n}")
        if self.real:
            bad = [np.any(q.imag != 0), np.any(p.imag != 0)]
            bad += [np.any(np.asarray(s).imag != 0) for s in self.variant.spins0]
            if any(bad):
                raise ConfigError("real configuration carries complex data")
        object.__setattr__(self, "q0", q)
        object.__setattr__(self, "p0", p)
        object.__setattr__(self, "g", float(self.g))
        object.__setattr__(self, "t_max", float(self.t_max))
        if n > 1 and np.min(_relative_separation(self.variant.kind, self.g, q)) < REGULARITY_TOL:
            raise ConfigError("initial positions coincide (irregular monodromy)")

    @property
    def N(self) -> int:
        return len(self.q0)


def _relative_separation(kind, g, q):
    """Pairwise |lam_a - lam_b| / max(|lam_a|, |lam_b|) for the monodromy eigenvalues.

    Written through exponent differences so that far-apart hyperbolic
    positions do not overflow.  The diagonal is +inf.
    """
    q = np.asarray(q, dtype=complex)
    n = len(q)
    r = q[:, None] - q[None, :]
    if kind == "rational":
        scale = np.maximum(np.abs(q)[:, None], np.abs(q)[None, :])
        out = np.abs(r) / np.where(scale > 0, scale, 1.0)
    else:
        z = (2.0 * math.pi * g if kind == "hyp" else -2j * math.pi * g) * r
        z = np.where(z.real >= 0, z, -z)  # the larger eigenvalue in front
        out = np.abs(np.expm1(-z))
    return out + np.diag(np.full(n, np.inf))


@dataclass
class PhaseState:
    t: float
    q: np.ndarray
    p: np.ndarray
    spins: list = field(default_factory=list)

    def copy(self) -> "PhaseState":
        return PhaseState(self.t, self.q.copy(), self.p.copy(), [s.copy() for s in self.spins])


def initial_state(config: SystemConfig) -> PhaseState:
    return PhaseState(0.0, config.q0.copy(), config.p0.copy(),
                      [np.array(s, dtype=complex) for s in config.variant.spins0])


@dataclass(frozen=True)
class PotentialTables:
    """Site data that does not depend on the particle positions."""

    x: np.ndarray  # reduced site differences, shape (m, m)
    diag: np.ndarray  # c_jk or d_jk
    moments: np.ndarray | None = None  # panel moments for piecewise charges


def potential_tables(variant) -> PotentialTables:
    if isinstance(variant, DeltaSites):
        return site_tables(variant.sites)
    if isinstance(variant, PiecewiseExp):
        mom = variant._moments
        m = mom.shape[0]
        d = np.array([[kernels.d_from_moments(mom[j, k]) for k in range(m)] for j in range(m)])
        c = 0.5 * (np.array(variant.breakpoints[1:]) + np.array(variant.breakpoints[:-1]))
        return PotentialTables(reduce_2pi(c[:, None] - c[None, :]), d, mom)
    raise TypeError(f"no site tables for {type(variant).__name__}")


def _differences(q):
    return q[:, None] - q[None, :]


def _check_pole(z, what="pair"):
    n = len(z)
    off = ~np.eye(n, dtype=bool)
    d = np.abs(z - np.round(z.real))[off]
    if d.size and d.min() < kernels.POLE_GUARD:
        raise CollisionSingularity(f"{what} separation at a kernel pole")


def pair_tables(variant, g: float, q, tables: PotentialTables | None = None):
    """Return ``(K, dK)`` of shape (N, N, m, m) for the spin-carrying variants.

    ``K[a, b, j, k]`` multiplies ``X_k^{ab} X_j^{ba}``; ``dK`` is its derivative
    with respect to ``r = q^a - q^b`` (zero on the diagonal).
    """
    q = np.asarray(q, dtype=complex)
    n = len(q)
    r = _differences(q)
    off = ~np.eye(n, dtype=bool)
    if isinstance(variant, RationalSpin):
        if n > 1 and np.min(np.abs(r[off])) < kernels.POLE_GUARD:
            raise CollisionSingularity("particles coincide")
        rs = np.where(off, r, 1.0)
        K = np.where(off, 1.0 / rs ** 2, 0.0)[:, :, None, None]
        dK = np.where(off, -2.0 / rs ** 3, 0.0)[:, :, None, None]
        return K.astype(complex), dK.astype(complex)
    if tables is None:
        tables = potential_tables(variant)
    _check_pole(g * r)
    m = tables.diag.shape[0]
    K = np.empty((n, n, m, m), dtype=complex)
    dK = np.zeros((n, n, m, m), dtype=complex)
    ia, ib = np.nonzero(off)
    if isinstance(variant, DeltaSites):
        return site_pair_tables(g, q, tables)
    if isinstance(variant, PiecewiseExp):
        rr = r[ia, ib]
        for j in range(m):
            for k in range(m):
                K[ia, ib, j, k] = kernels.w_from_moments(tables.moments[j, k], rr, g)
                dK[ia, ib, j, k] = kernels.dw_from_moments(tables.moments[j, k], rr, g)
    else:
        raise TypeError(f"{type(variant).__name__} carries no spins")
    idx = np.arange(n)
    K[idx, idx] = tables.diag
    return K, dK


def site_pair_tables(g: float, q, tables: PotentialTables):
    """``pair_tables`` for point charges at arbitrary (possibly repeated) sites."""
    q = np.asarray(q, dtype=complex)
    n = len(q)
    r = _differences(q)
    _check_pole(g * r)
    m = tables.diag.shape[0]
    K = np.empty((n, n, m, m), dtype=complex)
    dK = np.zeros((n, n, m, m), dtype=complex)
    ia, ib = np.nonzero(~np.eye(n, dtype=bool))
    rr = r[ia, ib][:, None, None]
    K[ia, ib] = kernels.potential_vjk(rr, tables.x[None], g)
    dK[ia, ib] = kernels.dpotential_vjk(rr, tables.x[None], g)
    idx = np.arange(n)
    K[idx, idx] = tables.diag
    return K, dK


def site_tables(sites) -> PotentialTables:
    x = np.asarray(sites, dtype=float)
    xjk = reduce_2pi(x[:, None] - x[None, :])
    return PotentialTables(xjk, kernels.coeff_cjk(xjk))


def spin_coupling(K, spins) -> np.ndarray:
    """``G_j[a, b] = 1/2 sum_k (K[a,b,j,k] + K[b,a,k,j]) X_k[a, b]``.

    ``G_j`` is the transpose of dH/dX_j, the matrix that generates the spin flow.
    """
    X = np.asarray(spins)
    Ks = 0.5 * (K + np.transpose(K, (1, 0, 3, 2)))
    return np.einsum("abjk,kab->jab", Ks, X)


def bracket_scale(variant, g: float) -> float:
    """Structure constant of the spin bracket {X^{ab}, X^{a'b'}}."""
    if isinstance(variant, RationalSpin):
        return 1.0
    return 2.0 * math.pi * g


def _sutherland_pair(kind, g, q, e):
    r = _differences(q)
    n = len(q)
    off = ~np.eye(n, dtype=bool)
    a = math.pi * g
    if kind == "trig":
        _check_pole(g * r)
        sn = np.sin(a * np.where(off, r, 0.5 / g))
        V = np.where(off, (e * a) ** 2 / sn ** 2, 0.0)
        dV = np.where(off, -2.0 * (e * a) ** 2 * a * np.cos(a * r) / sn ** 3, 0.0)
    else:
        if n > 1 and np.min(np.abs(r[off])) < kernels.POLE_GUARD / abs(g):
            raise CollisionSingularity("particles coincide")
        x = a * np.where(off, r, 1.0 / g)
        # csch and coth through exp(-|x|) so far-apart pairs underflow instead of overflowing
        sgn = np.where(x.real >= 0, 1.0, -1.0)
        em = np.exp(-sgn * x)
        den = -np.expm1(-2.0 * sgn * x)
        csch = sgn * 2.0 * em / den
        coth = sgn * (1.0 + em * em) / den
        V = np.where(off, (e * a) ** 2 * csch ** 2, 0.0)
        dV = np.where(off, -2.0 * (e * a) ** 2 * a * csch ** 2 * coth, 0.0)
    return V, dV


def hamiltonian(state: PhaseState, config: SystemConfig) -> complex:
    v = config.variant
    p = np.asarray(state.p, dtype=complex)
    kin = 0.5 * np.sum(p * p)
    if isinstance(v, (SutherlandTrig, SutherlandHyp)):
        V, _ = _sutherland_pair(v.kind, config.g, np.asarray(state.q, dtype=complex), v.e)
        return complex(kin + 0.5 * V.sum())
    K, _ = pair_tables(v, config.g, state.q)
    X = np.asarray(state.spins)
    return complex(kin + 0.5 * np.einsum("abjk,kab,jba->", K, X, X))


def grad_q_hamiltonian(state: PhaseState, config: SystemConfig) -> np.ndarray:
    v = config.variant
    q = np.asarray(state.q, dtype=complex)
    if isinstance(v, (SutherlandTrig, SutherlandHyp)):
        _, dV = _sutherland_pair(v.kind, config.g, q, v.e)
        # V is symmetric in (a, b) so both index slots contribute equally
        return 0.5 * (dV.sum(axis=1) - dV.sum(axis=0))
    _, dK = pair_tables(v, config.g, q)
    X = np.asarray(state.spins)
    T = np.einsum("abjk,kab,jba->ab", dK, X, X)
    return 0.5 * (T.sum(axis=1) - T.sum(axis=0))


def grad_spin_hamiltonian(state: PhaseState, config: SystemConfig) -> np.ndarray:
    """dH/dX_j as an array of shape (m, N, N) (entry [j, b, a] is dH/dX_j^{ba})."""
    v = config.variant
    if isinstance(v, (SutherlandTrig, SutherlandHyp)):
        return np.zeros((0, config.N, config.N), dtype=complex)
    K, _ = pair_tables(v, config.g, state.q)
    return np.transpose(spin_coupling(K, state.spins), (0, 2, 1))
