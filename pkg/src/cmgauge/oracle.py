"""Direct integration of the equations of motion.

This is the independent reference for the exact solver.  It never touches
matrix exponentials of the gauge field: it integrates Hamilton's equations

    dq/dt = p,   dp/dt = -dH/dq,   dX_j/dt = -i beta [G_j, X_j]

where ``G_j`` is the transpose of dH/dX_j and ``beta`` the structure constant
of the spin bracket (1 for the rational model, 2 pi g for charges on the
circle).  For point charges this is the covariant conservation law
dX_j/dt = -i g [A0(x_j), X_j] with the Coulomb potential A0 written through
the closed-form lattice sums.

Spread-out charges are handled by ``integrate_field``, which discretizes the
charge density into point charges on a trapezoid grid and extrapolates in
the grid spacing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from . import kernels
from .exact import Trajectory, assemble
from .models import (
    CollisionSingularity,
    PhaseState,
    PiecewiseExp,
    RationalSpin,
    SutherlandHyp,
    SutherlandTrig,
    SystemConfig,
    bracket_scale,
    grad_q_hamiltonian,
    hamiltonian,
    initial_state,
    pair_tables,
    potential_tables,
    site_pair_tables,
    site_tables,
    spin_coupling,
)

__all__ = [
    "IntegratorSettings",
    "StepLimitExceeded",
    "rhs",
    "integrate",
    "integrate_field",
    "pack",
    "unpack",
    "poisson_bracket",
    "coulomb_potential",
]


class StepLimitExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorSettings:
    method: str = "RK45"  # "RK4" (fixed step), "RK45", "DOP853"
    step: float = 1e-3
    rtol: float = 1e-10
    atol: float = 1e-12
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.method not in ("RK4", "RK45", "DOP853"):
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.step > 0 and self.rtol > 0 and self.atol > 0):
            raise ValueError("step and tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


def pack(state: PhaseState) -> np.ndarray:
    parts = [np.asarray(state.q, complex), np.asarray(state.p, complex)]
    parts += [np.asarray(s, complex).ravel() for s in state.spins]
    return np.concatenate(parts)


def unpack(y: np.ndarray, n: int, m: int, t: float = 0.0) -> PhaseState:
    q = y[:n]
    p = y[n:2 * n]
    spins = list(y[2 * n:].reshape(m, n, n)) if m else []
    return PhaseState(t, q.copy(), p.copy(), [s.copy() for s in spins])


def _frozen_shift(q, e):
    n = len(q)
    r = q[:, None] - q[None, :]
    off = ~np.eye(n, dtype=bool)
    return -e * np.where(off, 1.0 / np.where(off, r, 1.0) ** 2, 0.0).sum(axis=1)


class _Rhs:
    """Callable right-hand side with the position-independent tables cached."""

    def __init__(self, config: SystemConfig, site_data=None):
        self.config = config
        v = config.variant
        self.n = config.N
        self.tables = None
        self.site_data = site_data
        if site_data is not None:
            self.tables = site_tables(site_data)
            self.m = len(site_data)
        else:
            self.m = len(v.spins0)
            if not isinstance(v, (RationalSpin, SutherlandTrig, SutherlandHyp)):
                self.tables = potential_tables(v)
        self.beta = bracket_scale(v, config.g)
        self.frozen = isinstance(v, RationalSpin) and v.frozen
        if self.frozen:
            off = v.S0[~np.eye(self.n, dtype=bool)]
            self.e = off[0] if off.size else 0.0

    def __call__(self, t, y):
        n, m = self.n, self.m
        q = y[:n]
        p = y[n:2 * n]
        out = np.empty_like(y)
        out[:n] = p
        if m == 0:
            st = PhaseState(t, q, p, [])
            out[n:2 * n] = -grad_q_hamiltonian(st, self.config)
            return out
        X = y[2 * n:].reshape(m, n, n)
        if self.site_data is not None:
            K, dK = site_pair_tables(self.config.g, q, self.tables)
        else:
            K, dK = pair_tables(self.config.variant, self.config.g, q, self.tables)
        T = np.einsum("abjk,kab,jba->ab", dK, X, X)
        out[n:2 * n] = -0.5 * (T.sum(axis=1) - T.sum(axis=0))
        G = spin_coupling(K, X)
        if self.frozen:
            G = G + np.diag(_frozen_shift(q, self.e))[None]
        out[2 * n:] = (-1j * self.beta * (G @ X - X @ G)).ravel()
        return out


def rhs(state: PhaseState, config: SystemConfig) -> PhaseState:
    """Time derivative of ``state`` as a PhaseState of rates."""
    f = _Rhs(config)
    d = f(state.t, pack(state))
    return unpack(d, config.N, f.m, state.t)


def coulomb_potential(config: SystemConfig, state: PhaseState, x) -> np.ndarray:
    """A0(t, x) in the diagonal Coulomb gauge with a(t) = 0, for point charges.

    Off the diagonal it is (1/2pi) sum_k rho_k F(g q_ab, x - x_k), on the
    diagonal (1/2pi) sum_k rho_k h(x - x_k), with F and h the lattice sums.
    """
    v = config.variant
    g = config.g
    q = np.asarray(state.q, complex)
    n = len(q)
    r = q[:, None] - q[None, :]
    off = ~np.eye(n, dtype=bool)
    A = np.zeros((n, n), dtype=complex)
    for xk, rho in zip(v.sites, state.spins):
        F = kernels.kernel_id(g * np.where(off, r, 0.5 / g), x - xk)
        A += np.where(off, F * rho, 0.0)
        A += np.diag(kernels.kernel_id1(x - xk) * np.diag(rho))
    return A / (2 * math.pi)


def _rk4(f, t_eval, y0, h, max_steps):
    ys = [y0.copy()]
    y = y0.copy()
    t = float(t_eval[0])
    steps = 0
    for tb in t_eval[1:]:
        nsteps = max(1, int(math.ceil((tb - t) / h - 1e-9)))
        dt = (tb - t) / nsteps
        for _ in range(nsteps):
            k1 = f(t, y)
            k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
            k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
            k4 = f(t + dt, y + dt * k3)
            y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
            steps += 1
            if steps > max_steps:
                raise StepLimitExceeded(f"more than {max_steps} steps")
        t = float(tb)
        ys.append(y.copy())
    return np.array(ys)


def _run(f, y0, times, settings: IntegratorSettings):
    times = np.asarray(times, dtype=float)
    t0 = 0.0
    t_all = np.concatenate([[t0], times]) if times[0] != t0 else times
    if settings.method == "RK4":
        ys = _rk4(f, t_all, y0, settings.step, settings.max_steps)
    else:
        if len(t_all) == 1:
            ys = y0[None]
        else:
            sol = solve_ivp(f, (t_all[0], t_all[-1]), y0, method=settings.method, t_eval=t_all,
                            rtol=settings.rtol, atol=settings.atol)
            if sol.status != 0:
                raise StepLimitExceeded(sol.message)
            ys = sol.y.T
    if times[0] != t0:
        ys = ys[1:]
    return ys


def integrate(config: SystemConfig, settings: IntegratorSettings | None = None,
              output_times=None) -> Trajectory:
    """Integrate from t = 0 and sample at ``output_times``.

    Negative output times integrate backwards (they must then be
    nonincreasing).
    """
    settings = settings or IntegratorSettings()
    if output_times is None:
        output_times = np.linspace(0.0, config.t_max, 11)
    times = np.asarray(output_times, dtype=float)
    f = _Rhs(config)
    y0 = pack(initial_state(config))
    try:
        ys = _run(f, y0, times, settings)
    except CollisionSingularity as exc:
        raise CollisionSingularity(f"{exc} during integration") from exc
    n, m = config.N, f.m
    qs = [y[:n] for y in ys]
    ps = [y[n:2 * n] for y in ys]
    ss = [list(y[2 * n:].reshape(m, n, n)) for y in ys]
    return assemble(config, times, qs, ps, ss, [np.nan] * len(times), "oracle",
                    {"method": settings.method})


# ---------------------------------------------------------------------------
# spread-out charges

def _grid(breakpoints, panels_per_unit: int):
    """Trapezoid grid per panel with both panel ends included."""
    xs, ws, owner = [], [], []
    b = np.asarray(breakpoints)
    for j in range(len(b) - 1):
        k = max(2, int(round(panels_per_unit * (b[j + 1] - b[j]))))
        x = np.linspace(b[j], b[j + 1], k + 1)
        w = np.full(k + 1, (b[j + 1] - b[j]) / k)
        w[[0, -1]] *= 0.5
        xs.append(x)
        ws.append(w)
        owner.append(np.full(k + 1, j))
    return np.concatenate(xs), np.concatenate(ws), np.concatenate(owner)


def _field_level(config: SystemConfig, times, settings, per_unit):
    v: PiecewiseExp = config.variant
    g = config.g
    x, w, owner = _grid(v.breakpoints, per_unit)
    q0 = config.q0
    r0 = q0[:, None] - q0[None, :]
    D = np.diff(v.breakpoints)
    rho = np.array([w[i] * np.exp(-1j * g * r0 * x[i]) * v.s0[owner[i]] / D[owner[i]]
                    for i in range(len(x))])
    f = _Rhs(replace(config), site_data=x)
    f.beta = 2 * math.pi * g
    y0 = np.concatenate([q0, config.p0, rho.ravel()])
    ys = _run(f, y0, times, settings)
    n = config.N
    out_q, out_p, out_s = [], [], []
    for y in ys:
        q = y[:n]
        R = y[2 * n:].reshape(len(x), n, n)
        r = q[:, None] - q[None, :]
        ph = np.exp(1j * g * r[None] * x[:, None, None])
        s = np.zeros((len(D), n, n), dtype=complex)
        np.add.at(s, owner, ph * R)
        out_q.append(q)
        out_p.append(y[n:2 * n])
        out_s.append(s)
    return np.array(out_q), np.array(out_p), np.array(out_s)


def integrate_field(config: SystemConfig, settings: IntegratorSettings | None = None,
                    output_times=None, per_unit: int = 4, levels: int = 3) -> Trajectory:
    """Reference trajectory for ``PiecewiseExp`` charges from the field equations.

    The charge density is replaced by point charges on a trapezoid grid with
    ``per_unit * 2**k`` intervals per unit length (k < levels); each level is
    integrated as a point-charge system and the results are Richardson
    extrapolated in h^2.  Panel weights are recovered as
    s_j = sum_i e^{i g (q^a - q^b) x_i} rho_i over the panel's nodes.
    """
    if not isinstance(config.variant, PiecewiseExp):
        raise TypeError("integrate_field needs piecewise charges")
    settings = settings or IntegratorSettings()
    if output_times is None:
        output_times = np.linspace(0.0, config.t_max, 11)
    times = np.asarray(output_times, dtype=float)
    table = [_field_level(config, times, settings, per_unit * 2 ** k) for k in range(levels)]
    # Richardson tableau in h^2
    for col in range(1, levels):
        fac = 4.0 ** col
        table = [tuple((fac * b - a) / (fac - 1) for a, b in zip(table[i], table[i + 1]))
                 for i in range(len(table) - 1)]
    q, p, s = table[0]
    return assemble(config, times, list(q), list(p), [list(x) for x in s],
                    [np.nan] * len(times), "field-oracle",
                    {"method": settings.method, "levels": levels, "per_unit": per_unit})


# ---------------------------------------------------------------------------
# Poisson brackets, evaluated numerically

def poisson_bracket(F, G, state: PhaseState, config: SystemConfig, h: float = 1e-6) -> complex:
    """{F, G} at ``state`` for scalar functions of a PhaseState.

    Gradients are central differences.  The canonical part is
    dF/dq dG/dp - dF/dp dG/dq, the spin part uses the Lie-Poisson structure
    {X^{ab}, X^{cd}} = i beta (delta^{bc} X^{ad} - delta^{da} X^{cb}) with the
    sign chosen so that dF/dt = {F, H} along ``rhs``.
    """
    n = config.N
    beta = bracket_scale(config.variant, config.g)
    y0 = pack(state)
    m = len(state.spins)

    def grad(fun):
        out = np.empty(len(y0), dtype=complex)
        for i in range(len(y0)):
            e = np.zeros(len(y0), dtype=complex)
            e[i] = h
            fp = fun(unpack(y0 + e, n, m, state.t))
            fm = fun(unpack(y0 - e, n, m, state.t))
            out[i] = (fp - fm) / (2 * h)
        return out

    dF, dG = grad(F), grad(G)
    val = np.sum(dF[:n] * dG[n:2 * n] - dF[n:2 * n] * dG[:n])
    for j in range(m):
        sl = slice(2 * n + j * n * n, 2 * n + (j + 1) * n * n)
        A = dF[sl].reshape(n, n)  # A[a, b] = dF/dX^{ab}
        B = dG[sl].reshape(n, n)
        X = state.spins[j]
        # sum_{ab,cd} A_ab B_cd i beta (delta_bc X_ad - delta_da X_cb)
        val += 1j * beta * (np.einsum("ab,bd,ad->", A, B, X) - np.einsum("ab,ca,cb->", A, B, X))
    return complex(val)
