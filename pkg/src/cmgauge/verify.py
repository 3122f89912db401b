"""Falsifiable checks: identities, Lax equations, conservation laws, Gauss's
law, gauge periodicity and exact-versus-integrator agreement.

Every check returns a ``VerificationReport``.  Reports are deterministic
functions of their inputs; only ``runtime`` varies between runs and it is left
out of ``as_record``.
"""
from __future__ import annotations

import functools
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import kernels
from .configio import ConfigFormatError, system_from_dict
from .exact import (
    SolverSettings,
    blocks_from_state,
    build_initial_field,
    coefficient,
    gauge_transform,
    monodromy_at,
    solve,
    track,
)
from .linalg import eig_general, expm
from .models import (
    DeltaSites,
    PhaseState,
    PiecewiseExp,
    RationalSpin,
    SutherlandHyp,
    SutherlandTrig,
    SystemConfig,
    grad_q_hamiltonian,
    hamiltonian,
)
from .oracle import IntegratorSettings, coulomb_potential, integrate, integrate_field

__all__ = [
    "VerificationReport",
    "check_identities",
    "check_lax",
    "check_conservation",
    "compare_exact_vs_oracle",
    "compare_trajectories",
    "reference_trajectory",
    "check_gauss",
    "check_gauge_periodicity",
    "check_decoupling",
    "check_sutherland_equivalence",
    "check_duality",
    "check_no_collision",
    "check_gradients",
    "check_rk4_order",
    "gauge_invariants",
    "load_corpus",
    "random_config",
    "SUITES",
    "run_suite",
]


@dataclass
class VerificationReport:
    """Outcome of one check.

    ``thresholds`` are upper bounds on residuals, ``minimums`` lower bounds on
    measured quantities such as convergence orders or gap margins.
    """

    name: str
    instance: str
    residuals: dict
    thresholds: dict
    passed: bool = False
    runtime: float = 0.0
    detail: str = ""
    minimums: dict = field(default_factory=dict)

    def __post_init__(self):
        upper = all(np.isfinite(self.residuals[k]) and self.residuals[k] <= self.thresholds[k]
                    for k in self.thresholds)
        lower = all(not np.isnan(self.residuals[k]) and self.residuals[k] >= self.minimums[k]
                    for k in self.minimums)
        self.passed = bool(upper and lower)

    def _ratio(self, k) -> float:
        r = self.residuals[k]
        if np.isnan(r):
            return math.inf
        if k in self.minimums:
            b = self.minimums[k]
            if r <= 0:
                return math.inf if b > 0 else 0.0
            return b / r
        t = self.thresholds[k]
        if t > 0:
            return r / t
        return math.inf if r > 0 else 0.0

    @property
    def worst(self) -> tuple[str, float]:
        keys = list(self.thresholds) + list(self.minimums)
        k = max(keys, key=self._ratio)
        return k, self.residuals[k]

    def as_record(self) -> dict:
        def num(v):
            v = float(v)
            return v if math.isfinite(v) else str(v)

        return {
            "check": self.name,
            "instance": self.instance,
            "passed": bool(self.passed),
            "residuals": {k: num(v) for k, v in sorted(self.residuals.items())},
            "thresholds": {k: num(v) for k, v in sorted(self.thresholds.items())},
            "minimums": {k: num(v) for k, v in sorted(self.minimums.items())},
            "detail": self.detail,
        }

    def line(self) -> str:
        k, v = self.worst
        tag = "PASS" if self.passed else "FAIL"
        if k in self.minimums:
            bound = f">= {self.minimums[k]:.3g}"
        else:
            bound = f"<= {self.thresholds[k]:.1e}"
        return f"{tag} {self.name} [{self.instance}] worst {k}={v:.3e} ({bound})"


def _timed(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        rep = fn(*args, **kwargs)
        rep.runtime = time.perf_counter() - t0
        return rep

    return wrapper


# ---------------------------------------------------------------------------
# identities

@_timed
def check_identities(samples: int = 100, seed: int = 0, tol: float = 1e-6,
                     nmax: int = kernels.SERIES_TERMS) -> VerificationReport:
    """Closed-form lattice sums against truncated series with integral tails."""
    rng = np.random.default_rng(seed)
    worst = {"id0": (0.0, None), "id": (0.0, None), "id1": (0.0, None)}

    def bump(key, val, where):
        if val > worst[key][0] or not np.isfinite(val):
            worst[key] = (val, where)

    for _ in range(samples):
        r = complex(rng.uniform(-2.0, 2.0), rng.uniform(-0.5, 0.5))
        if abs(r - round(r.real)) < 0.05:
            r += 0.1
        s = float(rng.uniform(-3 * math.pi, 3 * math.pi))
        bump("id0", abs(kernels.kernel_id0(r) - kernels.series_id0(r, nmax)), (r,))
        bump("id", abs(kernels.kernel_id(r, s) - kernels.series_id(r, s, nmax)), (r, s))
        bump("id1", abs(kernels.kernel_id1(s) - kernels.series_id1(s, nmax)), (s,))
    res = {k: v[0] for k, v in worst.items()}
    detail = "; ".join(f"{k} worst at {tuple(np.round(v[1], 6).tolist())}" for k, v in worst.items()
                       if v[1] is not None)
    return VerificationReport("identities", f"{samples} samples seed {seed}", res,
                              {k: tol for k in res}, detail=detail)


# ---------------------------------------------------------------------------
# Lax equations

def electric_dcg(config: SystemConfig, state: PhaseState, x: float) -> np.ndarray:
    """E(t, x) in the diagonal Coulomb gauge rebuilt from a phase-space point."""
    if isinstance(config.variant, SutherlandTrig):
        cfg = _sutherland_as_sites(config)
        state = PhaseState(state.t, state.q, state.p, list(cfg.variant.rho0))
        config = cfg
    fld = blocks_from_state(config, state.q, state.p, state.spins)
    return fld.electric(x)


def _sutherland_as_sites(config: SystemConfig) -> SystemConfig:
    n = config.N
    rho = 2 * math.pi * config.g * config.variant.e * (1.0 - np.eye(n))
    return SystemConfig(DeltaSites((0.0,), rho[None]), config.g, config.q0, config.p0,
                        config.t_max)


def coulomb_dcg(config: SystemConfig, state: PhaseState, x: float) -> np.ndarray:
    """A0(t, x) matching the gauge of the exact solver's spins.

    Point charges use a(t) = 0.  For the Sutherland model the spins are frozen,
    which fixes the diagonal of A0 so that A0 at the charge commutes with it.
    """
    v = config.variant
    if isinstance(v, DeltaSites):
        return coulomb_potential(config, state, x)
    if isinstance(v, SutherlandTrig):
        cfg = _sutherland_as_sites(config)
        st = PhaseState(state.t, state.q, state.p, list(cfg.variant.rho0))
        A = coulomb_potential(cfg, st, x)
        A0 = coulomb_potential(cfg, st, 0.0)
        off = ~np.eye(config.N, dtype=bool)
        return A + np.diag(-np.where(off, A0, 0.0).sum(axis=1))
    raise TypeError("Lax checks are implemented for Sutherland and point-charge systems")


@_timed
def check_lax(config: SystemConfig, t0: float = 0.5, x_samples=None, h: float = 0.1,
              halvings: int = 2, min_order: float = 1.9, solver=None) -> VerificationReport:
    """Central-difference residual of dE/dt + i g [A0, E] = 0 along a trajectory.

    The residual is measured at step sizes h, h/2, ... and the observed order
    log2(r(h)/r(h/2)) must be at least ``min_order`` at every x.  A residual
    already at roundoff (below 1e-11) counts as exact.
    """
    if x_samples is None:
        x_samples = [-2.5, -1.2, 0.4, 1.9, math.pi]
    solver = solver or (lambda cfg, ts: solve(cfg, ts))
    hs = [h / 2 ** k for k in range(halvings + 1)]
    times = sorted({t0} | {t0 - s for s in hs} | {t0 + s for s in hs})
    tr = solver(config, times)
    idx = {round(t, 14): i for i, t in enumerate(times)}
    st = tr.state(idx[round(t0, 14)])
    g = config.g
    worst_order = math.inf
    res_h = {}
    for x in x_samples:
        E = electric_dcg(config, st, x)
        A = coulomb_dcg(config, st, x)
        comm = 1j * g * (A @ E - E @ A)
        rs = []
        for s in hs:
            Ep = electric_dcg(config, tr.state(idx[round(t0 + s, 14)]), x)
            Em = electric_dcg(config, tr.state(idx[round(t0 - s, 14)]), x)
            rs.append(float(np.max(np.abs((Ep - Em) / (2 * s) + comm))))
        res_h[x] = rs
        for a, b in zip(rs, rs[1:]):
            if a < 1e-11:
                continue
            worst_order = min(worst_order, math.log2(a / b))
    finest = max(r[-1] for r in res_h.values())
    # worst_order stays infinite only when every residual is at roundoff
    detail = "; ".join(f"x={x:.3f}: " + ",".join(f"{r:.2e}" for r in rs) for x, rs in res_h.items())
    return VerificationReport("lax", _describe(config),
                              {"min_order": worst_order, "finest_residual": finest}, {},
                              detail=detail, minimums={"min_order": min_order})


# ---------------------------------------------------------------------------
# conservation laws

def _field_scale(fld) -> float:
    return float(np.max([np.linalg.norm(B) for B in fld.blocks]))


@_timed
def check_conservation(traj, config: SystemConfig, powers=(1, 2, 3, 4),
                       tol: float = 1e-8) -> VerificationReport:
    """Relative drift of H and tr B_j^n along a trajectory.

    Drifts are measured against the natural size of each quantity: |H(0)| or
    the field energy scale for H, and max(|tr B^n|, ||B||^n) for the traces.
    """
    fld0 = blocks_from_state(config, traj.q[0], traj.p[0], list(traj.spins[0]))
    scale = _field_scale(fld0)
    Hs = np.asarray(traj.energy)
    h_scale = max(abs(Hs[0]), 0.5 * scale ** 2, 1e-300)
    res = {"H": float(np.max(np.abs(Hs - Hs[0])) / h_scale)}
    C = np.asarray(traj.casimirs)
    for k, n in enumerate(powers):
        ref = C[0, :, n - 1]
        den = np.maximum(np.abs(ref), scale ** n)
        res[f"trB^{n}"] = float(np.max(np.abs(C[:, :, n - 1] - ref[None]) / den[None]))
    return VerificationReport("conservation", f"{_describe(config)} {traj.source}", res,
                              {k: tol for k in res})


# ---------------------------------------------------------------------------
# exact solver against the integrator

def gauge_invariants(spins: np.ndarray) -> dict:
    """Diagonals, two-cycle products X_j^{ab} X_k^{ba} and traces tr X_j^n.

    ``spins`` has shape (T, m, N, N).  All three are unchanged by the residual
    diagonal gauge transformations.
    """
    S = np.asarray(spins)
    if S.size == 0:
        z = np.zeros((S.shape[0], 0))
        return {"diag": z, "cycles": z, "traces": z}
    diag = np.einsum("tjaa->tja", S).reshape(len(S), -1)
    cyc = np.einsum("tjab,tkba->tjkab", S, S).reshape(len(S), -1)
    tr = []
    P = S.copy()
    for _ in range(3):
        tr.append(np.einsum("tjaa->tj", P))
        P = P @ S
    return {"diag": diag, "cycles": cyc, "traces": np.concatenate(tr, axis=1)}


def _align_windings(config, q_ref, q):
    if isinstance(config.variant, (RationalSpin,)):
        return q
    g = config.g
    if isinstance(config.variant, SutherlandHyp):
        k = np.round((g * (q - q_ref)).imag)
        return q - 1j * k / g
    k = np.round((g * (q - q_ref)).real)
    return q - k / g


def reference_trajectory(config: SystemConfig, times, settings: IntegratorSettings | None = None):
    settings = settings or IntegratorSettings(method="RK45", rtol=1e-10, atol=1e-12)
    if isinstance(config.variant, PiecewiseExp):
        st = IntegratorSettings(method="DOP853", rtol=settings.rtol, atol=settings.atol)
        return integrate_field(config, st, times)
    return integrate(config, settings, times)


def compare_trajectories(config: SystemConfig, ex, orc, q_tol: float = 1e-6,
                         spin_tol: float = 1e-5, name: str | None = None) -> VerificationReport:
    """Gauge-invariant comparison of two trajectories sampled at the same times."""
    if len(ex.t) != len(orc.t) or np.any(ex.t != orc.t):
        raise ValueError("trajectories are sampled at different times")
    q_or = _align_windings(config, ex.q, orc.q)
    res = {"q": float(np.max(np.abs(ex.q - q_or))), "p": float(np.max(np.abs(ex.p - orc.p)))}
    ie, io = gauge_invariants(ex.spins), gauge_invariants(orc.spins)
    for k in ie:
        res[f"spin_{k}"] = float(np.max(np.abs(ie[k] - io[k]), initial=0.0))
    res["spin_raw"] = float(np.max(np.abs(ex.spins - orc.spins), initial=0.0))
    thr = {"q": q_tol, "p": spin_tol, "spin_diag": spin_tol, "spin_cycles": spin_tol,
           "spin_traces": spin_tol}
    T = float(ex.t[-1]) if len(ex.t) else 0.0
    return VerificationReport("crosscheck", name or _describe(config), res, thr,
                              detail=f"{ex.source} vs {orc.source} T={T:g}")


@_timed
def compare_exact_vs_oracle(config: SystemConfig, T: float = 1.0, samples: int = 11,
                            q_tol: float = 1e-6, spin_tol: float = 1e-5,
                            settings: IntegratorSettings | None = None,
                            name: str | None = None) -> VerificationReport:
    """Exact solver against the integrator (field discretization for piecewise charges).

    Positions are compared after removing whole windings, spins through
    gauge-invariant observables; ``spin_raw`` (same-gauge entries) is reported
    but not thresholded.
    """
    times = np.linspace(0.0, T, samples)
    ex = solve(config, times)
    orc = reference_trajectory(config, times, settings)
    return compare_trajectories(config, ex, orc, q_tol, spin_tol, name)


# ---------------------------------------------------------------------------
# Gauss's law and gauge periodicity

def _d5(f, x, h=1e-3):
    return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h)


def _charge_density(fld, config: SystemConfig, x: float) -> np.ndarray:
    """rho(0, x) in the temporal gauge at a point away from the sites."""
    n = config.N
    if fld.slopes is None:
        return np.zeros((n, n), dtype=complex)
    j = int(np.clip(np.searchsorted(fld.bounds, x, side="right") - 1, 0, len(fld.blocks) - 1))
    ph = np.exp(fld.coeff * fld.q0 * x)
    return ph[:, None] * (fld.slopes[j] / fld.lengths[j]) / ph[None, :]


@_timed
def check_gauss(config: SystemConfig, tol: float = 1e-10, field=None) -> VerificationReport:
    """Gauss's law for the initial field blocks.

    Checks jumps at point charges, slopes on charged panels, the smooth-interval
    equation dE/dx - c [Q0, E] = rho, periodicity E(-pi) = E(pi) and the
    momentum condition p = (1/2pi) int diag E.
    """
    fld = field if field is not None else build_initial_field(config)
    v = config.variant
    q0 = config.q0
    n = config.N
    scale = max(1.0, _field_scale(fld))
    res = {}
    if isinstance(v, RationalSpin):
        E = fld.blocks[0]
        r = q0[:, None] - q0[None, :]
        off = ~np.eye(n, dtype=bool)
        res["jump"] = float(np.max(np.abs(np.where(off, 1j * r * E - v.S0, 0.0)), initial=0.0))
        res["periodicity"] = 0.0
        res["momentum"] = float(np.max(np.abs(np.diag(E) - config.p0)))
        res["smooth"] = 0.0
    else:
        c = fld.coeff
        Em, Ep = fld.electric(-math.pi), fld.electric(math.pi)
        res["periodicity"] = float(np.max(np.abs(Em - Ep)))
        # momentum: integrate the diagonal blockwise (the diagonal of e^{cQx} B e^{-cQx} is B's)
        if fld.slopes is None:
            pint = (fld.lengths[:, None] * np.einsum("jaa->ja", fld.blocks)).sum(0)
        else:
            mid = fld.blocks + 0.5 * fld.slopes
            pint = (fld.lengths[:, None] * np.einsum("jaa->ja", mid)).sum(0)
        res["momentum"] = float(np.max(np.abs(pint / (2 * math.pi) - config.p0)))
        # jumps at point charges
        jump = 0.0
        if isinstance(v, DeltaSites):
            for j, (x, rho) in enumerate(zip(v.sites, v.rho0), start=1):
                ph = np.exp(c * q0 * x)
                expected = rho
                got = ph[:, None] * (fld.blocks[j] - fld.blocks[j - 1]) / ph[None, :]
                jump = max(jump, float(np.max(np.abs(got - expected))))
        elif isinstance(v, (SutherlandTrig, SutherlandHyp)):
            off = ~np.eye(n, dtype=bool)
            want = 2 * math.pi * config.g * v.e * (1.0 if v.kind == "trig" else -1j)
            d = fld.blocks[1] - fld.blocks[0]
            jump = float(np.max(np.abs(np.where(off, d - want, d)), initial=0.0))
        elif isinstance(v, PiecewiseExp):
            ends = fld.blocks + fld.slopes
            cont = np.max(np.abs(ends[:-1] - fld.blocks[1:]), initial=0.0)
            slope = np.max(np.abs(fld.slopes - v.s0))
            res["slope"] = float(slope)
            jump = float(cont)
        res["jump"] = jump
        # smooth intervals: sample two interior points per interval
        sm = 0.0
        for a, b in zip(fld.bounds[:-1], fld.bounds[1:]):
            for x in (a + 0.3 * (b - a), a + 0.7 * (b - a)):
                dE = _d5(fld.electric, x, min(1e-3, 0.05 * (b - a)))
                E = fld.electric(x)
                r = dE - c * (np.diag(q0) @ E - E @ np.diag(q0)) - _charge_density(fld, config, x)
                sm = max(sm, float(np.max(np.abs(r))))
        res["smooth"] = sm
    thr = {k: tol * scale for k in res}
    # the smooth check uses a finite-difference stencil; allow for its roundoff
    thr["smooth"] = 1e-8 * scale
    return VerificationReport("gauss", _describe(config), res, thr)


@_timed
def check_gauge_periodicity(config: SystemConfig, T: float = 1.0, samples: int = 20,
                            tol: float = 1e-8) -> VerificationReport:
    """U(t, pi) = U(t, -pi) with U = S(t, x) V e^{-c (x + pi) Q}."""
    times = np.linspace(T / samples, T, samples)
    fld = build_initial_field(config)
    worst = 0.0
    spec = 0.0
    for mono, fr in track(config, times, field=fld):
        Um = gauge_transform(mono, fr, fld, -math.pi)
        Up = gauge_transform(mono, fr, fld, math.pi)
        worst = max(worst, float(np.linalg.norm(Up - Um) / np.linalg.norm(Um)))
        # eigen-relation V^{-1} S V = diag(lambda(q))
        if fld.kind == "rational":
            lam = fr.q
        else:
            lam = np.exp(2 * math.pi * coefficient(fld.kind, config.g) * fr.q)
        D = np.linalg.solve(fr.V, mono.S_pi @ fr.V)
        spec = max(spec, float(np.max(np.abs(D - np.diag(lam))) / np.linalg.norm(mono.S_pi)))
    return VerificationReport("gauge_periodicity", _describe(config),
                              {"U_periodicity": worst, "spectral": spec},
                              {"U_periodicity": tol, "spectral": tol})


# ---------------------------------------------------------------------------
# special-case equivalences

@_timed
def check_decoupling(config: SystemConfig, T: float = 1.0, samples: int = 11,
                     tol: float = 1e-10) -> VerificationReport:
    """A single point charge e 2 pi g (1 - delta) reproduces the Sutherland model."""
    if not isinstance(config.variant, SutherlandTrig):
        raise TypeError("needs a Sutherland configuration")
    times = np.linspace(0.0, T, samples)
    a = solve(config, times)
    b = solve(_sutherland_as_sites(config), times)
    diag = np.einsum("tjaa->tja", b.spins)
    res = {"q": float(np.max(np.abs(a.q - b.q))), "p": float(np.max(np.abs(a.p - b.p))),
           "spin_diag": float(np.max(np.abs(diag)))}
    return VerificationReport("decoupling", _describe(config), res, {k: tol for k in res})


def sutherland_remark_matrices(config: SystemConfig, t: float):
    """The two monodromy forms compared by ``check_sutherland_equivalence``."""
    g = config.g
    e = config.variant.e
    q, p = config.q0, config.p0
    n = len(q)
    r = q[:, None] - q[None, :]
    off = ~np.eye(n, dtype=bool)
    B = np.diag(p) + np.where(off, e * math.pi * g / (1j * np.sin(math.pi * g * np.where(off, r, 0.5 / g))), 0.0)
    D = np.diag(np.exp(1j * math.pi * g * q))
    Di = np.diag(np.exp(-1j * math.pi * g * q))
    Bp, Bm = D @ B @ Di, Di @ B @ D
    edge = np.diag(np.exp(-1j * math.pi * g * q))
    M1 = edge @ expm(-1j * math.pi * g * Bp * t) @ expm(-1j * math.pi * g * Bm * t) @ edge
    M2 = edge @ expm(-2j * math.pi * g * B * t) @ edge
    return M1, M2


@_timed
def check_sutherland_equivalence(samples: int = 10, seed: int = 0,
                                 tol: float = 1e-9) -> VerificationReport:
    """Product of the two half-circle exponentials vs the single 2 pi g B t one."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_mono = 0.0
    for _ in range(samples):
        n = int(rng.integers(2, 5))
        g = float(rng.uniform(0.1, 0.6))
        q = np.sort(rng.uniform(-1.0, 1.0, n) / g * 0.45)
        cfg = SystemConfig(SutherlandTrig(float(rng.uniform(0.2, 1.5))), g, q, rng.normal(size=n))
        t = float(rng.uniform(0.0, 2.0))
        M1, M2 = sutherland_remark_matrices(cfg, t)
        l1 = np.sort_complex(eig_general(M1).eigenvalues)
        l2 = eig_general(M2).eigenvalues
        from .linalg import pair_eigenvalues

        perm, _ = pair_eigenvalues(l1, l2)
        worst = max(worst, float(np.max(np.abs(l1 - l2[perm]))))
        S = monodromy_at(t, build_initial_field(cfg)).S_pi
        worst_mono = max(worst_mono, float(np.max(np.abs(S - M1))))
    res = {"eigenvalues": worst, "monodromy_vs_blocks": worst_mono}
    return VerificationReport("sutherland_equivalence", f"{samples} samples seed {seed}", res,
                              {"eigenvalues": tol, "monodromy_vs_blocks": tol})


def dual_trig_config(config: SystemConfig) -> SystemConfig:
    """Trigonometric configuration with positions and momenta multiplied by i."""
    return SystemConfig(SutherlandTrig(config.variant.e), config.g, 1j * config.q0,
                        1j * config.p0, config.t_max)


@_timed
def check_duality(config: SystemConfig, T: float = 1.0, samples: int = 11,
                  tol: float = 1e-8) -> VerificationReport:
    """Hyperbolic solution equals -i times the trig solution of (i q0, i p0)."""
    if not isinstance(config.variant, SutherlandHyp):
        raise TypeError("needs a hyperbolic configuration")
    times = np.linspace(0.0, T, samples)
    h = solve(config, times)
    t = solve(dual_trig_config(config), times)
    res = {"q": float(np.max(np.abs(h.q - (-1j) * t.q))),
           "p": float(np.max(np.abs(h.p - (-1j) * t.p))),
           "H": float(np.max(np.abs(h.energy + t.energy)) / max(1.0, abs(h.energy[0])))}
    return VerificationReport("duality", _describe(config), res, {k: tol for k in res})


@_timed
def check_no_collision(config: SystemConfig, T: float = 100.0, samples: int = 401,
                       factor: float = 10.0) -> VerificationReport:
    """Long run must keep the eigenvalue gap above ``factor`` times the threshold."""
    from .exact import COLLISION_GAP, CollisionDetected

    times = np.linspace(0.0, T, samples)
    try:
        tr = solve(config, times)
        margin = float(np.min(tr.gap))
        reached = T
    except CollisionDetected as exc:
        margin, reached = 0.0, exc.t
    res = {"min_gap": margin, "unreached": T - reached}
    return VerificationReport("no_collision", f"{_describe(config)} T={T}", res,
                              {"unreached": 0.0}, detail=f"reached t={reached:.6g}",
                              minimums={"min_gap": factor * COLLISION_GAP})


# ---------------------------------------------------------------------------
# numerical hygiene

def random_config(rng: np.random.Generator, kind: str | None = None, n: int | None = None,
                  m: int | None = None, complex_data: bool = False) -> SystemConfig:
    """A well-separated random configuration of the requested kind."""
    kind = kind or str(rng.choice(["rational", "trig", "hyp", "delta", "piecewise"]))
    n = n or int(rng.integers(1, 5))
    m = m or int(rng.integers(1, 4))
    g = float(rng.uniform(0.2, 0.6))
    # positions spread over part of the circle with a minimum spacing
    base = np.sort(rng.uniform(-0.35, 0.35, n)) / g
    q = base + np.arange(n) * 0.1 / g
    q = q - q.mean()
    p = rng.normal(size=n) * 0.5
    if complex_data:
        q = q + 1j * rng.normal(size=n) * 0.05
        p = p + 1j * rng.normal(size=n) * 0.1

    def spins(count):
        X = rng.normal(size=(count, n, n)) * 0.4
        if complex_data:
            X = X + 1j * rng.normal(size=(count, n, n)) * 0.4
        X = X.astype(complex)
        X[-1] -= np.diag(np.einsum("jaa->a", X))
        return X

    if kind == "rational":
        S = spins(1)[0]
        np.fill_diagonal(S, 0)
        return SystemConfig(RationalSpin(S), g, q * 3, p)
    if kind == "trig":
        return SystemConfig(SutherlandTrig(float(rng.uniform(0.2, 1.5))), g, q, p)
    if kind == "hyp":
        return SystemConfig(SutherlandHyp(float(rng.uniform(0.2, 1.5))), g, q.real, p.real)
    if kind == "delta":
        sites = np.sort(rng.uniform(-math.pi, math.pi, m))
        while m > 1 and np.min(np.diff(sites)) < 0.2:
            sites = np.sort(rng.uniform(-math.pi, math.pi, m))
        return SystemConfig(DeltaSites(tuple(sites), spins(m)), g, q, p)
    inner = np.sort(rng.uniform(-math.pi + 0.3, math.pi - 0.3, m - 1))
    bps = (-math.pi, *inner, math.pi)
    if m > 1 and np.min(np.diff(bps)) < 0.2:
        bps = tuple(np.linspace(-math.pi, math.pi, m + 1))
        bps = (-math.pi, *bps[1:-1], math.pi)
    return SystemConfig(PiecewiseExp(bps, spins(m)), g, q, p)


@_timed
def check_gradients(samples: int = 50, seed: int = 0, h: float = 1e-6,
                    tol: float = 1e-6) -> VerificationReport:
    """Analytic dH/dq against central differences on random instances."""
    rng = np.random.default_rng(seed)
    kinds = ["rational", "trig", "hyp", "delta", "piecewise"]
    worst = 0.0
    where = ""
    for i in range(samples):
        kind = kinds[i % len(kinds)]
        cfg = random_config(rng, kind, n=int(rng.integers(2, 5)), m=int(rng.integers(1, 4)),
                            complex_data=(kind in ("delta", "rational") and i % 2 == 1))
        st = PhaseState(0.0, cfg.q0.copy(), cfg.p0.copy(), [np.array(s) for s in cfg.variant.spins0])
        an = grad_q_hamiltonian(st, cfg)
        fd = np.empty_like(an)
        for a in range(cfg.N):
            e = np.zeros(cfg.N)
            e[a] = h
            sp = PhaseState(0.0, st.q + e, st.p, st.spins)
            sm = PhaseState(0.0, st.q - e, st.p, st.spins)
            fd[a] = (hamiltonian(sp, cfg) - hamiltonian(sm, cfg)) / (2 * h)
        err = float(np.max(np.abs(an - fd)) / max(np.max(np.abs(an)), 1e-3))
        if err > worst:
            worst, where = err, f"sample {i} ({kind}, N={cfg.N})"
    return VerificationReport("gradients", f"{samples} samples seed {seed}", {"relative": worst},
                              {"relative": tol}, detail=where)


@_timed
def check_rk4_order(config: SystemConfig | None = None, T: float = 1.0,
                    steps=(0.1, 0.05, 0.025, 0.0125), min_order: float = 3.8) -> VerificationReport:
    """Fixed-step RK4 global error against a tight adaptive reference."""
    if config is None:
        config = SystemConfig(SutherlandTrig(1.0), 0.4, [-0.6, 0.7], [0.3, -0.2])
    ref = integrate(config, IntegratorSettings("DOP853", rtol=1e-13, atol=1e-15), [0.0, T])
    errs = []
    for h in steps:
        tr = integrate(config, IntegratorSettings("RK4", step=h), [0.0, T])
        errs.append(float(np.max(np.abs(tr.q[-1] - ref.q[-1]))))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    return VerificationReport("rk4_order", _describe(config), {"min_order": min(orders)}, {},
                              detail="errors " + ", ".join(f"{e:.2e}" for e in errs),
                              minimums={"min_order": min_order})


# ---------------------------------------------------------------------------
# corpus and suites

def _describe(config: SystemConfig) -> str:
    v = config.variant
    m = len(v.spins0)
    data = "complex" if (np.any(config.q0.imag) or np.any(config.p0.imag)
                         or any(np.any(np.asarray(s).imag) for s in v.spins0)) else "real"
    return f"{v.kind} N={config.N}" + (f" m={m}" if m else "") + f" {data}"


@dataclass
class CorpusEntry:
    name: str
    config: SystemConfig
    T: float
    q_tol: float
    spin_tol: float
    raw: dict = field(repr=False, default_factory=dict)


def load_corpus(path=None) -> list[CorpusEntry]:
    if path is None:
        text = resources.files("cmgauge").joinpath("data/corpus.json").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    doc = json.loads(text)
    out = []
    for k, item in enumerate(doc["instances"]):
        label = item.get("name", f"#{k}")
        try:
            cfg = system_from_dict(item["system"], item["T"])
        except (KeyError, ValueError) as exc:
            raise ConfigFormatError(f"instance {label}: {exc}") from None
        b = item.get("bounds", {})
        out.append(CorpusEntry(item["name"], cfg, item["T"], b.get("q", 1e-6),
                               b.get("spin", 1e-5), item))
    return out


def _guard(check, instance, fn, *args, **kwargs) -> VerificationReport:
    """Run one check; an exception becomes a failed report naming the instance."""
    t0 = time.perf_counter()
    try:
        rep = fn(*args, **kwargs)
        rep.instance = instance
        return rep
    except Exception as exc:  # noqa: BLE001 - every failure must be reported, not raised
        rep = VerificationReport(check, instance, {"error": math.inf}, {"error": 0.0},
                                 detail=f"{type(exc).__name__}: {exc}")
        rep.runtime = time.perf_counter() - t0
        return rep


def _suite_identities(corpus, seed):
    return [_guard("identities", f"100 samples seed {seed}", check_identities, 100, seed),
            _guard("gradients", f"50 samples seed {seed}", check_gradients, 50, seed)]


def _suite_lax(corpus, seed):
    return [_guard("lax", e.name, check_lax, e.config, t0=min(0.5, e.T / 2))
            for e in corpus if isinstance(e.config.variant, (SutherlandTrig, DeltaSites))]


def _conservation_entry(e: CorpusEntry, T: float = 10.0):
    tr = solve(e.config, np.linspace(0.0, T, 21))
    return check_conservation(tr, e.config)


def _suite_conservation(corpus, seed):
    reps = [_guard("conservation", e.name, _conservation_entry, e)
            for e in corpus if not isinstance(e.config.variant, PiecewiseExp)]
    reps += [_guard("no_collision", e.name, check_no_collision, e.config)
             for e in corpus if isinstance(e.config.variant, (SutherlandTrig, SutherlandHyp))
             and e.config.real]
    reps.append(_guard("rk4_order", "trig N=2", check_rk4_order))
    return reps


def _suite_crosscheck(corpus, seed):
    reps = [_guard("crosscheck", e.name, compare_exact_vs_oracle, e.config, e.T,
                   q_tol=e.q_tol, spin_tol=e.spin_tol, name=e.name) for e in corpus]
    for e in corpus:
        if isinstance(e.config.variant, SutherlandTrig):
            reps.append(_guard("decoupling", e.name, check_decoupling, e.config, e.T))
        if isinstance(e.config.variant, SutherlandHyp):
            reps.append(_guard("duality", e.name, check_duality, e.config, e.T))
    reps.append(_guard("sutherland_equivalence", f"seed {seed}", check_sutherland_equivalence,
                       10, seed))
    return reps


def _suite_gauss(corpus, seed):
    reps = [_guard("gauss", e.name, check_gauss, e.config) for e in corpus]
    reps += [_guard("gauge_periodicity", e.name, check_gauge_periodicity, e.config, e.T)
             for e in corpus]
    return reps


SUITES = {
    "identities": _suite_identities,
    "lax": _suite_lax,
    "conservation": _suite_conservation,
    "crosscheck": _suite_crosscheck,
    "gauss": _suite_gauss,
}


def run_suite(name: str, seed: int = 0, corpus=None) -> list[VerificationReport]:
    corpus = load_corpus() if corpus is None else corpus
    if name == "all":
        reps = []
        for key in sorted(SUITES):
            reps += SUITES[key](corpus, seed)
        return reps
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}")
    return SUITES[name](corpus, seed)
