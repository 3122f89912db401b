import math

import numpy as np
import pytest
from scipy.linalg import expm

from cmgauge.exact import (
    CollisionAtStart,
    CollisionDetected,
    SolverSettings,
    blocks_from_state,
    build_initial_field,
    casimirs_of,
    field_energy,
    monodromy_at,
    solve,
)
from cmgauge.models import (
    DeltaSites,
    RationalSpin,
    SutherlandHyp,
    SutherlandTrig,
    SystemConfig,
    hamiltonian,
    initial_state,
)
from cmgauge.verify import check_gauge_periodicity

# DOP853 references (rtol 1e-13) of the corpus instances at t = 1
FROZEN = {
    "rational_N2_real": (
        [-0.5089564806492096, 0.8089564806492096],
        [0.2794903913744347, -0.07949039137443469]),
    "trig_N2_real": (
        [-0.5066418958125092, 0.7066418958125091],
        [-0.20570330353465505, 0.30570330353465497]),
    "hyp_N2_real": (
        [-0.6887701302433211, 0.8887701302433209],
        [-0.5735255429978229, 0.673525542997823]),
    "delta_N2_m1": (
        [-0.3318802779743613, 0.6318802779743613],
        [0.11546934021821754, -0.01546934021821753]),
    "delta_N3_m2_complex": (
        [0.08429483294099274 - 0.04810500474416679j, 1.0323744247737743 - 0.3109104293135426j,
         -0.21666925771476697 + 0.3290154340577094j],
        [-0.09208776858086368 - 0.49977597552744457j, 0.28965284858581464 - 0.49420561540130875j,
         0.4024349199950489 + 0.9439815909287537j]),
}


class TestField:
    def test_zero_spins_give_diagonal_momenta(self):
        p = np.array([0.4, -0.3])
        cfg = SystemConfig(RationalSpin(np.zeros((2, 2))), 1.0, [0.0, 1.0], p)
        np.testing.assert_allclose(build_initial_field(cfg).blocks[0], np.diag(p))

    def test_sutherland_blocks(self):
        g, e = 0.4, 0.9
        q, p = np.array([-0.6, 0.7, 1.3]), np.array([0.3, -0.2, 0.1])
        f = build_initial_field(SystemConfig(SutherlandTrig(e), g, q, p))
        Bm, Bp = f.blocks
        np.testing.assert_allclose(np.diag(Bm), p)
        np.testing.assert_allclose(np.diag(Bp), p)
        off = ~np.eye(3, dtype=bool)
        np.testing.assert_allclose((Bp - Bm)[off], 2 * math.pi * g * e, rtol=1e-14)

    def test_delta_jumps_equal_conjugated_charges(self, corpus):
        cfg = corpus["delta_N3_m2_complex"].config
        f = build_initial_field(cfg)
        q = cfg.q0
        r = q[:, None] - q[None, :]
        for j, x in enumerate(cfg.variant.sites):
            jump = f.blocks[j + 1] - f.blocks[j]
            np.testing.assert_allclose(jump, np.exp(1j * cfg.g * r * x) * cfg.variant.rho0[j],
                                       atol=1e-14)

    def test_delta_field_is_periodic_in_temporal_gauge(self, corpus):
        cfg = corpus["delta_N3_m2_complex"].config
        f = build_initial_field(cfg)
        np.testing.assert_allclose(f.electric(-math.pi), f.electric(math.pi), atol=1e-12)

    def test_field_energy_matches_hamiltonian(self, corpus):
        for name in ("trig_N2_real", "delta_N2_m1", "delta_N3_m2_complex", "rational_N3_complex"):
            cfg = corpus[name].config
            np.testing.assert_allclose(field_energy(build_initial_field(cfg)),
                                       hamiltonian(initial_state(cfg), cfg), rtol=1e-12)

    def test_coincident_start(self):
        cfg = SystemConfig(SutherlandTrig(1.0), 0.4, [0.0, 1.0], [0.0, 0.0])
        with pytest.raises(CollisionAtStart):
            blocks_from_state(cfg, [0.0, 0.0], [0.0, 0.0], [])


class TestMonodromy:
    def test_initial_monodromy(self, corpus):
        for name in ("trig_N2_real", "delta_N3_m2_complex", "piecewise_N2_m2"):
            cfg = corpus[name].config
            S = monodromy_at(0.0, build_initial_field(cfg)).S_pi
            np.testing.assert_allclose(S, np.diag(np.exp(-2j * math.pi * cfg.g * cfg.q0)),
                                       atol=1e-13)

    def test_sutherland_closed_form(self):
        g, e = 0.35, 0.6
        cfg = SystemConfig(SutherlandTrig(e), g, [-0.5, 0.4], [0.2, 0.1])
        f = build_initial_field(cfg)
        t = 0.8
        edge = np.diag(np.exp(-1j * math.pi * g * cfg.q0))
        want = edge @ expm(-1j * g * t * math.pi * f.blocks[1]) @ expm(
            -1j * g * t * math.pi * f.blocks[0]) @ edge
        np.testing.assert_allclose(monodromy_at(t, f).S_pi, want, atol=1e-13)

    def test_time_derivative(self, corpus):
        f = build_initial_field(corpus["delta_N3_m2_complex"].config)
        h = 1e-5
        fd = (monodromy_at(0.5 + h, f).S_pi - monodromy_at(0.5 - h, f).S_pi) / (2 * h)
        np.testing.assert_allclose(monodromy_at(0.5, f).dS, fd, atol=1e-8)

    def test_negative_time(self, corpus):
        with pytest.raises(ValueError):
            monodromy_at(-1.0, build_initial_field(corpus["trig_N2_real"].config))


class TestSolve:
    def test_initial_sample(self, corpus):
        for e in corpus.values():
            tr = solve(e.config, [0.0])
            np.testing.assert_allclose(tr.q[0], e.config.q0, atol=1e-12)
            np.testing.assert_allclose(tr.p[0], e.config.p0, atol=1e-11)
            if len(e.config.variant.spins0):
                np.testing.assert_allclose(tr.spins[0], np.array(e.config.variant.spins0),
                                           atol=1e-11)

    def test_single_free_particle(self):
        cfg = SystemConfig(RationalSpin(np.zeros((1, 1))), 1.0, [0.3], [1.5])
        tr = solve(cfg, np.linspace(0, 2, 5))
        np.testing.assert_allclose(tr.q[:, 0], 0.3 + 1.5 * tr.t, atol=1e-14)
        np.testing.assert_allclose(tr.p[:, 0], 1.5, atol=1e-14)

    def test_free_motion_without_spins(self):
        cfg = SystemConfig(DeltaSites((0.0,), np.zeros((1, 2, 2))), 0.3, [-0.5, 0.6], [0.2, -0.1])
        tr = solve(cfg, [0.0, 1.0, 2.5])
        np.testing.assert_allclose(tr.q, cfg.q0[None] + tr.t[:, None] * cfg.p0[None], atol=1e-11)

    @pytest.mark.parametrize("name", sorted(FROZEN))
    def test_frozen_reference(self, corpus, name):
        q, p = FROZEN[name]
        tr = solve(corpus[name].config, [0.0, 0.5, 1.0])
        np.testing.assert_allclose(tr.q[-1], q, atol=1e-8)
        np.testing.assert_allclose(tr.p[-1], p, atol=1e-8)

    def test_frozen_spin_invariant(self, corpus):
        tr = solve(corpus["delta_N2_m1"].config, [1.0])
        rho = tr.spins[0, 0]
        np.testing.assert_allclose(np.trace(rho @ rho), 1.06, atol=1e-10)

    def test_single_site_diagonal_is_constant(self, corpus):
        cfg = corpus["delta_N2_m1"].config
        tr = solve(cfg, np.linspace(0, 1, 6))
        d0 = np.diag(cfg.variant.rho0[0])
        for s in tr.spins[:, 0]:
            np.testing.assert_allclose(np.diag(s), d0, atol=1e-10)

    def test_spin_traces_conserved(self, corpus):
        cfg = corpus["delta_N3_m2_complex"].config
        tr = solve(cfg, np.linspace(0, 1, 5))
        for j, s0 in enumerate(cfg.variant.rho0):
            for k in (1, 2, 3):
                want = np.trace(np.linalg.matrix_power(s0, k))
                got = [np.trace(np.linalg.matrix_power(s[j], k)) for s in tr.spins]
                np.testing.assert_allclose(got, want, atol=1e-9)

    def test_casimirs_conserved(self, corpus):
        cfg = corpus["trig_N4_real"].config
        tr = solve(cfg, np.linspace(0, 2, 5))
        np.testing.assert_allclose(tr.casimirs, tr.casimirs[0][None].repeat(len(tr), 0),
                                   rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(tr.energy, tr.energy[0], rtol=1e-10)

    def test_bad_times(self, corpus):
        cfg = corpus["trig_N2_real"].config
        for times in ([1.0, 0.5], [-0.1], []):
            with pytest.raises(ValueError):
                solve(cfg, times)


class TestHyperbolic:
    def test_real_and_separating(self, corpus):
        cfg = corpus["hyp_N3_real"].config
        tr = solve(cfg, np.linspace(0, 20, 41))
        assert tr.meta["method"] == "graded"
        assert np.all(tr.q.imag == 0)
        gaps = np.diff(np.sort(tr.q.real, axis=1), axis=1).min(axis=1)
        # repulsive: once the momenta have sorted the gaps only grow
        assert np.all(np.diff(gaps[20:]) > 0)

    def test_graded_agrees_with_general_path(self, corpus):
        cfg = corpus["hyp_N3_real"].config
        t = np.linspace(0, 3, 7)
        a = solve(cfg, t)
        b = solve(cfg, t, SolverSettings(graded_hyperbolic=False))
        np.testing.assert_allclose(a.q, b.q, atol=1e-9)
        np.testing.assert_allclose(a.p, b.p, atol=1e-9)

    def test_asymptotic_momenta(self):
        # two hyperbolic particles scatter to p = +-sqrt(2 H)
        cfg = SystemConfig(SutherlandHyp(1.0), 0.5, [-0.3, 0.3], [0.0, 0.0])
        H = hamiltonian(initial_state(cfg), cfg).real
        tr = solve(cfg, [40.0])
        np.testing.assert_allclose(np.sort(tr.p[0].real), [-math.sqrt(H), math.sqrt(H)],
                                   rtol=1e-10)


class TestRestart:
    def test_restart_matches_continuous_tracking(self, corpus):
        cfg = corpus["delta_N3_m2_complex"].config
        t = np.linspace(0, 2.5, 6)
        a = solve(cfg, t)
        b = solve(cfg, t, SolverSettings(restart_interval=None))
        np.testing.assert_allclose(a.q, b.q, atol=1e-8)
        np.testing.assert_allclose(a.spins, b.spins, atol=1e-7)


class TestCollision:
    def _attractive(self):
        S = np.array([[0, -0.5], [0.5, 0]], dtype=complex)
        return SystemConfig(RationalSpin(S), 1.0, [-0.5, 0.5], [0.0, 0.0])

    def test_collision_is_detected(self):
        cfg = self._attractive()
        with pytest.raises(CollisionDetected) as info:
            solve(cfg, np.linspace(0, 3, 31))
        exc = info.value
        assert 0 < exc.t <= 3
        assert exc.partial is not None
        assert exc.partial.t[-1] <= exc.t

    def test_coincident_positions_rejected(self):
        with pytest.raises(ValueError):
            SystemConfig(RationalSpin(np.zeros((2, 2))), 1.0, [0.2, 0.2], [0.0, 0.0])


class TestGaugePeriodicity:
    @pytest.mark.parametrize("name", ["trig_N2_real", "delta_N3_m2_complex", "piecewise_N2_m2"])
    def test_periodic(self, corpus, name):
        e = corpus[name]
        rep = check_gauge_periodicity(e.config, e.T)
        assert rep.passed, rep.line()


def test_casimirs_of_shape(corpus):
    f = build_initial_field(corpus["delta_N3_m2_complex"].config)
    assert casimirs_of(f).shape == (3, 4)
