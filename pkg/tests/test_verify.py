import copy
import json
import math

import numpy as np
import pytest

from cmgauge.configio import ConfigFormatError
from cmgauge.exact import solve
from cmgauge.models import RationalSpin, SutherlandHyp, SutherlandTrig, SystemConfig
from cmgauge.verify import (
    SUITES,
    VerificationReport,
    _guard,
    check_conservation,
    check_duality,
    check_gauss,
    check_identities,
    check_lax,
    check_no_collision,
    compare_exact_vs_oracle,
    compare_trajectories,
    dual_trig_config,
    gauge_invariants,
    load_corpus,
    run_suite,
)


class TestReport:
    def test_thresholds(self):
        assert VerificationReport("x", "i", {"a": 1e-9}, {"a": 1e-8}).passed
        assert not VerificationReport("x", "i", {"a": 1e-7}, {"a": 1e-8}).passed
        assert not VerificationReport("x", "i", {"a": math.nan}, {"a": 1e-8}).passed
        assert not VerificationReport("x", "i", {"a": math.inf}, {"a": 1e-8}).passed

    def test_minimums(self):
        rep = VerificationReport("lax", "i", {"order": 2.0}, {}, minimums={"order": 1.9})
        assert rep.passed
        assert ">= 1.9" in rep.line()
        assert not VerificationReport("lax", "i", {"order": 1.5}, {},
                                      minimums={"order": 1.9}).passed
        # an infinite order means every residual was at roundoff
        assert VerificationReport("lax", "i", {"order": math.inf}, {},
                                  minimums={"order": 1.9}).passed
        assert not VerificationReport("lax", "i", {"order": math.nan}, {},
                                      minimums={"order": 1.9}).passed

    def test_worst_picks_largest_ratio(self):
        rep = VerificationReport("x", "i", {"a": 1e-9, "b": 5e-9, "c": 2.0}, {"a": 1e-9, "b": 1e-8},
                                 minimums={"c": 1.0})
        assert rep.worst[0] == "a"
        assert rep.line().startswith("PASS x [i] worst a=")

    def test_record_is_json(self):
        rep = VerificationReport("x", "i", {"a": math.inf}, {"a": 0.0})
        rec = rep.as_record()
        assert rec["residuals"]["a"] == "inf"
        assert "runtime" not in rec
        json.dumps(rec)

    def test_guard_names_instance(self):
        def boom():
            raise RuntimeError("broken")

        rep = _guard("crosscheck", "my_instance", boom)
        assert not rep.passed
        assert rep.instance == "my_instance"
        assert "broken" in rep.detail
        assert rep.line().startswith("FAIL crosscheck [my_instance]")


class TestCorpus:
    def test_loads(self, corpus):
        assert len(corpus) == 13
        kinds = {e.config.variant.kind for e in corpus.values()}
        assert kinds == {"rational", "trig", "hyp", "delta", "piecewise"}

    def test_bad_instance_is_named(self, tmp_path):
        entries = load_corpus()
        doc = {"schema_version": 1, "instances": [copy.deepcopy(e.raw) for e in entries]}
        doc["instances"][4]["system"]["g"] = "heavy"
        p = tmp_path / "c.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(ConfigFormatError, match=entries[4].name):
            load_corpus(p)


class TestChecks:
    def test_identities(self):
        rep = check_identities(20, seed=1)
        assert rep.passed, rep.line()

    def test_lax_order(self, corpus):
        rep = check_lax(corpus["trig_N2_real"].config)
        assert rep.passed, rep.line()
        assert 1.9 <= rep.residuals["min_order"] < 2.2

    def test_lax_detects_wrong_dynamics(self, corpus):
        cfg = corpus["delta_N2_m1"].config
        wrong = SystemConfig(cfg.variant, cfg.g * 1.1, cfg.q0, cfg.p0)
        # trajectory of a different coupling fed into the Lax residual of cfg
        rep = check_lax(cfg, solver=lambda c, ts: solve(wrong, ts))
        assert not rep.passed

    def test_conservation(self, corpus):
        cfg = corpus["delta_N3_m2_complex"].config
        rep = check_conservation(solve(cfg, np.linspace(0, 2, 5)), cfg)
        assert rep.passed, rep.line()

    def test_crosscheck_catches_a_perturbed_trajectory(self, corpus):
        cfg = corpus["trig_N2_real"].config
        t = np.linspace(0, 1, 3)
        ex = solve(cfg, t)
        bad = copy.deepcopy(ex)
        bad.q = bad.q + 1e-4
        assert compare_trajectories(cfg, ex, ex).passed
        assert not compare_trajectories(cfg, ex, bad).passed

    def test_crosscheck_instance(self, corpus):
        e = corpus["delta_N2_m1"]
        rep = compare_exact_vs_oracle(e.config, e.T, q_tol=e.q_tol, spin_tol=e.spin_tol)
        assert rep.passed, rep.line()

    def test_gauss(self, corpus):
        rep = check_gauss(corpus["delta_N3_m2_complex"].config)
        assert rep.passed, rep.line()

    def test_duality_config(self):
        cfg = SystemConfig(SutherlandHyp(0.7), 0.4, [-0.5, 0.6], [0.1, 0.2])
        d = dual_trig_config(cfg)
        assert isinstance(d.variant, SutherlandTrig)
        np.testing.assert_allclose(d.q0, 1j * cfg.q0)
        assert check_duality(cfg).passed

    def test_no_collision_reports_failure(self):
        S = np.array([[0, -0.5], [0.5, 0]], dtype=complex)
        cfg = SystemConfig(RationalSpin(S), 1.0, [-0.5, 0.5], [0.0, 0.0])
        rep = check_no_collision(cfg, T=3.0, samples=31)
        assert not rep.passed
        assert rep.residuals["unreached"] > 0

    def test_gauge_invariants_ignore_diagonal_gauge(self, rng):
        S = rng.normal(size=(1, 2, 3, 3)) + 1j * rng.normal(size=(1, 2, 3, 3))
        d = np.exp(1j * rng.normal(size=3))
        S2 = d[None, None, :, None] * S / d[None, None, None, :]
        a, b = gauge_invariants(S), gauge_invariants(S2)
        for k in a:
            np.testing.assert_allclose(a[k], b[k], atol=1e-12)


class TestSuites:
    def test_known_names(self):
        assert set(SUITES) == {"identities", "lax", "conservation", "crosscheck", "gauss"}
        with pytest.raises(KeyError):
            run_suite("nonsense")

    def test_lax_suite(self, corpus):
        reps = run_suite("lax", corpus=list(corpus.values()))
        assert reps and all(r.passed for r in reps), [r.line() for r in reps if not r.passed]

    def test_gauss_suite(self, corpus):
        reps = run_suite("gauss", corpus=list(corpus.values()))
        assert len(reps) == 2 * len(corpus)
        assert all(r.passed for r in reps), [r.line() for r in reps if not r.passed]

    def test_records_are_deterministic(self, corpus):
        sub = [corpus["trig_N2_real"], corpus["delta_N2_m1"]]
        a = [r.as_record() for r in run_suite("crosscheck", corpus=sub)]
        b = [r.as_record() for r in run_suite("crosscheck", corpus=sub)]
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
