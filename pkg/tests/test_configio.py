import copy
import json

import numpy as np
import pytest

from cmgauge.configio import (
    ConfigFormatError,
    canonical_hash,
    load_run_config,
    output_times,
    system_from_dict,
    system_to_dict,
    validate_run,
)


def _run_doc(corpus, name="trig_N2_real"):
    return {
        "schema_version": 1,
        "system": copy.deepcopy(corpus[name].raw["system"]),
        "solver": "exact",
        "output": {"t_max": 1.0, "dt_out": 0.25, "format": "csv", "path": "out.csv"},
    }


class TestSystemDocuments:
    def test_roundtrip_every_instance(self, corpus):
        for e in corpus.values():
            doc = system_to_dict(e.config)
            back = system_from_dict(json.loads(json.dumps(doc)))
            np.testing.assert_array_equal(back.q0, e.config.q0)
            np.testing.assert_array_equal(back.p0, e.config.p0)
            assert back.g == e.config.g
            assert back.real == e.config.real
            for a, b in zip(back.variant.spins0, e.config.variant.spins0):
                np.testing.assert_array_equal(a, b)
            assert system_to_dict(back) == doc

    def test_unknown_key_rejected(self, corpus):
        doc = copy.deepcopy(corpus["trig_N2_real"].raw["system"])
        doc["mass"] = 1.0
        with pytest.raises(ConfigFormatError):
            system_from_dict(doc)
        doc = copy.deepcopy(corpus["trig_N2_real"].raw["system"])
        doc["variant"]["S0"] = [[[0, 0]]]
        with pytest.raises(ConfigFormatError):
            system_from_dict(doc)

    def test_model_errors_become_format_errors(self, corpus):
        doc = copy.deepcopy(corpus["delta_N2_m1"].raw["system"])
        doc["variant"]["sites"] = [5.0]
        with pytest.raises(ConfigFormatError, match="sites"):
            system_from_dict(doc)

    def test_complex_pairs(self):
        doc = {"variant": {"type": "trig", "e": 1.0}, "g": 0.4,
               "q0": [[0.0, 0.1], [1.0, 0.0]], "p0": [[0.0, 0.0], [0.0, -0.5]]}
        cfg = system_from_dict(doc)
        np.testing.assert_array_equal(cfg.q0, [0.1j, 1.0])
        np.testing.assert_array_equal(cfg.p0, [0.0, -0.5j])

    def test_breakpoint_ends_snap_to_pi(self, corpus):
        doc = copy.deepcopy(corpus["piecewise_N2_m2"].raw["system"])
        doc["variant"]["breakpoints"][0] = -3.14159265358979
        cfg = system_from_dict(doc)
        assert cfg.variant.breakpoints[0] == -np.pi


class TestRunDocuments:
    def test_valid(self, corpus):
        assert validate_run(_run_doc(corpus))["solver"] == "exact"

    def test_missing_output(self, corpus):
        doc = _run_doc(corpus)
        del doc["output"]
        with pytest.raises(ConfigFormatError):
            validate_run(doc)

    def test_times_and_grid_are_exclusive(self, corpus):
        doc = _run_doc(corpus)
        doc["output"]["times"] = [0.0, 1.0]
        with pytest.raises(ConfigFormatError):
            validate_run(doc)

    def test_wrong_schema_version(self, corpus):
        doc = _run_doc(corpus)
        doc["schema_version"] = 2
        with pytest.raises(ConfigFormatError):
            validate_run(doc)

    def test_error_names_location(self, corpus):
        doc = _run_doc(corpus)
        doc["integrator"] = {"method": "Euler"}
        with pytest.raises(ConfigFormatError, match="integrator/method"):
            validate_run(doc)

    def test_load(self, corpus, tmp_path):
        p = tmp_path / "run.json"
        p.write_text(json.dumps(_run_doc(corpus)))
        assert load_run_config(p)["output"]["dt_out"] == 0.25
        p.write_text("{not json")
        with pytest.raises(ConfigFormatError):
            load_run_config(p)
        with pytest.raises(ConfigFormatError):
            load_run_config(tmp_path / "missing.json")


class TestOutputTimes:
    def test_grid(self):
        np.testing.assert_allclose(output_times({"t_max": 1.0, "dt_out": 0.25}),
                                   [0, 0.25, 0.5, 0.75, 1.0])

    def test_grid_appends_t_max(self):
        np.testing.assert_allclose(output_times({"t_max": 1.0, "dt_out": 0.3}),
                                   [0, 0.3, 0.6, 0.9, 1.0])

    def test_explicit(self):
        np.testing.assert_array_equal(output_times({"times": [0.0, 0.5, 2.0]}), [0.0, 0.5, 2.0])
        with pytest.raises(ConfigFormatError):
            output_times({"times": [1.0, 0.5]})


class TestHash:
    def test_key_order_does_not_matter(self, corpus):
        a = _run_doc(corpus)
        b = json.loads(json.dumps(a, sort_keys=True))
        b = dict(reversed(list(b.items())))
        assert canonical_hash(a) == canonical_hash(b)
        assert len(canonical_hash(a)) == 64

    def test_content_matters(self, corpus):
        a = _run_doc(corpus)
        b = copy.deepcopy(a)
        b["system"]["g"] = 0.41
        assert canonical_hash(a) != canonical_hash(b)
