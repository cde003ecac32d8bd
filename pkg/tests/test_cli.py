import io
import json
import math

import numpy as np
import pytest

from exactquad.cli import chebyshev_sample_test, run
from exactquad.measure import IntervalSpec

UNIT_MEASURE = {
    "interval": {"lower": 0, "upper": 1, "lower_open": False, "upper_open": False},
    "density": "1",
    "atoms": [],
}


def invoke(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(path)


class TestSynthesizeCommand:
    def test_mean_of_uniform(self, tmp_path):
        path = write(tmp_path, "p.json",
                     {"functions": ["t"], "measure": UNIT_MEASURE})
        code, out, err = invoke(["synthesize", path])
        assert code == 0
        rule = json.loads(out)
        assert rule["nodes"] == pytest.approx([0.5], abs=1e-9)
        assert rule["weights"] == pytest.approx([1.0], rel=1e-10)
        assert rule["rank_used"] == 1
        assert "synthesized" in err

    def test_tolerances_block_and_flags(self, tmp_path):
        path = write(tmp_path, "p.json", {
            "functions": ["t", "t^2"],
            "measure": UNIT_MEASURE,
            "tolerances": {"grid0": 64},
        })
        code, out, _ = invoke(["synthesize", path, "--tol", "1e-9"])
        assert code == 0

    def test_malformed_json_offset(self, tmp_path):
        path = write(tmp_path, "bad.json", "{ nope")
        code, out, err = invoke(["synthesize", path])
        assert code == 2
        msg = json.loads(err.splitlines()[0])
        assert msg["kind"] == "schema"
        assert "offset 2" in msg["message"]

    def test_unknown_field_rejected(self, tmp_path):
        path = write(tmp_path, "p.json", {
            "functions": ["t"], "measure": UNIT_MEASURE, "extra": 1})
        code, _, err = invoke(["synthesize", path])
        assert code == 2
        assert json.loads(err.splitlines()[0])["kind"] == "schema"

    def test_expression_syntax_error_is_validation(self, tmp_path):
        path = write(tmp_path, "p.json", {
            "functions": ["t +"], "measure": UNIT_MEASURE})
        code, _, err = invoke(["synthesize", path])
        assert code == 2
        assert json.loads(err.splitlines()[0])["kind"] == "syntax"

    def test_numerical_failure_exit_code(self, tmp_path):
        measure = {
            "interval": {"lower": 0, "upper": 1,
                         "lower_open": True, "upper_open": False},
            "density": "1/t",
            "atoms": [],
        }
        path = write(tmp_path, "p.json", {"functions": ["t"], "measure": measure})
        code, _, err = invoke(["synthesize", path])
        assert code == 3
        assert json.loads(err.splitlines()[0])["kind"] == "divergent-mass"

    def test_missing_file(self):
        code, _, err = invoke(["synthesize", "/nonexistent/x.json"])
        assert code == 2

    def test_deterministic_output(self, tmp_path):
        path = write(tmp_path, "p.json", {
            "functions": ["cos(t)", "sin(t)", "t"],
            "measure": {"interval": {"lower": 0, "upper": 3,
                                     "lower_open": False, "upper_open": False},
                        "density": "1+t^2",
                        "atoms": [{"t": 1.5, "mass": 0.25}]},
        })
        outputs = {invoke(["synthesize", path])[1] for _ in range(3)}
        assert len(outputs) == 1


class TestVerifyCommand:
    def test_round_trip(self, tmp_path):
        prob = {"functions": ["cos(t)", "sin(t)"],
                "measure": {"interval": {"lower": 0, "upper": 3.14,
                                         "lower_open": False,
                                         "upper_open": False},
                            "density": "1", "atoms": []}}
        path = write(tmp_path, "p.json", prob)
        code, out, _ = invoke(["synthesize", path])
        assert code == 0
        prob["rule"] = json.loads(out)
        path2 = write(tmp_path, "v.json", prob)
        code2, out2, _ = invoke(["verify", path2])
        assert code2 == 0
        assert json.loads(out2)["passed"] is True


class TestReduceCommand:
    def test_three_to_two(self, tmp_path):
        path = write(tmp_path, "r.json", {
            "functions": ["t", "t^2"],
            "interval": {"lower": 0, "upper": 1,
                         "lower_open": False, "upper_open": False},
            "combination": {"params": [0.1, 0.5, 0.9],
                            "weights": [0.25, 0.5, 0.25],
                            "total": 1.0},
        })
        code, out, err = invoke(["reduce", path])
        assert code == 0
        comb = json.loads(out)
        assert len(comb["params"]) <= 2
        assert math.fsum(comb["weights"]) == pytest.approx(1.0, rel=1e-12)


class TestStatsCommands:
    def test_covwitness(self, tmp_path):
        path = write(tmp_path, "c.json",
                     {"f": "t", "g": "t", "measure": UNIT_MEASURE})
        code, out, _ = invoke(["covwitness", path])
        assert code == 0
        w = json.loads(out)
        assert abs(w["t1"] - w["t2"]) == pytest.approx(3 ** -0.5, abs=1e-6)

    def test_gruss(self, tmp_path):
        path = write(tmp_path, "g.json",
                     {"f": "t", "g": "t", "measure": UNIT_MEASURE})
        code, out, _ = invoke(["gruss", path])
        assert code == 0
        r = json.loads(out)
        assert r["slack"] == pytest.approx(1 / 6, abs=1e-9)

    def test_gruss_discrete_equality(self, tmp_path):
        path = write(tmp_path, "d.json",
                     {"p": [0.5, 0.5], "u": [0, 1], "v": [0, 1]})
        code, out, _ = invoke(["gruss-discrete", path])
        assert code == 0
        r = json.loads(out)
        assert r["lhs"] == 0.25 and r["bound"] == 0.25 and r["slack"] == 0.0


class TestChebyshevCommand:
    def test_order_system_has_no_witness(self):
        report = chebyshev_sample_test(["1", "t"], IntervalSpec(0, 1),
                                       trial_count=100, seed=42)
        assert report["witness"] is None

    def test_vandermonde_has_no_witness(self):
        report = chebyshev_sample_test(["1", "t", "t^2"], IntervalSpec(0, 1),
                                       trial_count=100, seed=42)
        assert report["witness"] is None

    def test_odd_pair_witness_found(self):
        # det = t1 t2 (t2^2 - t1^2) vanishes at t1 = -t2; the polished
        # witness must land on that antisymmetric configuration
        report = chebyshev_sample_test(["t", "t^3"], IntervalSpec(-1, 1),
                                       trial_count=100, seed=42)
        w = report["witness"]
        assert w is not None
        t1, t2 = w["tuple"]
        assert t1 == pytest.approx(-t2, abs=1e-6)
        assert abs(w["det"]) <= 1e-12 * w["scale"]

    def test_seed_recorded_and_deterministic(self, tmp_path):
        path = write(tmp_path, "ch.json", {
            "functions": ["t", "t^3"],
            "interval": {"lower": -1, "upper": 1,
                         "lower_open": False, "upper_open": False},
        })
        code, out1, _ = invoke(["chebyshev-test", path, "--seed", "7"])
        _, out2, _ = invoke(["chebyshev-test", path, "--seed", "7"])
        assert code == 0
        assert out1 == out2
        assert json.loads(out1)["seed"] == 7
