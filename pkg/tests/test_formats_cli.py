import io
import json
import math
import warnings

import numpy as np
import pytest

from revchain import ChainSpec, ObservationWindow, mc_estimate, oracle_reverse, reverse_process
from revchain import cli
from revchain.errors import ClusterOutOfRange, EmptyCluster, ParseError, ValidationError
from revchain.formats import (
    ResultFile,
    emit_csv,
    emit_json,
    parse_cluster,
    parse_inputs,
    parse_json,
    read_csv_values,
    shipped_examples,
)
from revchain.reversal import ReversedProcess

S = [[0.5, 0.3, 0.2], [0.1, 0.6, 0.3], [0.2, 0.2, 0.6]]


@pytest.fixture
def chain_file(tmp_path):
    path = tmp_path / "chain.json"
    path.write_text(json.dumps({
        "num_states": 3,
        "transitions": {"homogeneous": S},
        "initial": [0.2, 0.5, 0.3],
    }))
    return path


def run(argv):
    out = io.StringIO()
    code = cli.main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def same_process(a: ReversedProcess, b: ReversedProcess) -> bool:
    return (
        a.pi.tobytes() == b.pi.tobytes()
        and a.p_mats.tobytes() == b.p_mats.tobytes()
        and a.row_defined.tobytes() == b.row_defined.tobytes()
        and a.pi_defined.tobytes() == b.pi_defined.tobytes()
        and float(a.e).hex() == float(b.e).hex()
        and a.policy is b.policy
        and a.engine == b.engine
        and a.meta == b.meta
    )


class TestParse:
    def test_well_formed(self, chain_file):
        chain, window = parse_inputs(chain_file, {"length": 3, "c0": "1,2", "cl": "3"})
        assert chain.num_states == 3 and chain.homogeneous
        assert window == ObservationWindow(3, {1, 2}, {3})

    def test_cluster_zero(self, chain_file):
        with pytest.raises(ClusterOutOfRange):
            parse_inputs(chain_file, {"length": 3, "c0": "0", "cl": "1"})

    def test_cluster_too_big(self, chain_file):
        with pytest.raises(ClusterOutOfRange):
            parse_inputs(chain_file, {"length": 3, "c0": "4", "cl": "1"})

    def test_cluster_empty(self, chain_file):
        with pytest.raises(EmptyCluster):
            parse_inputs(chain_file, {"length": 3, "c0": "", "cl": "1"})

    @pytest.mark.parametrize("text,expected", [("1,3", {1, 3}), ("2 3", {2, 3}), ([1, 1, 2], {1, 2})])
    def test_cluster_forms(self, text, expected):
        assert parse_cluster(text, 3) == expected

    def test_cluster_garbage(self):
        with pytest.raises(ParseError):
            parse_cluster("a,b", 3)

    def test_bad_json_has_location(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n "num_states": 2,\n "transitions": [\n}')
        with pytest.raises(ParseError, match=r"bad\.json:4:1"):
            parse_inputs(path, {"length": 1, "c0": "1", "cl": "1"})

    def test_validation_wrapped(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"transitions": {"homogeneous": [[0.5, 0.6], [0.3, 0.7]]}, "initial": [1, 0]}))
        with pytest.raises(ValidationError) as info:
            parse_inputs(path, {"length": 1, "c0": "1", "cl": "1"})
        assert info.value.cause.i == 1

    def test_window_sources(self, tmp_path, chain_file):
        doc = json.loads(chain_file.read_text())
        doc["window"] = {"length": 2, "c0": [1], "cl": [2]}
        chain_file.write_text(json.dumps(doc))
        wfile = tmp_path / "w.json"
        wfile.write_text(json.dumps({"length": 4, "c0": [3], "cl": [1, 2]}))
        assert parse_inputs(chain_file)[1] == ObservationWindow(2, {1}, {2})
        assert parse_inputs(chain_file, {"window": wfile})[1] == ObservationWindow(4, {3}, {1, 2})
        assert parse_inputs(chain_file, {"window": wfile, "c0": "2"})[1] == ObservationWindow(4, {2}, {1, 2})

    def test_missing_window(self, chain_file):
        with pytest.raises(ParseError):
            parse_inputs(chain_file, {"length": 2})


def _results():
    chain = ChainSpec.from_homogeneous([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.3, 0.3, 0.4]], [0.5, 0.2, 0.3])
    w = ObservationWindow(3, {1, 3}, {1, 3})
    out = []
    for policy in ("zero", "uniform", "flagged"):
        out.append(ResultFile(reverse_process(chain, w, policy), w))
    out.append(ResultFile(oracle_reverse(chain, w, "flagged"), w))
    est = mc_estimate(chain, w, 5000, seed=3)
    out.append(ResultFile(est.to_process(), w, {"e": est.e_se, "pi": est.pi_se, "P": est.p_se}))
    imp = ChainSpec.from_homogeneous([[0.6, 0.4], [0.0, 1.0]], [0.5, 0.5])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out.append(ResultFile(reverse_process(imp, ObservationWindow(2, {1}, {2}), "flagged"),
                              ObservationWindow(2, {1}, {2})))
    return out


@pytest.mark.parametrize("result", _results())
def test_json_round_trip(result):
    back = parse_json(emit_json(result))
    assert same_process(result.process, back.process)
    assert back.window == result.window
    if result.standard_errors is None:
        assert back.standard_errors is None
    else:
        for key in ("pi", "P"):
            assert np.asarray(result.standard_errors[key]).tobytes() == back.standard_errors[key].tobytes()
    assert emit_json(back) == emit_json(result)


@pytest.mark.parametrize("result", _results())
def test_csv_matches_json(result):
    doc = json.loads(emit_json(result))
    values = read_csv_values(emit_csv(result))
    assert values[("e", None, None, None)] == doc["e"]
    for k, row in enumerate(doc["pi"]):
        for i, v in enumerate(row):
            got = values[("pi", k, i + 1, None)]
            assert (v is None and math.isnan(got)) or got == v
    for k, mat in enumerate(doc["P"]):
        for i, row in enumerate(mat):
            for j, v in enumerate(row):
                got = values[("P", k, i + 1, j + 1)]
                assert (v is None and math.isnan(got)) or got == v


def test_result_document_fields():
    doc = json.loads(emit_json(_results()[0]))
    assert {"e", "pi", "P", "defined_mask", "policy", "engine", "version"} <= set(doc)
    assert doc["engine"] == "lemma" and doc["policy"] == "zero"
    assert len(doc["pi"]) == 4 and len(doc["P"]) == 3
    assert np.array(doc["defined_mask"]["P"]).shape == (3, 3, 3)


class TestCli:
    def test_reverse_remark2(self, chain_file):
        code, text = run(["reverse", "--chain", chain_file, "--length", 4, "--c0", "1,2,3", "--cl", "1,2,3"])
        assert code == 0
        doc = json.loads(text)
        for mat in doc["P"]:
            np.testing.assert_allclose(mat, S, atol=1e-12, rtol=0)

    def test_oracle_guard(self, tmp_path):
        path = tmp_path / "c4.json"
        path.write_text(json.dumps({"transitions": {"homogeneous": np.full((4, 4), 0.25).tolist()},
                                    "initial": [0.25] * 4}))
        code, _ = run(["oracle", "--chain", path, "--length", 12, "--c0", "1", "--cl", "1"])
        assert code == 3
        code, _ = run(["check", "--chain", path, "--length", 12, "--c0", "1", "--cl", "1"])
        assert code == 3

    def test_guard_env_override(self, tmp_path, monkeypatch):
        path = tmp_path / "c2.json"
        path.write_text(json.dumps({"transitions": {"homogeneous": [[0.5, 0.5], [0.5, 0.5]]}, "initial": [1, 0]}))
        monkeypatch.setenv("REVCHAIN_GUARD", "4")
        code, _ = run(["oracle", "--chain", path, "--length", 2, "--c0", "1", "--cl", "1"])
        assert code == 3

    @pytest.mark.parametrize("c0", ["0", ""])
    def test_input_errors(self, chain_file, c0):
        code, _ = run(["reverse", "--chain", chain_file, "--length", 2, "--c0", c0, "--cl", "1"])
        assert code == 1

    def test_usage_error_is_input_error(self, chain_file):
        with pytest.raises(SystemExit) as info:
            cli.main(["reverse", "--chain", str(chain_file), "--policy", "bogus"])
        assert info.value.code == 1

    def test_missing_file(self, tmp_path):
        code, _ = run(["reverse", "--chain", tmp_path / "nope.json", "--length", 2, "--c0", "1", "--cl", "1"])
        assert code == 1

    @pytest.mark.parametrize("path", shipped_examples(), ids=lambda p: p.stem)
    def test_check_shipped(self, path):
        code, text = run(["check", "--chain", path, "--samples", 20000, "--seed", 1])
        assert code == 0, text
        assert text.rstrip().endswith("result: PASS")

    def test_check_by_name(self):
        code, text = run(["check", "--example", "filo_store"])
        assert code == 0 and "C0={2,3}" in text

    def test_check_mismatch(self, chain_file, monkeypatch):
        real = cli.reverse_process

        def skewed(*args, **kw):
            proc = real(*args, **kw)
            p = proc.p_mats.copy()
            p[0, 0] += 1e-6
            return ReversedProcess(proc.pi, p, proc.e, proc.row_defined, proc.pi_defined, proc.policy)

        monkeypatch.setattr(cli, "reverse_process", skewed)
        code, text = run(["check", "--chain", chain_file, "--length", 3, "--c0", "1,2", "--cl", "3"])
        assert code == 2 and "FAIL" in text

    def test_simulate(self, chain_file, tmp_path):
        out = tmp_path / "mc.json"
        code, text = run(["simulate", "--chain", chain_file, "--length", 3, "--c0", "1,2", "--cl", "3",
                          "--samples", 20000, "--seed", 4, "--out", out])
        assert code == 0 and text == ""
        doc = json.loads(out.read_text())
        assert doc["engine"] == "mc" and "standard_errors" in doc
        assert doc["run"]["samples"] == 20000 and doc["run"]["seed"] == 4

    def test_simulate_impossible(self):
        code, _ = run(["simulate", "--example", "impossible_observation", "--samples", 1000, "--seed", 1])
        assert code == 1

    def test_csv_output(self, chain_file):
        code, text = run(["reverse", "--chain", chain_file, "--length", 2, "--c0", "1", "--cl", "2,3",
                          "--format", "csv"])
        assert code == 0
        assert text.splitlines()[0] == "quantity,k,i,j,value,defined,std_error"
        assert len(text.splitlines()) == 1 + 1 + 3 * 3 + 2 * 9

    def test_flagged_json_is_valid(self):
        code, text = run(["reverse", "--example", "impossible_observation", "--policy", "flagged"])
        assert code == 0
        doc = json.loads(text)
        assert doc["P"][1][0][0] is None
