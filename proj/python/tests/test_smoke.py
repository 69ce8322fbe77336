# SPDX-License-Identifier: Apache-2.0
import csv
import json

import pytest

import dni


@pytest.fixture(scope="session")
def digits_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("digits")
    dni.make_synthetic_digits(str(d), 256, 64, 7)
    return str(d)


def small_config(out_dir, data_dir, budget=3):
    return {
        "kind": "ff-mnist",
        "seed": 11,
        "budget": budget,
        "batch": 16,
        "out_dir": out_dir,
        "data_dir": data_dir,
        "ff": {"hidden": 16, "depth": 3, "sg_hidden_width": 8},
    }


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_verify_passes_clean():
    checks = dni.verify()
    assert len(checks) >= 10
    assert all(c["passed"] for c in checks), [c["name"] for c in checks if not c["passed"]]


def test_verify_corruption_hook():
    checks = dni.verify(corrupt="adam-step-reference")
    failed = [c["name"] for c in checks if not c["passed"]]
    assert failed == ["adam-step-reference"]
    with pytest.raises(ValueError):
        dni.verify(corrupt="not-a-check")


def test_run_writes_metrics_and_checkpoint(tmp_path, digits_dir):
    cfg = small_config(str(tmp_path / "out"), digits_dir)
    result = dni.run(cfg)
    assert result["steps"] == 3
    rows = read_rows(result["metrics_path"])
    assert [int(r["step"]) for r in rows] == [1, 2, 3]
    assert all(float(r["loss"]) > 0 for r in rows)
    records = dni.inspect_checkpoint(result["checkpoint_path"])
    assert records["version"] == 1
    keys = {r["key"] for r in records["records"]}
    assert {"meta.kind", "meta.step", "net.cls.W"} <= keys


def test_runs_are_deterministic(tmp_path, digits_dir):
    a = dni.run(small_config(str(tmp_path / "a"), digits_dir))
    b = dni.run(small_config(str(tmp_path / "b"), digits_dir))
    with open(a["metrics_path"]) as fa, open(b["metrics_path"]) as fb:
        assert fa.read() == fb.read()


def test_resume_matches_whole_run(tmp_path, digits_dir):
    whole = dni.run(small_config(str(tmp_path / "whole"), digits_dir, budget=4))
    part1 = dni.run(small_config(str(tmp_path / "p1"), digits_dir, budget=2))
    part2 = dni.run(
        small_config(str(tmp_path / "p2"), digits_dir, budget=4),
        resume=part1["checkpoint_path"],
    )
    whole_rows = read_rows(whole["metrics_path"])
    part2_rows = read_rows(part2["metrics_path"])
    assert part2_rows == [r for r in whole_rows if int(r["step"]) > 2]


def test_canonical_config_is_fixed_point():
    text = dni.canonical_config(json.dumps({"kind": "rnn-copy", "budget": 10}))
    assert dni.canonical_config(text) == text
    assert json.loads(text)["kind"] == "rnn-copy"
    with pytest.raises(ValueError):
        dni.canonical_config(json.dumps({"kind": "ff-mnist", "bogus": 1}))


def test_estimator_measurements_are_tiny():
    assert dni.bp_lambda_chain_divergence(4, 6, 4, 10, 1) <= 1e-12
    assert dni.lambda_simplex_deviation(100, 2) <= 1e-12
    assert dni.oracle_mixture_error(20, 3) <= 1e-12
    assert dni.rnn_window_recurrence_divergence(3, 2, 4) <= 1e-10
