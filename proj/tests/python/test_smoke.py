import json

import pytest

import mlsim


def test_fault_free_runs_match_pinned_values():
    assert mlsim.run("cg", procs=16, iters=25)["metrics"]["final_metric_hex"] == "402ffb1abca4a426"
    assert mlsim.run("stencil", procs=27, iters=20)["metrics"]["final_metric_hex"] == "3f13b82c887ec93d"


def test_local_rollback_reproduces_fault_free_metric():
    ref = mlsim.run("cg", procs=16, cp_int=10, iters=20)["metrics"]
    out = mlsim.run("cg", procs=16, cp_int=10, iters=20, fail=["2:13:1"])
    m = out["metrics"]
    assert m["final_metric_hex"] == ref["final_metric_hex"]
    assert m["mode_taken"] == "local"
    assert m["recompute_iters_failed_rank"] == 3
    assert out["recoveries"][0]["failed"] == [2]


def test_hybrid_falls_back_to_global_late_in_interval():
    out = mlsim.run("stencil", procs=8, cp_int=10, iters=20, mode="hybrid", fail=["1:19:0"])
    assert out["recoveries"][0]["mode"] == "global"


def test_trace_is_jsonl():
    out = mlsim.run("stencil", procs=8, iters=4, cp_int=2, trace=True)
    lines = out["trace"].splitlines()
    assert lines
    assert all("op" in json.loads(line) for line in lines)


def test_sweep_points_all_match():
    out = mlsim.sweep("cg", procs=4, cp_int=4, iters=8, ranks=[1])
    assert len(out["points"]) == 4 * 4
    assert all(p["matches_baseline"] and p["ledger_matches"] for p in out["points"])
    assert out["csv"].startswith(mlsim.csv_header())


def test_verify_compares_run_directories(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    mlsim.run("cg", procs=4, out=str(a))
    mlsim.run("cg", procs=4, fail=["0:30:2"], out=str(b))
    assert mlsim.verify(str(a), str(b))


def test_errors_map_to_exception_types():
    with pytest.raises(mlsim.ConfigError):
        mlsim.run("cg", procs=3)
    with pytest.raises(mlsim.ConfigError):
        mlsim.run("cg", procs=4, fail=["9:3:0"])
    with pytest.raises(mlsim.IoError):
        mlsim.verify("/nonexistent/a", "/nonexistent/b")
