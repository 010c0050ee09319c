# Copyright 2026 The agile-sim Authors
# SPDX-License-Identifier: Apache-2.0
import pathlib

import pytest

import agile_sim

CONFIGS = pathlib.Path(__file__).resolve().parents[2] / "configs"


def test_ideal_speedup():
    assert agile_sim.ideal_speedup(0.0) == pytest.approx(1.0)
    assert agile_sim.ideal_speedup(1.0) == pytest.approx(2.0)
    assert agile_sim.ideal_speedup(2.0) == pytest.approx(1.5)


def test_config_roundtrip():
    cfg = agile_sim.Config.from_file(str(CONFIGS / "rand_read.conf"))
    assert cfg.experiment == "rand_read"
    cfg.set("queue_depth", 64).set("share_table.enabled", False)
    again = agile_sim.Config.from_text(cfg.to_text())
    assert again.to_text() == cfg.to_text()
    with pytest.raises(agile_sim.ConfigError):
        cfg.set("no_such_key", 1)


def test_deadlock_demo():
    cfg = agile_sim.Config.from_file(str(CONFIGS / "deadlock_demo.conf"))
    res = agile_sim.run_experiment("deadlock_demo", cfg)
    assert not res["agile_deadlock"]
    assert not res["naive"]["completed"]
    assert res["naive"]["reports"][0].startswith("DEADLOCK: task ")
    assert res["agile"]["completed"]
    assert res["agile"]["barriers_done"] == res["agile"]["barriers_total"] == 8
    table = agile_sim.rows(res)
    assert [r["mode"] for r in table] == ["naive", "agile"]


def test_rand_read_is_deterministic():
    cfg = agile_sim.Config().set("requests_per_thread", 4)
    a = agile_sim.rand_rw_point(cfg, "read", devices=2, inflight=16)
    b = agile_sim.rand_rw_point(cfg, "read", devices=2, inflight=16)
    assert a["elapsed_ns"] == b["elapsed_ns"]
    assert a["hygiene"]["digest"] == b["hygiene"]["digest"]
    assert a["hygiene"]["clean"]
    assert a["bytes"] == 16 * 4 * 4096


def test_coherence():
    on = agile_sim.coherence_run(seed=7)
    assert on["equivalent"]
    assert on["reads"] + on["writes"] == 32
    stale = sum(agile_sim.coherence_run(seed=s, share_table=False)["stale_reads"] for s in range(1, 21))
    assert stale > 0


def test_warp_coalesce():
    lanes = [(0, 5)] * 30 + [None, (1, 2)]
    r = agile_sim.warp_coalesce(lanes)
    assert r["unique"] == [(0, 5), (1, 2)]
    assert r["leaders"] == [0, 31]
    assert r["group"][30] == -1


def test_issuers_and_trace(tmp_path):
    cfg = agile_sim.Config()
    agile = agile_sim.issuers(cfg, "agile", depth=2)
    assert agile["completed"] and agile["hygiene"]["clean"]
    trace = tmp_path / "t.trace"
    res = agile_sim.run_experiment("deadlock_demo", cfg, trace_path=str(trace))
    assert trace.stat().st_size > 0
    assert res["hygiene"]["runs"] >= 1
    with pytest.raises(agile_sim.ConfigError):
        agile_sim.run_experiment("nope", cfg)
