"""Command-line interface round trips."""

import json

import pytest

from jtscd.cli import main
from jtscd.graph import TimeSeriesGraph, dummy_deletion, target_graph
from jtscd.graph import GroundTruthGraph


def write_sim_config(path, **overrides):
    cfg = {"n_system": 3, "n_temporal_ctx": 1, "n_spatial_ctx": 1,
           "frac_observed": 1.0, "M": 4, "T": 40, "seed": 5, "max_lag": 2,
           "burn_in": 20}
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return cfg


class TestSimulate:
    def test_writes_datasets_and_ground_truth(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        write_sim_config(cfg_path)
        out = tmp_path / "data"
        assert main(["simulate", "--config", str(cfg_path),
                     "--out", str(out)]) == 0
        assert (out / "meta.json").exists()
        assert (out / "data_000.csv").exists()
        assert (out / "ground_truth.txt").exists()
        GroundTruthGraph.from_text((out / "ground_truth.txt").read_text())

    def test_preset_mode(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"preset": "simplified", "M": 3,
                                        "T": 30, "burn_in": 10, "seed": 1}))
        out = tmp_path / "data"
        assert main(["simulate", "--config", str(cfg_path),
                     "--out", str(out)]) == 0
        meta = json.loads((out / "meta.json").read_text())
        assert meta["n_system"] == 2
        assert meta["observed_mask"] == [True, False, True, False]


class TestDiscover:
    def test_oracle_discovery_recovers_target(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        write_sim_config(cfg_path)
        data = tmp_path / "data"
        main(["simulate", "--config", str(cfg_path), "--out", str(data)])
        graph_out = tmp_path / "graph.txt"
        assert main(["discover", "--data", str(data), "--ci", "oracle",
                     "--tau-max", "2", "--out", str(graph_out)]) == 0
        est = TimeSeriesGraph.from_text(graph_out.read_text())
        truth = GroundTruthGraph.from_text(
            (data / "ground_truth.txt").read_text())
        tgt = target_graph(truth)
        est_adj = {(i, j, t) for (i, j, t, _) in dummy_deletion(est).edges()}
        tgt_adj = {(i, j, t) for (i, j, t, _) in tgt.edges()}
        assert est_adj == tgt_adj

    def test_dump_pooled_flag(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        write_sim_config(cfg_path, M=2, T=20)
        data = tmp_path / "data"
        main(["simulate", "--config", str(cfg_path), "--out", str(data)])
        pooled_csv = tmp_path / "pooled.csv"
        main(["discover", "--data", str(data), "--ci", "oracle",
              "--dump-pooled", str(pooled_csv), "--out",
              str(tmp_path / "g.txt")])
        lines = pooled_csv.read_text().splitlines()
        assert lines[0].startswith("dataset,t,System0")
        assert len(lines) == 2 * (20 - 2) + 1

    def test_stdout_output(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        write_sim_config(cfg_path, M=2, T=25)
        data = tmp_path / "data"
        main(["simulate", "--config", str(cfg_path), "--out", str(data)])
        capsys.readouterr()
        main(["discover", "--data", str(data), "--ci", "oracle"])
        out = capsys.readouterr().out
        assert out.startswith("graph ")

    def test_variant_switch(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        write_sim_config(cfg_path, M=3, T=30)
        data = tmp_path / "data"
        main(["simulate", "--config", str(cfg_path), "--out", str(data)])
        out = tmp_path / "g.txt"
        assert main(["discover", "--data", str(data), "--ci", "oracle",
                     "--variant", "pcmci+", "--out", str(out)]) == 0
        est = TimeSeriesGraph.from_text(out.read_text())
        assert all(r.value == "System" for r in est.roles)


class TestBenchCLI:
    def bench_config(self, path):
        cfg = {"t_values": [30], "m_values": [4],
               "frac_observed_values": [0.5],
               "variants": ["jpcmci+"], "n_realizations": 2, "n_system": 3,
               "n_temporal_ctx": 1, "n_spatial_ctx": 1, "tau_max": 2,
               "alpha": 0.05, "ci_test": "oracle", "max_model_lag": 2,
               "burn_in": 20, "master_seed": 3}
        path.write_text(json.dumps(cfg))

    def test_bench_outputs_and_determinism(self, tmp_path):
        cfg_path = tmp_path / "bench.json"
        self.bench_config(cfg_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["bench", "--config", str(cfg_path),
                     "--out", str(out_a)]) == 0
        assert main(["bench", "--config", str(cfg_path),
                     "--out", str(out_b), "--workers", "2"]) == 0
        assert ((out_a / "results.csv").read_bytes()
                == (out_b / "results.csv").read_bytes())
        assert (out_a / "summary.md").exists()
