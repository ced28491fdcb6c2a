"""Command line interface: simulate, discover, bench."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench, discovery, scm
from .graph import GroundTruthGraph
from .pooling import pool_data


def _cmd_simulate(args):
    cfg = json.loads(Path(args.config).read_text())
    seed = cfg.get("seed", 0)
    if cfg.get("preset") == "simplified":
        spec, graph = scm.simplified_preset()
    else:
        spec, graph = scm.generate_random_model(
            n_system=cfg.get("n_system", 5),
            n_temporal_ctx=cfg.get("n_temporal_ctx", 2),
            n_spatial_ctx=cfg.get("n_spatial_ctx", 1),
            frac_observed=cfg.get("frac_observed", 0.5),
            seed=seed,
            max_lag=cfg.get("max_lag", 3),
            lag_free=cfg.get("lag_free", False))
    dc = scm.simulate(spec, M=cfg.get("M", 10), T=cfg.get("T", 100),
                      burn_in=cfg.get("burn_in", 100),
                      seed=cfg.get("data_seed", seed + 1))
    out = Path(args.out)
    dc.to_dir(out, spec=spec, seed=seed)
    (out / "ground_truth.txt").write_text(graph.to_text())
    print(f"wrote {dc.M} datasets of length {dc.T} to {out}")
    return 0


def _cmd_discover(args):
    data_dir = Path(args.data)
    dc = scm.DatasetCollection.from_dir(data_dir)
    ground_truth = None
    gt_path = data_dir / "ground_truth.txt"
    if gt_path.exists():
        ground_truth = GroundTruthGraph.from_text(gt_path.read_text())
    if args.dump_pooled:
        pooled = pool_data(dc, max(args.tau_max, 1))
        Path(args.dump_pooled).write_text(pooled.to_csv())
    result = discovery.estimate_graph(
        dc, variant=args.variant, ci=args.ci, ground_truth=ground_truth,
        tau_max=args.tau_max, alpha=args.alpha, lag_free=args.lag_free,
        workers=args.workers)
    text = result.graph.to_text()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_bench(args):
    cfg = bench.ExperimentConfig.from_json(Path(args.config).read_text())
    rows, failures = bench.run_experiment(cfg, out_dir=args.out,
                                          workers=args.workers)
    print(f"wrote {len(rows)} result rows to {args.out}")
    if failures:
        print(f"{len(failures)} cell realizations failed "
              f"(see failures.json)", file=sys.stderr)
        return 1
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="jtscd",
        description="Causal discovery for multi-dataset time series with "
                    "observed and latent contexts")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate and simulate a model")
    p_sim.add_argument("--config", required=True, help="JSON model config")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.set_defaults(func=_cmd_simulate)

    p_disc = sub.add_parser("discover", help="run causal discovery on a dataset")
    p_disc.add_argument("--data", required=True, help="simulate output directory")
    p_disc.add_argument("--alpha", type=float, default=0.05)
    p_disc.add_argument("--tau-max", type=int, default=2, dest="tau_max")
    p_disc.add_argument("--ci", "--ci-test", dest="ci",
                        choices=("parcorr", "oracle"), default="parcorr")
    p_disc.add_argument("--variant", choices=discovery.VARIANTS,
                        default="jpcmci+")
    p_disc.add_argument("--lag-free", action="store_true", dest="lag_free")
    p_disc.add_argument("--workers", type=int, default=None)
    p_disc.add_argument("--dump-pooled", default=None, dest="dump_pooled",
                        help="write the pooled design matrix CSV here")
    p_disc.add_argument("--out", default=None, help="graph output file")
    p_disc.set_defaults(func=_cmd_discover)

    p_bench = sub.add_parser("bench", help="run a benchmark grid")
    p_bench.add_argument("--config", required=True, help="JSON experiment config")
    p_bench.add_argument("--out", required=True, help="output directory")
    p_bench.add_argument("--workers", type=int, default=None)
    p_bench.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
