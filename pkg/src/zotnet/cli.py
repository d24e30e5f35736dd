"""Command line: ``zotnet gen-data | train | simulate | compare``.

Exit status is 0 on success, 1 on a usage error and 2 on a runtime error; any
error prints one diagnostic line on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import pipeline
from .config import SimulationConfig
from .predictor import TwoPhaseModel, cluster_personas, train
from .synth import emit_dataset, read_dataset

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _config(args) -> SimulationConfig:
    cfg = SimulationConfig.load(args.config) if args.config else SimulationConfig()
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    return cfg


def cmd_gen_data(args) -> None:
    cfg = _config(args)
    emit_dataset(cfg.personas(), cfg.dev_users_per_persona, cfg.dev_duration_s, cfg.seed, path=args.out,
                 cfg=cfg.cell, demands=cfg.demands, ts_len=cfg.ts_len_s)


def cmd_train(args) -> None:
    cfg = _config(args)
    df = read_dataset(args.dataset)
    if df.empty:
        raise ValueError(f"{args.dataset} holds no samples")
    label_col = "persona_id"
    if cfg.withhold_personas:
        assign, _ = cluster_personas(df, cfg.num_clusters, cfg.seed, cfg.cell, cfg.demands)
        df = df.assign(cluster_id=df["user_id"].map(assign))
        label_col = "cluster_id"
    model, report = train(df, seed=cfg.seed, label_col=label_col, holdout=cfg.dev_holdout, cfg=cfg.cell,
                          demands=cfg.demands, min_bucket_samples=cfg.min_bucket_samples,
                          learning_rate=cfg.learning_rate, drift_threshold=cfg.drift_threshold)
    model.save(args.out)
    print(json.dumps(report.as_dict(), indent=2))


def cmd_simulate(args) -> None:
    cfg = _config(args)
    policy = args.policy or cfg.policy
    cfg = cfg.with_(policy=policy)
    model = None
    if cfg.policy == "personalized":
        if not args.model:
            raise UsageError("--model is required for the personalized policy")
        model = TwoPhaseModel.load(args.model)
    run = pipeline.run_production(cfg, model)
    pipeline.write_run(run, args.out, cfg)
    if model is not None and args.save_model:
        model.save(args.save_model)
    print(json.dumps(run.summary.to_dict(), indent=2))


def cmd_compare(args) -> None:
    runs = [pipeline.read_run(d) for d in (args.run_a, args.run_b)]
    (rec_a, sum_a), (rec_b, sum_b) = runs
    # treat the baseline run as the reference whichever order the runs come in
    if sum_a["policy"] == "baseline" and sum_b["policy"] != "baseline":
        (rec_a, sum_a), (rec_b, sum_b) = (rec_b, sum_b), (rec_a, sum_a)
    if sum_a["ts_len_s"] != sum_b["ts_len_s"]:
        raise ValueError("runs use different slot lengths")
    report = pipeline.compare(rec_a, rec_b, sum_a["ts_len_s"], sum_a["demands"], sum_a["warmup_s"])
    pipeline.write_comparison(report, args.out)
    print(json.dumps(report.to_dict(), indent=2))


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat JSON config (defaults if omitted)")
    common.add_argument("--seed", type=int, metavar="N", help="override the config seed")

    parser = _Parser(prog="zotnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", parents=[common], help="write a labelled development dataset")
    p.add_argument("--out", required=True, metavar="PATH")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="train the two-phase model on a dataset")
    p.add_argument("dataset", metavar="DATASET")
    p.add_argument("--out", required=True, metavar="PATH")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("simulate", parents=[common], help="run one policy over the configured day")
    p.add_argument("--model", metavar="PATH")
    p.add_argument("--policy", choices=["personalized", "baseline"])
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--save-model", metavar="PATH", help="write the online-updated model here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="saved resources and satisfaction of two runs")
    p.add_argument("run_a", metavar="DIR_A")
    p.add_argument("run_b", metavar="DIR_B")
    p.add_argument("--out", required=True, metavar="PATH")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except UsageError as e:
        print(f"zotnet: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001 - every runtime failure becomes exit status 2
        print(f"zotnet: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
