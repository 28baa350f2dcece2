"""Command-line surface: generate synthetic graphs, train, re-evaluate saved
models, and render trace reports.

All diagnostics go to stderr; the trace stream and result files never carry
error text. Exit status 0 means the command completed.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import graph as graph_mod
from . import metrics
from .aggregation import classifier_probs, GnnParameters
from .config import ConfigError, RunConfig, load_config
from .report import render_report
from .trace import final_record, write_trace, TraceError
from .training import fit


class CliError(RuntimeError):
    pass


def _default_out():
    return os.environ.get("RELSIFT_OUT", "out")


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    for item in args.set or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise CliError(f"--set expects section.key=value, got {item!r}")
        dotted, value = item.split("=", 1)
        section, key = dotted.split(".", 1)
        cfg.set(section.strip(), key.strip(), value.strip())
    if args.seed is not None:
        cfg.set("train", "seed", args.seed, parse=False)
    if args.out is not None:
        cfg.set("output", "dir", args.out, parse=False)
    return cfg


def _out_dir(cfg) -> Path:
    out = Path(cfg.get("output", "dir") or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args):
    cfg = _resolve_config(args)
    out = _out_dir(cfg)
    g = graph_mod.generate_synthetic(cfg.synthetic_spec())
    paths = graph_mod.save_graph(g, out)
    stats = graph_mod.empirical_relation_stats(g)
    stats_path = out / "stats.json"
    stats_path.write_text(json.dumps([asdict(s) for s in stats], indent=2) + "\n")
    paths.append(stats_path)
    print(f"wrote {len(paths)} files to {out}")
    for s in stats:
        feat = "absent" if s.avg_feature_similarity is None else f"{s.avg_feature_similarity:.4f}"
        lab = "absent" if s.avg_label_similarity is None else f"{s.avg_label_similarity:.4f}"
        print(f"  {s.name}: edges={s.edge_count} feature_sim={feat} label_sim={lab}")
    return 0


def cmd_train(args):
    cfg = _resolve_config(args)
    out = _out_dir(cfg)
    g = cfg.load_graph()
    train_cfg = cfg.train_config()
    (out / "resolved_config.txt").write_text(cfg.serialize())

    result = fit(g, train_cfg)
    names = [rel.name for rel in g.relations]
    final = final_record(result.report, result.state.thresholds, names,
                         result.state.positive)
    trace_path = out / cfg.get("output", "trace")
    write_trace(trace_path, result.trace + [final])

    model_path = out / "model.npz"
    np.savez(
        model_path,
        embeddings=result.embeddings,
        clf_w=result.state.gnn.clf_w,
        clf_b=result.state.gnn.clf_b,
        thresholds=result.state.thresholds,
        labels=g.labels,
        train_idx=g.train_idx,
        val_idx=g.val_idx,
        test_idx=g.test_idx,
        positive=result.state.positive,
        seed=train_cfg.seed,
        relation_names=np.array(names),
        num_nodes=g.num_nodes,
    )

    verbosity = cfg.get("output", "verbosity")
    if verbosity:
        print(f"trace: {trace_path}")
        print(f"model: {model_path}")
    print("final thresholds:")
    for l, row in enumerate(result.state.thresholds, start=1):
        rendered = ", ".join(f"{name}={p:.4f}" for name, p in zip(names, row))
        print(f"  layer {l}: {rendered}")
    _print_report(result.report)
    return 0


def _print_report(report, split="test"):
    print(f"{split} metrics:")
    for key, value in report.to_dict().items():
        if isinstance(value, float):
            print(f"  {key} = {value:.4f}")
        else:
            print(f"  {key} = {value}")


def _eval_from_model(model_path, graph=None, split="test"):
    try:
        data = np.load(model_path, allow_pickle=False)
    except FileNotFoundError:
        raise CliError(f"model file not found: {model_path}")
    for key in ("embeddings", "clf_w", "clf_b", "labels", "test_idx", "positive"):
        if key not in data:
            raise CliError(f"model file {model_path} is missing {key!r}")
    if graph is not None:
        if graph.num_nodes != int(data["num_nodes"]):
            raise CliError("model and graph disagree on node count")
        if not np.array_equal(graph.labels, data["labels"]):
            raise CliError("model and graph disagree on labels")
    if split not in ("train", "val", "test"):
        raise CliError(f"--split must be train, val or test, got {split!r}")
    emb = data["embeddings"]
    idx = data[f"{split}_idx"]
    if len(idx) == 0:
        raise CliError(f"model has an empty {split} split")
    positive = int(data["positive"])
    probs = classifier_probs(_clf_view(data), emb[idx])
    return metrics.evaluate(probs, data["labels"][idx], emb[idx],
                            positive=positive, cluster_seed=int(data["seed"]))


def _clf_view(data):
    view = GnnParameters.__new__(GnnParameters)
    view.clf_w = data["clf_w"]
    view.clf_b = data["clf_b"]
    return view


def cmd_eval(args):
    graph = None
    if args.config:
        cfg = _resolve_config(args)
        graph = cfg.load_graph()
    report = _eval_from_model(args.model, graph, split=args.split)
    _print_report(report, split=args.split)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return 0


def cmd_report(args):
    out = Path(args.out or _default_out())
    written = render_report(args.trace, out)
    if not written:
        raise CliError(f"trace {args.trace} holds no epoch records")
    for path in written:
        print(path)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="relsift",
        description="multi-relational graph learning with "
                    "reinforcement-guided neighbor filtering")
    sub = parser.add_subparsers(dest="command", required=True)

    def _common(p, config=True):
        if config:
            p.add_argument("--config", help="config file path")
            p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                           help="override a config key (repeatable)")
            p.add_argument("--seed", type=int, help="override train.seed")
        p.add_argument("--out", help="output directory "
                                     "(default: $RELSIFT_OUT or ./out)")

    p_gen = sub.add_parser("generate", help="write a synthetic graph to disk")
    _common(p_gen)
    p_gen.set_defaults(func=cmd_generate)

    p_train = sub.add_parser("train", help="train and emit trace + model + report")
    _common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="recompute metrics from a saved model")
    _common(p_eval)
    p_eval.add_argument("--model", required=True, help="model.npz from train")
    p_eval.add_argument("--split", default="test", choices=("train", "val", "test"),
                        help="which split to score (default test)")
    p_eval.set_defaults(func=cmd_eval)

    p_rep = sub.add_parser("report", help="render figures and CSV from a trace")
    p_rep.add_argument("--trace", required=True, help="trace file from train")
    p_rep.add_argument("--out", help="output directory")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigError, TraceError, graph_mod.GraphError,
            metrics.MetricError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
