"""Command-line entry point.

Every ``RunConfig`` field is one flag (``hidden_dim`` -> ``--hidden-dim``),
with three short aliases from the injection protocol: ``--np`` (clique
size), ``--q`` (clique count) and ``--k`` (candidate pool). Precedence is
flags > ``--config`` file > checkpoint header (score/eval) > defaults.

Exit codes: 0 success, 1 I/O, 2 configuration, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import shutil
import sys
from pathlib import Path

import torch

from .config import ConfigError, RunConfig
from .graph import DatasetError, load_dataset, load_labels, save_dataset, save_labels, split_temporal
from .inject import InjectionError
from .scoring import MetricError, evaluate, score_nodes
from .training import CheckpointError, NumericError, load_checkpoint, save_checkpoint, train, write_history

log = logging.getLogger("stripe_gad")

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

ALIASES = {"clique_size": ["--np"], "clique_count": ["--q"], "candidates": ["--k"]}
CHECKPOINT_NAME = "model.ckpt"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One flag per ``RunConfig`` field; unset flags stay absent from the namespace."""
    group = parser.add_argument_group("run configuration")
    for f in dataclasses.fields(RunConfig):
        names = [_flag(f.name)] + ALIASES.get(f.name, [])
        kw = {"dest": f.name, "default": argparse.SUPPRESS}
        if f.type in ("bool", bool):
            kw["action"] = argparse.BooleanOptionalAction
        elif f.type in ("list", list):
            kw["nargs"] = "*"
            kw["type"] = int if f.name == "bench_sizes" else str
        else:
            kw["type"] = {"int": int, "float": float, "str": str}.get(f.type, f.type)
        group.add_argument(*names, **kw)
    group.add_argument("--config", dest="_config", default=None, help="JSON config file")
    group.add_argument("--dump-config", dest="_dump", action="store_true",
                       help="print the resolved configuration and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stripe-gad", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("inject", "plant structural and attribute anomalies into the test split"),
        ("train", "fit a model on the training split"),
        ("score", "score test nodes with a trained checkpoint"),
        ("eval", "score and evaluate against labels.csv"),
        ("ablate", "train and evaluate every ablation variant"),
        ("bench", "time training and scoring on a synthetic size ladder"),
    ]:
        add_config_flags(sub.add_parser(name, help=help_text))
    return parser


def resolve_config(args: argparse.Namespace, base: dict | None = None) -> RunConfig:
    data = dict(base or {})
    if args._config:
        try:
            data.update(json.loads(Path(args._config).read_text()))
        except OSError as exc:
            raise CliError(f"cannot read config file: {exc}", EXIT_IO) from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args._config} is not valid JSON: {exc}") from None
    names = {f.name for f in dataclasses.fields(RunConfig)}
    data.update({k: v for k, v in vars(args).items() if k in names})
    return RunConfig.from_dict(data)


def _require(path: str, what: str) -> Path:
    if not path:
        raise ConfigError(f"--{what} is required")
    return Path(path)


def _checkpoint_path(rcfg: RunConfig) -> Path:
    return Path(rcfg.checkpoint) if rcfg.checkpoint else Path(rcfg.out) / CHECKPOINT_NAME


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --- subcommands ----------------------------------------------------------------------


def cmd_inject(rcfg: RunConfig) -> None:
    from .experiment import inject_test_split

    data = _require(rcfg.data, "data")
    graph = load_dataset(data)
    injected, labels = inject_test_split(graph, rcfg)
    out = Path(rcfg.out)
    save_dataset(injected, out)
    save_labels(labels, out / "labels.csv")
    log.info("wrote %d anomalous (node, t) pairs to %s", labels.count(), out)


def cmd_train(rcfg: RunConfig) -> None:
    graph = load_dataset(_require(rcfg.data, "data"))
    train_ts, _ = split_temporal(graph, rcfg.train_ratio, rcfg.tau)
    result = train(graph, rcfg.model_config(graph.D), rcfg.train_config(), train_ts)
    out = Path(rcfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = _checkpoint_path(rcfg)
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(result.model, ckpt, rcfg.to_dict())
    write_history(result.history, out / "loss.csv")
    log.info("checkpoint %s, %d loss rows", ckpt, len(result.history))


def _score(rcfg: RunConfig, args, want_report: bool) -> None:
    ckpt = _checkpoint_path(rcfg)
    if not ckpt.is_file():
        raise CliError(f"missing checkpoint: {ckpt}", EXIT_IO)
    model, header = load_checkpoint(ckpt)
    # checkpoint settings sit beneath the config file and explicit flags
    stored = {k: v for k, v in header["config"].get("run", {}).items()
              if k not in ("data", "out", "checkpoint")}
    rcfg = resolve_config(args, {**stored, **{k: getattr(rcfg, k) for k in ("data", "out", "checkpoint")}})
    data = _require(rcfg.data, "data")
    graph = load_dataset(data)
    if graph.D != model.cfg.in_dim:
        raise ConfigError(f"dataset has {graph.D} features, checkpoint expects {model.cfg.in_dim}")
    _, test_ts = split_temporal(graph, rcfg.train_ratio, model.cfg.tau)
    table = score_nodes(model, graph, test_ts, rcfg.train_config(), rcfg.rounds,
                        rcfg.edge_dropout, rcfg.seed, rcfg.score_attribution)
    out = Path(rcfg.out)
    out.mkdir(parents=True, exist_ok=True)
    table.write_csv(out / "scores.csv")
    if not want_report:
        return
    label_file = data / "labels.csv"
    if not label_file.is_file():
        log.warning("no labels.csv in %s: wrote scores only", data)
        return
    report = evaluate(table, load_labels(label_file, graph.num_nodes), rcfg.threshold_rule,
                      config=rcfg.to_dict())
    _write_json(report.to_dict(), out / "report.json")
    print(f"auc={report.auc:.4f} precision={report.precision:.4f} macro_f1={report.macro_f1:.4f}")


def cmd_ablate(rcfg: RunConfig) -> None:
    from .experiment import ablation_suite

    data = _require(rcfg.data, "data")
    graph = load_dataset(data)
    labels = load_labels(data / "labels.csv", graph.num_nodes)
    reports = ablation_suite(graph, labels, rcfg)
    out = Path(rcfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json({v: r.to_dict() for v, r in reports.items()}, out / "ablation.json")
    lines = ["variant,auc,precision,macro_f1"]
    lines += [f"{v},{r.auc!r},{r.precision!r},{r.macro_f1!r}" for v, r in reports.items()]
    (out / "ablation.csv").write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line)


def cmd_bench(rcfg: RunConfig) -> None:
    from .bench import run_bench, summarize, write_bench_csv

    rows = run_bench(rcfg)
    out = Path(rcfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_bench_csv(rows, out / "bench.csv")
    summary = summarize(rows)
    _write_json(summary, out / "bench_fit.json")
    for key, fit in summary.items():
        ratios = ", ".join(f"{r:.2f}" for r in fit["ratios"])
        print(f"{key}: t = {fit['slope']:.3e} * n + {fit['intercept']:.3e}; doubling ratios [{ratios}]")


COMMANDS = {
    "inject": cmd_inject,
    "train": cmd_train,
    "ablate": cmd_ablate,
    "bench": cmd_bench,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rcfg = resolve_config(args)
        if args._dump:
            sys.stdout.write(rcfg.dumps())
            return EXIT_OK
        torch.set_num_threads(rcfg.threads)
        if args.command in ("score", "eval"):
            _score(rcfg, args, want_report=args.command == "eval")
        else:
            COMMANDS[args.command](rcfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, InjectionError, MetricError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DatasetError, CheckpointError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())
