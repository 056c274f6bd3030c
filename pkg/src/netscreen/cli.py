"""``netscreen`` command-line entry point.

Every command is deterministic given its flags. Failures print a single line
``netscreen: error: <code>: <message>`` on stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

import jsonschema
import numpy as np

from .agents import ABLATIONS, FIT_SCHEDULES, OPTIMIZERS, SOSAgent, TrainConfig, LOG_COLUMNS
from .epidemic import EpidemicParams
from .graph import (
    generate_barabasi_albert,
    generate_erdos_renyi,
    load_edge_list,
    network_stats,
    format_edge_list,
)
from .harness import (
    POLICIES,
    ExperimentConfig,
    analysis_csv,
    derive_settings,
    horizon_sweep,
    policy_analysis,
    robustness_sweep,
    rows_to_csv,
    run_experiment,
    summary_csv,
)
from .neural import NORM_MODES

log = logging.getLogger("netscreen")

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

_PROB = {"type": "number", "minimum": 0, "maximum": 1}
_POS_INT = {"type": "integer", "minimum": 1}
_OPT_POS_INT = {"type": ["integer", "null"], "minimum": 1}

TRAIN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "epsilon": _PROB,
        "lr": {"type": "number", "minimum": 0},
        "episodes_per_iteration": _POS_INT,
        "iterations": {"type": "integer", "minimum": 0},
        "batch_size": _POS_INT,
        "k": _OPT_POS_INT,
        "num_secondary_agents": _OPT_POS_INT,
        "curriculum_warmup_episodes": _OPT_POS_INT,
        "ablation": {"enum": list(ABLATIONS)},
        "buffer_capacity": _POS_INT,
        "layer_sizes": {"type": "array", "items": _POS_INT, "minItems": 1},
        "norm_mode": {"enum": list(NORM_MODES)},
        "fit_schedule": {"enum": list(FIT_SCHEDULES)},
        "reward_scale": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "horizon": {"type": ["integer", "null"], "minimum": 0},
        "optimizer": {"enum": list(OPTIMIZERS)},
        "readout": {"type": "boolean"},
        "skip": {"type": "boolean"},
        "fit_epochs": _POS_INT,
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["gamma", "seed"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "gamma": _PROB,
        "beta_multiplier": {"type": "number", "minimum": 0},
        "budget_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "T": {"type": "integer", "minimum": 0},
        "trials": _POS_INT,
        "policy": {"enum": list(POLICIES)},
        "init_infect_prob": _PROB,
        "network": {"type": "string"},
        "train": TRAIN_SCHEMA,
    },
}

# keep the schema honest: it must list every dataclass field and nothing else
assert set(TRAIN_SCHEMA["properties"]) == {f.name for f in fields(TrainConfig)}
assert set(CONFIG_SCHEMA["properties"]) == {f.name for f in fields(ExperimentConfig)}


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", f"{self.prog}: {message}")


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CliError("io", f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliError("config", f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise CliError("config", f"{path}: at {where}: {exc.message}") from None
    return ExperimentConfig(**doc)


def _graph(path: str):
    try:
        return load_edge_list(path)
    except OSError as exc:
        raise CliError("io", f"cannot read graph {path}: {exc.strerror}") from None


def _write(out: str | None, text: str) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _csv_list(text: str, cast, flag: str) -> list:
    try:
        values = [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError("usage", f"{flag}: cannot parse {text!r}") from None
    if not values:
        raise CliError("usage", f"{flag}: empty list")
    return values


def _probability(text: str) -> float:
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {p}")
    return p


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> None:
    if args.model == "er":
        if args.p is None:
            raise CliError("usage", "gen --model er needs --p")
        net = generate_erdos_renyi(args.n, args.p, args.seed)
        header = f"erdos-renyi n={args.n} p={args.p!r} seed={args.seed}"
    else:
        if args.m is None:
            raise CliError("usage", "gen --model ba needs --m")
        if args.m >= args.n:
            raise CliError("usage", f"--m must be < --n (got m={args.m}, n={args.n})")
        net = generate_barabasi_albert(args.n, args.m, args.seed)
        header = f"barabasi-albert n={args.n} m={args.m} seed={args.seed}"
    _write(args.out, format_edge_list(net, header))


def cmd_stats(args) -> None:
    net = _graph(args.graph)
    name = args.name or Path(args.graph).stem
    _write(args.out, network_stats(net).to_csv_row(name))


def cmd_train(args) -> None:
    config = load_config(args.config)
    net = _graph(args.graph)
    beta, k = derive_settings(net, config)
    epidemic = EpidemicParams(beta, config.gamma, config.init_infect_prob)
    train_cfg = config.train or TrainConfig()
    agent = SOSAgent.from_config(train_cfg, random_state=config.seed)
    log.info("training on n=%d, beta=%.6g, k=%d, T=%d", net.n, beta, k, config.T)
    agent.fit(net, epidemic, k, config.T)
    out = Path(args.out_dir)
    agent.save(out)
    (out / "training_log.csv").write_text(
        rows_to_csv(agent.log_, LOG_COLUMNS, f"config: {config.fingerprint()}"))


def _load_agent(path: str, net, k: int, beta: float, gamma: float) -> SOSAgent:
    try:
        agent = SOSAgent.load(path, net)
    except FileNotFoundError as exc:
        raise CliError("io", f"cannot read checkpoint: {exc.filename}") from None
    if agent.k_ != k:
        raise CliError("checkpoint", f"checkpoint budget k={agent.k_} but config gives k={k}")
    if agent.epidemic_.beta != beta or agent.epidemic_.gamma != gamma:
        log.info("checkpoint was trained at beta=%.6g gamma=%.6g; evaluating at beta=%.6g "
                 "gamma=%.6g", agent.epidemic_.beta, agent.epidemic_.gamma, beta, gamma)
    return agent


def cmd_run(args) -> None:
    config = replace(load_config(args.config), policy=args.policy)
    net = _graph(args.graph)
    beta, k = derive_settings(net, config)
    policy = None
    if args.policy == "rl":
        if args.checkpoint is None:
            raise CliError("usage", "policy rl needs --checkpoint")
        policy = _load_agent(args.checkpoint, net, k, beta, config.gamma)
    result = run_experiment(net, config, policy=policy, threads=args.threads)
    _write(args.out, summary_csv([result.summary()], config))
    if args.results:
        Path(args.results).write_text(result.to_json(config))


def cmd_sweep(args) -> None:
    config = load_config(args.config)
    net = _graph(args.graph)
    policies = _csv_list(args.policies, str, "--policies")
    for p in policies:
        if p not in POLICIES:
            raise CliError("usage", f"--policies: unknown policy {p!r}")
    if "rl" in policies and config.train is None:
        raise CliError("config", "sweeping policy rl needs a 'train' block in the config")
    if args.kind == "horizon":
        values = _csv_list(args.values, int, "--values")
        if min(values) < 0:
            raise CliError("usage", "--values: horizons must be >= 0")
        rows = horizon_sweep(net, config, values, policies, threads=args.threads)
    else:
        values = _csv_list(args.values, float, "--values")
        bad = [v for v in values if not 0.0 <= v <= 1.0]
        if bad:
            raise CliError("usage", f"--values: fractions must lie in [0, 1], got {bad[0]}")
        rows = robustness_sweep(net, config, args.kind, values, policies, threads=args.threads)
    _write(args.out, summary_csv(rows, config, extra=("kind", "value")))


def cmd_analyze(args) -> None:
    try:
        doc = json.loads(Path(args.results).read_text())
    except OSError as exc:
        raise CliError("io", f"cannot read results {args.results}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliError("results", f"{args.results}: invalid JSON: {exc.msg}") from None
    counts = doc.get("pick_counts") if isinstance(doc, dict) else None
    if not counts or not doc.get("totals"):
        raise CliError("results", f"{args.results}: no trials or pick counts recorded")
    net = _graph(args.graph)
    try:
        analysis = policy_analysis(np.asarray(counts), net)
    except ValueError as exc:
        raise CliError("results", str(exc)) from None
    fingerprint = ExperimentConfig(**doc["config"]).fingerprint() if "config" in doc else "unknown"
    _write(args.out, analysis_csv(analysis, fingerprint))


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="netscreen", description="Active screening on contact networks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic contact network")
    p.add_argument("--model", choices=("er", "ba"), required=True)
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--p", type=_probability, help="edge probability (er)")
    p.add_argument("--m", type=_positive, help="attachments per new node (ba)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", help="output edge-list file (default: stdout)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("stats", help="print network statistics as CSV")
    p.add_argument("--graph", required=True)
    p.add_argument("--name", help="row label (default: file stem)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train the two-level screening agent")
    p.add_argument("--graph", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", help="evaluate one policy against no intervention")
    p.add_argument("--graph", required=True)
    p.add_argument("--policy", choices=POLICIES, required=True)
    p.add_argument("--checkpoint", help="trained agent directory (policy rl)")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="summary CSV (default: stdout)")
    p.add_argument("--results", help="also write per-trial results as JSON")
    p.add_argument("--threads", type=_positive, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="horizon or robustness sweep")
    p.add_argument("--kind", choices=("horizon", "edge", "node"), required=True)
    p.add_argument("--values", required=True, help="comma-separated horizons or fractions")
    p.add_argument("--policies", default="random,maxdegree,eigenvalue,none")
    p.add_argument("--graph", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--threads", type=_positive, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="per-node pick frequencies from a results file")
    p.add_argument("--results", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)
    return parser


def _setup_logging() -> None:
    level_name = os.environ.get("NETSCREEN_LOG", "error").lower()
    if level_name not in LOG_LEVELS:
        raise CliError("env", f"NETSCREEN_LOG must be one of {sorted(LOG_LEVELS)}, "
                              f"got {level_name!r}")
    logging.basicConfig(level=LOG_LEVELS[level_name], stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        args.func(args)
    except CliError as exc:
        print(f"netscreen: error: {exc.code}: {exc}", file=sys.stderr)
        return 2 if exc.code == "usage" else 1
    except (ValueError, RuntimeError) as exc:
        msg = " ".join(str(exc).split())
        print(f"netscreen: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
