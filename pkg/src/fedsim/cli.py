"""Command line: ``fedsim {gen,partition,train,analyze}``.

Configuration is a YAML file with the sections ``csbm``, ``partition``,
``data`` and ``federation`` plus a top-level ``seed``. Any value can be
overridden with a dotted flag such as ``--federation.gamma=1e-4``.
"""

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analysis import (CollabGraphView, frequency_component, heterogeneity, ratio_report,
                       spectral_profile)
from .basis import build_bases, client_signatures
from .exceptions import ConfigError, DegenerateInputError, FedSimError
from .fedrun import FedConfig, dumps_record, run_federation
from .graph import load_graph, save_graph
from .homophily import adjusted_homophily, edge_homophily, node_homophily
from .model import LocalModel
from .partition import MODES as PARTITION_MODES
from .partition import induce_subgraph, load_partition, partition, save_partition
from .scenarios import mixed_homophily_clients
from .synthetic import CsbmParams, generate_csbm

logger = logging.getLogger("fedsim")

LOG_LEVELS = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
SOURCES = ("mixed_homophily", "csbm", "file")
ANALYSES = ("homophily", "ratios", "profile", "heterogeneity")

_FED_KEYS = {f.name for f in fields(FedConfig)} - {"seed", "threads"}
_CSBM_KEYS = {f.name for f in fields(CsbmParams)} - {"seed"}
_SCHEMA = {
    "seed": None,
    "csbm": _CSBM_KEYS,
    "partition": {"mode", "M"},
    "data": {"source", "graph", "partition", "n", "d", "mu", "sigma_f", "n_homophilic",
             "n_heterophilic"},
    "federation": _FED_KEYS,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


# -- configuration ------------------------------------------------------------------

def load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    if cfg is None:
        return {}
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must be a mapping at the top level")
    return cfg


def apply_overrides(cfg, overrides):
    """Apply ``--a.b=value`` flags; values are parsed as YAML scalars."""
    for item in overrides:
        if not item.startswith("--") or "=" not in item:
            raise ConfigError(f"unrecognized argument {item!r}")
        key, raw = item[2:].split("=", 1)
        parts = key.split(".")
        node = cfg
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"config key {key!r} does not name a section")
        node[parts[-1]] = yaml.safe_load(raw)
    return cfg


def check_schema(cfg):
    for section, value in cfg.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config key {section!r}")
        allowed = _SCHEMA[section]
        if allowed is None:
            continue
        if not isinstance(value, dict):
            raise ConfigError(f"config key {section!r} must be a section")
        for key in value:
            if key not in allowed:
                raise ConfigError(f"unknown config key '{section}.{key}'")


def require(cfg, dotted):
    node = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"missing config key '{dotted}'")
        node = node[part]
    return node


def resolve_config(args):
    cfg = apply_overrides(load_config(args.config), args.overrides)
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg.setdefault("seed", 0)
    check_schema(cfg)
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool):
        raise ConfigError(f"seed must be an integer, got {cfg['seed']!r}")
    return cfg


def _build(cls, section, **extra):
    try:
        return cls(**section, **extra)
    except TypeError as exc:
        raise ConfigError(f"bad {cls.__name__} settings: {exc}") from None


# -- outputs -----------------------------------------------------------------------

def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


class Run:
    """Collects input/output digests and writes the manifest once at the end."""

    def __init__(self, command, cfg, out):
        self.command = command
        self.cfg = cfg
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.started = _now()
        self.inputs = {}
        self.outputs = []

    def input(self, path):
        self.inputs[str(path)] = sha256_file(path)
        return path

    def output(self, name):
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(path)
        return path

    def finish(self):
        manifest = {
            "tool": "fedsim",
            "version": __version__,
            "command": self.command,
            "seed": self.cfg.get("seed"),
            "config": self.cfg,
            "inputs": self.inputs,
            "outputs": {str(p.relative_to(self.out)): sha256_file(p) for p in self.outputs},
            "hash": "sha256",
            "started": self.started,
            "finished": _now(),
        }
        _dump_json(manifest, self.out / "manifest.json")
        logger.info("wrote %d files and manifest to %s", len(self.outputs), self.out)


# -- commands ----------------------------------------------------------------------

def client_graphs(cfg, run):
    data = cfg.get("data", {})
    source = require(cfg, "data.source")
    if source not in SOURCES:
        raise ConfigError(f"data.source={source!r} must be one of {SOURCES}")
    seed = cfg["seed"]
    if source == "mixed_homophily":
        keys = ("n", "d", "mu", "sigma_f", "n_homophilic", "n_heterophilic")
        return mixed_homophily_clients(seed, **{k: data[k] for k in keys if k in data})
    if source == "csbm":
        g = generate_csbm(_build(CsbmParams, cfg.get("csbm", {}), seed=seed))
    else:
        g = load_graph(run.input(require(cfg, "data.graph")))
    if "partition" in data:
        plan = load_partition(run.input(data["partition"]), g)
    else:
        plan = partition(g, require(cfg, "partition.mode"), require(cfg, "partition.M"), seed)
    return [induce_subgraph(g, s) for s in plan.sets]


def cmd_gen(args):
    cfg = resolve_config(args)
    params = _build(CsbmParams, cfg.get("csbm", {}), seed=cfg["seed"])
    run = Run("gen", cfg, args.out)
    g = generate_csbm(params)
    save_graph(g, run.output("graph.json"))
    logger.info("generated %d nodes, %d edges", g.num_nodes, g.num_edges)
    run.finish()


def cmd_partition(args):
    cfg = resolve_config(args)
    section = cfg.setdefault("partition", {})
    if args.mode is not None:
        section["mode"] = args.mode
    if args.M is not None:
        section["M"] = args.M
    mode, M = require(cfg, "partition.mode"), require(cfg, "partition.M")
    if not isinstance(M, int) or M < 1:
        raise ConfigError(f"partition M must be a positive integer, got {M!r}")
    if args.graph is None:
        raise ConfigError("partition needs --graph")
    run = Run("partition", cfg, args.out)
    g = load_graph(run.input(args.graph))
    plan = partition(g, mode, M, cfg["seed"])
    save_partition(plan, run.output("partition.json"))
    logger.info("%s partition into %d sets", mode, plan.M)
    run.finish()


def _collab_row(rec, fed):
    sol = fed.last_solution
    if sol is None or not rec.objectives:
        return None
    return {
        "round": rec.round,
        "orders": [{"W": s.W.tolist(), "r": s.r.tolist(), "s": s.s.tolist()} for s in sol.orders],
        "mlp": {"W": sol.mlp.W.tolist(), "r": sol.mlp.r.tolist(), "s": sol.mlp.s.tolist()},
    }


def cmd_train(args):
    cfg = resolve_config(args)
    fed_section = dict(require(cfg, "federation"))
    run = Run("train", cfg, args.out)
    graphs = client_graphs(cfg, run)
    if fed_section.setdefault("M", len(graphs)) != len(graphs):
        raise ConfigError(f"federation.M={fed_section['M']} but the data yields {len(graphs)} clients")
    fcfg = _build(FedConfig, fed_section, seed=cfg["seed"], threads=args.threads)

    for m, g in enumerate(graphs):
        save_graph(g, run.output(f"clients/graph_{m}.json"))

    log_path = run.output("rounds.jsonl")
    collab_path = run.output("collab.jsonl") if args.dump_collab else None
    final = {}
    with open(log_path, "w", encoding="utf-8") as log, \
            (open(collab_path, "w", encoding="utf-8") if collab_path else open(os.devnull, "w")) as clog:

        def on_record(rec, fed):
            log.write(dumps_record(rec) + "\n")
            row = _collab_row(rec, fed) if collab_path else None
            if row is not None:
                clog.write(json.dumps(row, separators=(",", ":")) + "\n")
            logger.info("round %d/%d mean val %.4f mean test %.4f", rec.round, fcfg.rounds,
                        rec.mean_val, rec.mean_test)
            final["fed"] = fed

        records, report = run_federation(fcfg, graphs, on_record)

    fed = final["fed"]
    # threads only affects scheduling, keep it out of the report
    report["config"].pop("threads")
    _dump_json(report, run.output("report.json"))
    _dump_json([c.model.to_dict() for c in fed.clients], run.output("models.json"))
    if args.dump_bases:
        for m, c in enumerate(fed.clients):
            b = c.bases
            arrays = {f"H{k}": h for k, h in enumerate(b.H)}
            arrays.update({f"U{k}": u for k, u in enumerate(b.U)})
            with open(run.output(f"bases/client_{m}.npz"), "wb") as fh:
                np.savez(fh, theta=b.theta, hhat=b.hhat, clamp_flags=np.asarray(b.clamp_flags),
                         **arrays)
    logger.info("best round %d, mean test accuracy %.4f", report["best_round"],
                report["mean_test"]["accuracy"])
    run.finish()


def _analysis_graphs(args, run):
    paths = list(args.graph or [])
    if args.run is not None:
        paths += sorted((Path(args.run) / "clients").glob("graph_*.json"),
                        key=lambda p: int(p.stem.split("_")[1]))
    if not paths:
        raise ConfigError("analysis needs --graph or --run")
    return [load_graph(run.input(p)) for p in paths]


def _load_models(path, run):
    with open(run.input(path), encoding="utf-8") as fh:
        obj = json.load(fh)
    return [LocalModel.from_dict(o) for o in (obj if isinstance(obj, list) else [obj])]


def cmd_analyze(args):
    cfg = resolve_config(args)
    run = Run(f"analyze {args.what}", cfg, args.out)
    if args.what == "homophily":
        rows = []
        for g in _analysis_graphs(args, run):
            try:
                adj = adjusted_homophily(g)
            except DegenerateInputError:
                adj = None
            rows.append({"edge": edge_homophily(g), "node": node_homophily(g), "adjusted": adj})
        _dump_json(rows, run.output("homophily.json"))
    elif args.what == "ratios":
        bundles = [client_signatures(build_bases(g, args.K), args.t) for g in _analysis_graphs(args, run)]
        _dump_json(ratio_report(bundles), run.output("ratios.json"))
    elif args.what == "profile":
        graphs = _analysis_graphs(args, run)
        if args.model is None:
            raise ConfigError("profile needs --model")
        models = _load_models(args.model, run)
        if len(models) == 1:
            models = models * len(graphs)
        if len(models) != len(graphs):
            raise ConfigError(f"{len(models)} models for {len(graphs)} graphs")
        for m, (model, g) in enumerate(zip(models, graphs)):
            prof = spectral_profile(model, g)
            run.output(f"profile_{m}.csv").write_text(prof.to_csv(), encoding="utf-8")
    else:
        if args.model is None and args.run is None:
            raise ConfigError("heterogeneity needs --model or --run")
        models = _load_models(args.model or Path(args.run) / "models.json", run)
        theta = np.vstack([np.concatenate([m.coeffs, m.w_mlp.ravel()]) for m in models])
        W = _last_mlp_matrix(args, run, len(models))
        view = CollabGraphView(theta, W)
        out = {"f": frequency_component(view), "H": heterogeneity(view)}
        if args.run is not None:
            bundles = [client_signatures(build_bases(g, models[0].K), args.t)
                       for g in _analysis_graphs(args, run)]
            rep = ratio_report(bundles)
            out.update(r_s=rep["r_s"], r_c=rep["r_c"])
        _dump_json(out, run.output("heterogeneity.json"))
    run.finish()


def _last_mlp_matrix(args, run, M):
    path = Path(args.run) / "collab.jsonl" if args.run is not None else None
    if path is None or not path.exists():
        return np.full((M, M), 1.0 / M)
    last = None
    with open(run.input(path), encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                last = json.loads(line)
    return np.full((M, M), 1.0 / M) if last is None else np.asarray(last["mlp"]["W"])


# -- entry point -------------------------------------------------------------------

def build_parser():
    common = _Parser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--seed", type=int, help="root seed (overrides the config)")
    common.add_argument("--out", default=".", help="output directory")

    parser = _Parser(prog="fedsim", description=__doc__.splitlines()[0], allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"fedsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("gen", parents=[common], allow_abbrev=False, help="generate a cSBM graph")

    p = sub.add_parser("partition", parents=[common], allow_abbrev=False, help="split a graph into clients")
    p.add_argument("--graph", help="graph JSON file")
    p.add_argument("--mode", choices=PARTITION_MODES)
    p.add_argument("--M", type=int, help="number of clients")

    p = sub.add_parser("train", parents=[common], allow_abbrev=False, help="run a federation")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--dump-bases", action="store_true", help="save every client's bases")
    p.add_argument("--dump-collab", action="store_true", help="log collaboration matrices per round")

    p = sub.add_parser("analyze", parents=[common], allow_abbrev=False, help="diagnostics")
    p.add_argument("what", choices=ANALYSES)
    p.add_argument("--graph", action="append", help="graph JSON file (repeatable)")
    p.add_argument("--run", help="output directory of a train run")
    p.add_argument("--model", help="model JSON (one model or a list)")
    p.add_argument("--K", type=int, default=4, help="basis order for signatures")
    p.add_argument("--t", type=int, default=1, help="singular vectors per signature")
    return parser


COMMANDS = {"gen": cmd_gen, "partition": cmd_partition, "train": cmd_train, "analyze": cmd_analyze}


def configure_logging():
    level_name = os.environ.get("FEDSIM_LOG", "info").lower()
    if level_name not in LOG_LEVELS:
        raise ConfigError(f"FEDSIM_LOG={level_name!r} must be one of {sorted(LOG_LEVELS)}")
    logging.basicConfig(level=LOG_LEVELS[level_name], stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)


def main(argv=None):
    try:
        configure_logging()
        args, extra = build_parser().parse_known_args(argv)
        args.overrides = extra
        if getattr(args, "threads", 1) < 1:
            raise ConfigError("--threads must be at least 1")
        COMMANDS[args.command](args)
    except FedSimError as exc:
        print(f"fedsim: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"fedsim: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
