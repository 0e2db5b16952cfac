"""Communication rounds: local training, signature upload, server aggregation."""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import build_bases, client_signatures
from .collab import DEFAULT_OUTER_ITERS, solve_all_orders
from .exceptions import ConfigError
from .model import TrainConfig, evaluate, init_model, train_local

logger = logging.getLogger(__name__)

MODES = ("fedgsp", "uniform", "sharing_only", "complementing_only", "none")
_TERMS = {"fedgsp": "both", "sharing_only": "p", "complementing_only": "q"}


@dataclass(frozen=True)
class FedConfig:
    M: int = 6
    rounds: int = 100
    epochs: int = 1
    K: int = 4
    t: int = 1
    gamma: float = 1.0
    tau: float = 0.5
    lr: float = 0.05
    seed: int = 0
    mode: str = "fedgsp"
    init_scale: float = 0.1
    outer_iters: int = DEFAULT_OUTER_ITERS
    threads: int = 1

    def __post_init__(self):
        if self.rounds < 1:
            raise ConfigError(f"rounds={self.rounds} must be at least 1")
        if self.M < 1:
            raise ConfigError(f"M={self.M} must be at least 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode={self.mode!r} must be one of {MODES}")
        if self.K < 0:
            raise ConfigError(f"K={self.K} must be non-negative")
        if self.t < 1:
            raise ConfigError(f"t={self.t} must be at least 1")
        if not self.gamma > 0:
            raise ConfigError(f"gamma={self.gamma} must be positive")
        if self.epochs < 1:
            raise ConfigError(f"epochs={self.epochs} must be at least 1")
        if self.threads < 1:
            raise ConfigError(f"threads={self.threads} must be at least 1")

    def to_dict(self):
        return asdict(self)


@dataclass(eq=False)
class ClientState:
    graph: object
    bases: object
    model: object
    signatures: object = None


@dataclass
class RoundRecord:
    round: int
    clients: list
    mean_val: float
    mean_test: float
    objectives: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def aggregate_coefficients(coeffs, matrices):
    """Per-order weighted averaging: ``out[m, k] = sum_j W_k[m, j] * coeffs[j, k]``."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    out = np.empty_like(coeffs)
    for k, W in enumerate(matrices):
        out[:, k] = np.asarray(W) @ coeffs[:, k]
    return out


def aggregate_mlp(mlps, W):
    """Entrywise weighted averaging of classifier matrices with the rows of ``W``."""
    stack = np.stack([np.asarray(m, dtype=np.float64) for m in mlps])
    return list(np.tensordot(np.asarray(W), stack, axes=(1, 0)))


def uniform_matrices(M, K):
    U = np.full((M, M), 1.0 / M)
    return [U] * (K + 1), U


class Federation:
    """Mutable round-by-round state of a simulated federation.

    Parameters
    ----------
    cfg : FedConfig
    graphs : list of Graph
        One subgraph per client; ``len(graphs)`` must equal ``cfg.M``.
    """

    def __init__(self, cfg, graphs):
        if len(graphs) != cfg.M:
            raise ConfigError(f"config has M={cfg.M} but {len(graphs)} client graphs were given")
        for i, g in enumerate(graphs):
            if not np.any(g.train_mask):
                raise ConfigError(f"client {i} has an empty train mask")
        dims = {(g.num_features, g.num_classes) for g in graphs}
        if len(dims) != 1:
            raise ConfigError(f"clients disagree on (features, classes): {sorted(dims)}")
        self.cfg = cfg
        self.train_cfg = TrainConfig(epochs=cfg.epochs, lr=cfg.lr, seed=cfg.seed,
                                     init_scale=cfg.init_scale)
        d, c = dims.pop()
        shared = init_model(cfg.K, d, c, cfg.tau, cfg.init_scale, cfg.seed)
        self.clients = [ClientState(g, build_bases(g, cfg.K), shared.copy()) for g in graphs]
        self.round = 0
        self.last_solution = None

    def _map(self, fn, items):
        if self.cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.threads) as pool:
                return list(pool.map(fn, items))
        return [fn(x) for x in items]

    def _local_step(self, client):
        g = client.graph
        client.model = train_local(client.model, client.bases, g.labels, g.masks, self.train_cfg)
        client.signatures = client_signatures(client.bases, self.cfg.t)
        return client

    def _evaluate(self, client):
        g = client.graph
        return {split: evaluate(client.model, client.bases, g.labels, g.masks[split]).to_dict()
                for split in ("train", "val", "test") if np.any(g.masks[split])}

    def aggregate(self):
        """Server phase: solve collaboration strengths and push aggregated parameters."""
        cfg = self.cfg
        objectives = {}
        if cfg.mode == "none" or self.round == 0:
            return objectives
        if cfg.mode == "uniform":
            order_mats, mlp_mat = uniform_matrices(cfg.M, cfg.K)
        else:
            sol = solve_all_orders([c.signatures for c in self.clients], cfg.gamma,
                                   _TERMS[cfg.mode], cfg.outer_iters)
            self.last_solution = sol
            order_mats, mlp_mat = sol.matrices, sol.mlp.W
            objectives = {f"order_{k}": s.objective for k, s in enumerate(sol.orders)}
            objectives["mlp"] = sol.mlp.objective
        coeffs = aggregate_coefficients([c.model.coeffs for c in self.clients], order_mats)
        mlps = aggregate_mlp([c.model.w_mlp for c in self.clients], mlp_mat)
        for m, client in enumerate(self.clients):
            client.model = client.model.copy(coeffs=coeffs[m], w_mlp=mlps[m])
        return objectives

    def run_round(self):
        objectives = self.aggregate()
        self._map(self._local_step, self.clients)
        self.round += 1
        per_client = self._map(self._evaluate, self.clients)
        mean_val = float(np.mean([pc["val"]["accuracy"] for pc in per_client if "val" in pc]))
        mean_test = float(np.mean([pc["test"]["accuracy"] for pc in per_client if "test" in pc]))
        logger.debug("round %d: mean val %.4f, mean test %.4f", self.round, mean_val, mean_test)
        return RoundRecord(self.round, per_client, mean_val, mean_test, objectives)


def run_federation(cfg, graphs, on_record=None):
    """Run ``cfg.rounds`` rounds and pick the round with the best mean validation accuracy.

    Ties go to the earliest round. ``on_record(record, federation)`` is
    called as soon as each round finishes.

    Returns
    -------
    records : list of RoundRecord
    report : dict
        ``{"config", "best_round", "per_client_test", "mean_test"}``.
    """
    fed = Federation(cfg, graphs)
    records = []
    for _ in range(cfg.rounds):
        rec = fed.run_round()
        records.append(rec)
        if on_record is not None:
            on_record(rec, fed)
    best = max(records, key=lambda r: (r.mean_val, -r.round))
    per_client = [pc.get("test") for pc in best.clients]
    mean_test = {"accuracy": best.mean_test}
    aucs = [pc["auc"] for pc in per_client if pc and "auc" in pc]
    if aucs:
        mean_test["auc"] = float(np.mean(aucs))
    report = {
        "config": cfg.to_dict(),
        "best_round": best.round,
        "per_client_test": per_client,
        "mean_test": mean_test,
    }
    return records, report


def dumps_record(rec):
    return json.dumps(rec.to_dict(), sort_keys=False, separators=(",", ":"))
