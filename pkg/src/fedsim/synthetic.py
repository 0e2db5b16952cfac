"""Contextual stochastic block model (cSBM) graphs with Gaussian features."""

from dataclasses import asdict, dataclass

import numpy as np

from ._random import rng_for
from .exceptions import ConfigError
from .graph import make_graph

TRAIN_FRACTION = 0.2
VAL_FRACTION = 0.4


@dataclass(frozen=True)
class CsbmParams:
    """Knobs of the generator.

    ``p_in``/``p_out`` are the intra/inter-class edge probabilities, so
    their ratio controls homophily. Class means are ``mu`` times distinct
    standard basis vectors (needs ``d >= c``), noise is N(0, sigma_f²).
    """

    n: int = 300
    c: int = 2
    d: int = 16
    p_in: float = 0.05
    p_out: float = 0.01
    mu: float = 1.0
    sigma_f: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("p_in", "p_out"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name}={p} must lie in [0, 1]")
        if not self.c >= 2:
            raise ConfigError(f"c={self.c} must be at least 2")
        if not self.n >= self.c:
            raise ConfigError(f"n={self.n} must be at least c={self.c}")
        if self.d < self.c:
            raise ConfigError(f"d={self.d} must be at least c={self.c} for orthogonal class means")
        if self.mu < 0:
            raise ConfigError(f"mu={self.mu} must be non-negative")
        if not self.sigma_f > 0:
            raise ConfigError(f"sigma_f={self.sigma_f} must be positive")

    def to_dict(self):
        return asdict(self)


def split_masks(n, rng):
    """Random 20/40/40 train/val/test split."""
    perm = rng.permutation(n)
    n_train = int(round(TRAIN_FRACTION * n))
    n_val = int(round(VAL_FRACTION * n))
    return {
        "train": np.sort(perm[:n_train]),
        "val": np.sort(perm[n_train:n_train + n_val]),
        "test": np.sort(perm[n_train + n_val:]),
    }


def generate_csbm(params):
    """Sample a :class:`~fedsim.graph.Graph` from the cSBM.

    Every unordered node pair is an edge independently with probability
    ``p_in`` (same class) or ``p_out`` (different classes). The output is a
    pure function of ``params``.
    """
    n, c, d = params.n, params.c, params.d

    labels = np.arange(n) % c
    rng_for(params.seed, "csbm", "labels").shuffle(labels)

    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], params.p_in, params.p_out)
    draw = rng_for(params.seed, "csbm", "edges").random(iu.shape[0])
    hit = draw < prob
    edges = np.stack([iu[hit], ju[hit]], axis=1)

    means = np.zeros((c, d))
    means[np.arange(c), np.arange(c)] = params.mu
    noise = rng_for(params.seed, "csbm", "features").normal(0.0, params.sigma_f, size=(n, d))
    features = means[labels] + noise

    masks = split_masks(n, rng_for(params.seed, "csbm", "masks"))
    return make_graph(n, edges, features, labels, num_classes=c, masks=masks)
