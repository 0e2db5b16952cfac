"""Per-client spectral filter + linear classifier, trained by full-batch descent."""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import log_softmax, softmax
from scipy.stats import rankdata

from ._random import rng_for
from .exceptions import ConfigError, DegenerateInputError, ValidationError

MAX_HALVINGS = 3


@dataclass(frozen=True, eq=False)
class LocalModel:
    """Filter coefficients ``coeffs[k]`` (one scalar per order) and classifier ``w_mlp`` (d x c)."""

    coeffs: np.ndarray
    w_mlp: np.ndarray
    tau: float = 0.5

    @property
    def K(self):
        return self.coeffs.shape[0] - 1

    def copy(self, **changes):
        new = replace(self, **changes)
        return replace(new, coeffs=np.array(new.coeffs, dtype=np.float64),
                       w_mlp=np.array(new.w_mlp, dtype=np.float64))

    def to_dict(self):
        return {
            "coeffs": self.coeffs.tolist(),
            "w_mlp": self.w_mlp.ravel(order="C").tolist(),
            "shape": list(self.w_mlp.shape),
            "tau": self.tau,
            "K": self.K,
        }

    @classmethod
    def from_dict(cls, obj):
        coeffs = np.asarray(obj["coeffs"], dtype=np.float64)
        if "K" in obj and int(obj["K"]) != coeffs.shape[0] - 1:
            raise ValidationError("K", f"K={obj['K']} disagrees with {coeffs.shape[0]} coefficients")
        w = np.asarray(obj["w_mlp"], dtype=np.float64).reshape(obj["shape"])
        return cls(coeffs=coeffs, w_mlp=w, tau=float(obj["tau"]))

    def __eq__(self, other):
        if not isinstance(other, LocalModel):
            return NotImplemented
        return (self.tau == other.tau and np.array_equal(self.coeffs, other.coeffs)
                and np.array_equal(self.w_mlp, other.w_mlp))

    __hash__ = None


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1
    lr: float = 0.05
    seed: int = 0
    init_scale: float = 0.1

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs={self.epochs} must be at least 1")
        if not self.lr >= 0:
            raise ConfigError(f"lr={self.lr} must be non-negative")


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    loss: float
    auc: float = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"accuracy": self.accuracy, "loss": self.loss}
        if self.auc is not None:
            out["auc"] = self.auc
        return out


def init_model(K, d, c, tau=0.5, init_scale=0.1, seed=0):
    """Identity-like filter (``coeffs = [1, 0, ..., 0]``) and a small random classifier."""
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau={tau} must lie in [0, 1]")
    coeffs = np.zeros(K + 1)
    coeffs[0] = 1.0
    w = rng_for(seed, "init", "w_mlp").uniform(-init_scale, init_scale, size=(d, c))
    return LocalModel(coeffs=coeffs, w_mlp=w, tau=float(tau))


def _check(model, bases):
    if bases.K != model.K:
        raise ValidationError("K", f"model has K={model.K} but bases have K={bases.K}")
    if bases.shape[1] != model.w_mlp.shape[0]:
        raise ValidationError(
            "w_mlp", f"classifier expects d={model.w_mlp.shape[0]}, bases have d={bases.shape[1]}"
        )


def forward(model, bases, mixed=None):
    """Filtered signal ``Z`` and class logits ``Z @ w_mlp``.

    The logits are returned raw; probabilities come from the softmax inside
    the loss.
    """
    _check(model, bases)
    B = bases.mixed(model.tau) if mixed is None else mixed
    Z = np.zeros_like(B[0])
    for w, b in zip(model.coeffs, B):
        Z += w * b
    return Z, Z @ model.w_mlp


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy of integer ``labels``."""
    logp = log_softmax(logits, axis=1)
    return float(-np.mean(logp[np.arange(labels.shape[0]), labels]))


def loss_and_gradients(model, bases, labels, mask, mixed=None):
    """Cross-entropy on the masked nodes and its exact gradients.

    Returns
    -------
    loss : float
    grad_coeffs : ndarray of shape (K + 1,)
    grad_mlp : ndarray of shape (d, c)
    """
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise DegenerateInputError("loss needs a non-empty mask")
    B = bases.mixed(model.tau) if mixed is None else mixed
    Z, logits = forward(model, bases, B)
    y = np.asarray(labels)[idx]

    G = softmax(logits[idx], axis=1)
    G[np.arange(idx.size), y] -= 1.0
    G /= idx.size
    loss = cross_entropy(logits[idx], y)

    grad_mlp = Z[idx].T @ G
    back = G @ model.w_mlp.T
    grad_coeffs = np.array([np.vdot(b[idx], back) for b in B])
    return loss, grad_coeffs, grad_mlp


def train_local(model, bases, labels, masks, cfg):
    """``cfg.epochs`` full-batch gradient steps on the train mask.

    A step that raises the loss is retried with half the step size, at most
    three times, after which the last candidate is accepted.
    """
    mask = masks["train"] if isinstance(masks, dict) else masks
    B = bases.mixed(model.tau)
    coeffs = np.array(model.coeffs, dtype=np.float64)
    w = np.array(model.w_mlp, dtype=np.float64)
    cur = model.copy(coeffs=coeffs, w_mlp=w)
    if cfg.lr == 0:
        return cur
    for _ in range(cfg.epochs):
        loss, gc, gw = loss_and_gradients(cur, bases, labels, mask, B)
        lr = cfg.lr
        for attempt in range(MAX_HALVINGS + 1):
            cand = replace(cur, coeffs=cur.coeffs - lr * gc, w_mlp=cur.w_mlp - lr * gw)
            new_loss = loss_and_gradients(cand, bases, labels, mask, B)[0]
            if new_loss <= loss or attempt == MAX_HALVINGS:
                break
            lr /= 2.0
        cur = cand
    return cur


def accuracy(logits, labels):
    return float(np.mean(np.argmax(logits, axis=1) == labels))


def roc_auc(scores, positive):
    """Area under the ROC curve via the Mann-Whitney rank statistic.

    Tied scores contribute one half. Returns None when one class is absent.
    """
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores)
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def evaluate(model, bases, labels, mask, mixed=None):
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise DegenerateInputError("evaluation needs a non-empty mask")
    _, logits = forward(model, bases, mixed)
    logits = logits[idx]
    y = np.asarray(labels)[idx]
    auc = None
    if logits.shape[1] == 2:
        auc = roc_auc(logits[:, 1] - logits[:, 0], y == 1)
    return Metrics(accuracy=accuracy(logits, y), loss=cross_entropy(logits, y), auc=auc)
