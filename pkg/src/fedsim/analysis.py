"""Diagnostics on the collaboration graph and on trained local filters."""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .basis import build_bases
from .collab import laplacian_of_collab
from .exceptions import ConfigError, DegenerateInputError
from .graph import normalized_laplacian
from .model import forward

SIMILAR_THRESHOLD = 0.5
MAX_PROFILE_NODES = 2000


@dataclass(frozen=True, eq=False)
class CollabGraphView:
    """Client parameters ``theta`` (one flattened row per client) on the graph ``W``."""

    theta: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        theta = np.atleast_2d(np.asarray(self.theta, dtype=np.float64))
        W = np.asarray(self.W, dtype=np.float64)
        if W.shape != (theta.shape[0], theta.shape[0]):
            raise ConfigError(f"W has shape {W.shape}, expected {(theta.shape[0],) * 2}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "W", W)

    @property
    def adjacency(self):
        A = (self.W + self.W.T) / 2.0
        np.fill_diagonal(A, 0.0)
        return A

    @property
    def laplacian(self):
        return laplacian_of_collab(self.W)

    @property
    def degree(self):
        return np.diag(self.adjacency.sum(axis=1))


def frequency_component(view):
    """``Tr(theta^T L theta) / 2``: how much parameter variation runs along collaboration edges."""
    return float(np.trace(view.theta.T @ view.laplacian @ view.theta) / 2.0)


def heterogeneity(view):
    """``sum_ij W_ij ||theta_i - theta_j||²`` over ordered pairs."""
    diff = view.theta[:, None, :] - view.theta[None, :, :]
    return float(np.sum(view.adjacency * np.einsum("ijk,ijk->ij", diff, diff)))


def similarity_matrix(bundles):
    """Shifted cosine ``(1 + cos(p̂_i, p̂_j)) / 2`` of homophily signatures, in [0, 1]."""
    X = np.vstack([b.p_hat for b in bundles])
    norms = np.linalg.norm(X, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    U = X / safe[:, None]
    cos = np.clip(U @ U.T, -1.0, 1.0)
    S = (1.0 + cos) / 2.0
    np.fill_diagonal(S, 1.0)
    return (S + S.T) / 2.0


def ratios(S, edges=None):
    """Fractions of similar (S >= 0.5) and complementary client pairs.

    ``edges`` is an iterable of client pairs; by default every unordered
    pair counts. Returns ``(r_s, r_c)`` with ``r_s + r_c == 1``.
    """
    S = np.asarray(S, dtype=np.float64)
    if edges is None:
        iu, ju = np.triu_indices(S.shape[0], k=1)
    else:
        pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        iu, ju = pairs[:, 0], pairs[:, 1]
    if iu.size == 0:
        raise DegenerateInputError("ratios need at least one client pair")
    similar = int(np.count_nonzero(S[iu, ju] >= SIMILAR_THRESHOLD))
    r_s = similar / iu.size
    return r_s, 1.0 - r_s


def ratio_report(bundles, edges=None):
    S = similarity_matrix(bundles)
    r_s, r_c = ratios(S, edges)
    return {"r_s": r_s, "r_c": r_c, "S": S.tolist()}


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    eigenvalues: np.ndarray
    magnitudes: np.ndarray

    def low_frequency_share(self, cutoff=1.0):
        return float(self.magnitudes[self.eigenvalues < cutoff].sum())

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "magnitude"])
        for lam, mag in zip(self.eigenvalues, self.magnitudes):
            w.writerow([repr(float(lam)), repr(float(mag))])
        return buf.getvalue()


def spectral_profile(model, graph, bases=None):
    """Energy of the filtered signal per Laplacian eigenvalue.

    The filtered signal ``Z`` is projected onto the eigenvectors of the
    normalised Laplacian; column energies are summed and normalised to one.
    Dense eigendecomposition, so limited to 2000 nodes. Bases are built
    from ``graph`` at the model's order when not given.
    """
    n = graph.num_nodes
    if n == 0:
        raise DegenerateInputError("spectral profile of an empty graph")
    if n > MAX_PROFILE_NODES:
        raise ConfigError(f"spectral profile limited to {MAX_PROFILE_NODES} nodes (got {n})")
    if bases is None:
        bases = build_bases(graph, model.K)
    lam, phi = np.linalg.eigh(normalized_laplacian(graph).toarray())
    Z, _ = forward(model, bases)
    energy = np.sum((phi.T @ Z) ** 2, axis=1)
    total = energy.sum()
    if not total > 0:
        raise DegenerateInputError("filtered signal carries no energy")
    return SpectralProfile(np.clip(lam, 0.0, None), energy / total)
