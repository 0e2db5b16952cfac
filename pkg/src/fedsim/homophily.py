"""Edge, node and adjusted homophily of labeled graphs."""

import numpy as np

from .exceptions import DegenerateInputError

# Neutral estimate when no labeled edge is observable (theta = pi/4).
FALLBACK_HOMOPHILY = 0.5


def _same_label(g, edges=None):
    e = g.edges if edges is None else edges
    return g.labels[e[:, 0]] == g.labels[e[:, 1]]


def edge_homophily(g):
    """Fraction of edges joining same-label endpoints."""
    if g.num_edges == 0:
        raise DegenerateInputError("edge homophily is undefined for a graph without edges")
    return float(np.mean(_same_label(g)))


def node_homophily(g):
    """Mean over nodes of the fraction of same-label neighbors.

    Degree-0 nodes have no neighbor fraction and are left out of the mean.
    """
    deg = g.degrees()
    if not np.any(deg > 0):
        raise DegenerateInputError("node homophily needs at least one node with a neighbor")
    same = _same_label(g).astype(np.float64)
    hits = np.zeros(g.num_nodes)
    np.add.at(hits, g.edges[:, 0], same)
    np.add.at(hits, g.edges[:, 1], same)
    has = deg > 0
    return float(np.mean(hits[has] / deg[has]))


def degree_class_mass(g):
    """p̄(k) = D_k / 2e with D_k the total degree of class-k nodes."""
    deg = g.degrees().astype(np.float64)
    mass = np.bincount(g.labels, weights=deg, minlength=g.num_classes)
    return mass / (2.0 * g.num_edges)


def adjusted_homophily(g):
    """Edge homophily recentred by the degree-weighted class distribution.

    ``(h_edge - sum p̄²) / (1 - sum p̄²)``. Raises
    :class:`DegenerateInputError` when there are no edges or when all
    degree mass sits in a single class.
    """
    h = edge_homophily(g)
    expected = float(np.sum(degree_class_mass(g) ** 2))
    denom = 1.0 - expected
    if denom <= 1e-15:
        raise DegenerateInputError("adjusted homophily undefined: all degree mass lies in one class")
    return (h - expected) / denom


def estimate_train_homophily(g):
    """Edge homophily restricted to train-train edges, 0.5 when there are none."""
    if g.num_edges == 0:
        return FALLBACK_HOMOPHILY
    tr = g.masks["train"]
    keep = tr[g.edges[:, 0]] & tr[g.edges[:, 1]]
    if not np.any(keep):
        return FALLBACK_HOMOPHILY
    return float(np.mean(_same_label(g, g.edges[keep])))
