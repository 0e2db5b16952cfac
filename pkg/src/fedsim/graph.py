"""Graph container, canonical file format and normalized operators."""

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import ValidationError

MASK_NAMES = ("train", "val", "test")


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected, unweighted node-classification graph.

    Parameters
    ----------
    num_nodes : int
    edges : ndarray of shape (e, 2)
        Unordered pairs stored as ``(min, max)``, sorted lexicographically.
    features : ndarray of shape (num_nodes, d)
    labels : ndarray of shape (num_nodes,)
    num_classes : int
    masks : dict
        ``{"train", "val", "test"}`` -> boolean arrays of length num_nodes.

    Use :func:`make_graph` to build one from loose inputs; it normalizes
    and validates. The constructor itself trusts its arguments.
    """

    num_nodes: int
    edges: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    masks: dict = field(default_factory=dict)

    @property
    def num_edges(self):
        return int(self.edges.shape[0])

    @property
    def num_features(self):
        return int(self.features.shape[1])

    @property
    def train_mask(self):
        return self.masks["train"]

    @property
    def val_mask(self):
        return self.masks["val"]

    @property
    def test_mask(self):
        return self.masks["test"]

    def degrees(self):
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        if self.num_edges:
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def adjacency(self):
        """Symmetric 0/1 adjacency as CSR."""
        n = self.num_nodes
        if self.num_edges == 0:
            return sp.csr_matrix((n, n), dtype=np.float64)
        u, v = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        data = np.ones(rows.shape[0], dtype=np.float64)
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.num_nodes == other.num_nodes
            and self.num_classes == other.num_classes
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and all(np.array_equal(self.masks[k], other.masks[k]) for k in MASK_NAMES)
        )

    __hash__ = None


def _as_mask(value, n, name):
    arr = np.asarray(value)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise ValidationError(f"masks.{name}", f"boolean mask must have length {n}")
        return arr.copy()
    ids = arr.astype(np.int64).ravel() if arr.size else np.zeros(0, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        bad = int(ids[(ids < 0) | (ids >= n)][0])
        raise ValidationError(f"masks.{name}", f"node id {bad} out of range [0, {n})")
    mask = np.zeros(n, dtype=bool)
    mask[ids] = True
    return mask


def make_graph(num_nodes, edges, features, labels, num_classes=None, masks=None):
    """Validate loose inputs and return a :class:`Graph`.

    ``masks`` values may be boolean vectors or lists of node ids. Missing
    masks are empty. Raises :class:`ValidationError` naming the offending
    field for self-loops, duplicate or out-of-range edges, overlapping masks
    and out-of-range labels.
    """
    n = int(num_nodes)
    if n < 0:
        raise ValidationError("num_nodes", "must be non-negative")

    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2) if len(edges) else np.zeros((0, 2), np.int64)
    if e.size:
        if e.min() < 0 or e.max() >= n:
            i = int(np.flatnonzero((e < 0).any(1) | (e >= n).any(1))[0])
            raise ValidationError("edges", f"edge {tuple(e[i])} has endpoint outside [0, {n})")
        loops = np.flatnonzero(e[:, 0] == e[:, 1])
        if loops.size:
            raise ValidationError("edges", f"self-loop at node {int(e[loops[0], 0])}")
        e = np.sort(e, axis=1)
        order = np.lexsort((e[:, 1], e[:, 0]))
        e = e[order]
        dup = np.flatnonzero((np.diff(e, axis=0) == 0).all(1))
        if dup.size:
            raise ValidationError("edges", f"duplicate edge {tuple(int(x) for x in e[dup[0]])}")

    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1 and n == 0:
        X = X.reshape(0, 0)
    if X.ndim != 2 or X.shape[0] != n:
        raise ValidationError("features", f"expected {n} rows, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("features", "non-finite value")

    y = np.asarray(labels, dtype=np.int64).ravel()
    if y.shape != (n,):
        raise ValidationError("labels", f"expected {n} labels, got {y.shape[0]}")
    c = int(num_classes) if num_classes is not None else (int(y.max()) + 1 if n else 0)
    if n and (y.min() < 0 or y.max() >= c):
        bad = int(np.flatnonzero((y < 0) | (y >= c))[0])
        raise ValidationError("labels", f"node {bad} has label {int(y[bad])} outside [0, {c})")

    masks = masks or {}
    m = {name: _as_mask(masks.get(name, []), n, name) for name in MASK_NAMES}
    for a, b in (("train", "val"), ("train", "test"), ("val", "test")):
        both = np.flatnonzero(m[a] & m[b])
        if both.size:
            raise ValidationError("masks", f"{a}/{b} overlap at node {int(both[0])}")

    X.setflags(write=False)
    y.setflags(write=False)
    e.setflags(write=False)
    for v in m.values():
        v.setflags(write=False)
    return Graph(num_nodes=n, edges=e, features=X, labels=y, num_classes=c, masks=m)


def graph_to_dict(g):
    """Canonical structured form, keys in fixed order."""
    return {
        "num_nodes": g.num_nodes,
        "num_classes": g.num_classes,
        "edges": g.edges.tolist(),
        "features": g.features.tolist(),
        "labels": g.labels.tolist(),
        "masks": {name: np.flatnonzero(g.masks[name]).tolist() for name in MASK_NAMES},
    }


def graph_from_dict(obj):
    if not isinstance(obj, dict):
        raise ValidationError("graph", "top-level value must be an object")
    for key in ("num_nodes", "edges", "features", "labels"):
        if key not in obj:
            raise ValidationError(key, "missing key")
    return make_graph(
        obj["num_nodes"],
        obj["edges"],
        obj["features"],
        obj["labels"],
        num_classes=obj.get("num_classes"),
        masks=obj.get("masks"),
    )


def save_graph(g, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(g), fh, separators=(",", ":"))
        fh.write("\n")


def load_graph(path):
    """Read a graph in the canonical JSON format.

    Raises
    ------
    ValidationError
        With ``field="file"`` for unparsable content, otherwise naming the
        field that breaks a graph invariant.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError("file", f"parse error in {path}: {exc}") from exc
    return graph_from_dict(obj)


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Symmetric sparse operator over the nodes of a graph."""

    matrix: sp.csr_matrix
    kind: str

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def entries(self):
        coo = self.matrix.tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def toarray(self):
        return self.matrix.toarray()

    def __matmul__(self, other):
        return self.matrix @ other


def _inv_sqrt_degree(g):
    deg = g.degrees().astype(np.float64)
    out = np.zeros_like(deg)
    nz = deg > 0
    out[nz] = 1.0 / np.sqrt(deg[nz])
    return out


def propagation_matrix(g):
    """D^{-1/2} A D^{-1/2}; rows of isolated nodes are zero."""
    s = sp.diags(_inv_sqrt_degree(g))
    P = (s @ g.adjacency() @ s).tocsr()
    P.sort_indices()
    return SparseOperator(P, "propagation")


def normalized_laplacian(g):
    """I - D^{-1/2} A D^{-1/2}, so that ``L + P == I`` entrywise."""
    P = propagation_matrix(g).matrix
    L = (sp.identity(g.num_nodes, format="csr") - P).tocsr()
    L.sort_indices()
    return SparseOperator(L, "laplacian")
