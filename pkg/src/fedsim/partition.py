"""Split a global graph into per-client subgraphs.

Two protocols are supported. ``non_overlapping`` assigns every node to
exactly one client using a deterministic balanced region-growing
partitioner (a stand-in for METIS; external METIS output can be loaded
with :func:`load_partition`). ``overlapping`` first partitions into
``M // 5`` base parts and then draws five random half-samples from each.
"""

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from ._random import rng_for
from .exceptions import ConfigError, ValidationError
from .graph import make_graph

MODES = ("non_overlapping", "overlapping")
DRAWS_PER_PART = 5


@dataclass(frozen=True, eq=False)
class PartitionPlan:
    mode: str
    sets: tuple
    seed: int = 0
    base_sets: tuple = None
    base_index: tuple = None

    @property
    def M(self):
        return len(self.sets)

    def to_dict(self):
        return {"mode": self.mode, "M": self.M, "sets": [s.tolist() for s in self.sets]}

    def __eq__(self, other):
        if not isinstance(other, PartitionPlan):
            return NotImplemented
        return (
            self.mode == other.mode
            and self.M == other.M
            and all(np.array_equal(a, b) for a, b in zip(self.sets, other.sets))
        )

    __hash__ = None


def _neighbors(g):
    adj = g.adjacency()
    return [adj.indices[adj.indptr[i]:adj.indptr[i + 1]] for i in range(g.num_nodes)]


def _bfs_hops(nbrs, source, n):
    dist = np.full(n, np.inf)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if dist[v] == np.inf:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def _pick_seeds(nbrs, deg, M):
    n = len(nbrs)
    ids = np.arange(n)
    # max degree first, lowest id on ties
    first = int(np.lexsort((ids, -deg))[0])
    seeds = [first]
    nearest = _bfs_hops(nbrs, first, n)
    for _ in range(1, M):
        cand = np.where(np.isin(ids, seeds), -1.0, nearest)
        # farthest from current seeds; ties -> higher degree -> lower id
        order = np.lexsort((ids, -deg, -cand))
        nxt = int(order[0])
        seeds.append(nxt)
        nearest = np.minimum(nearest, _bfs_hops(nbrs, nxt, n))
    return seeds


def _region_grow(g, M):
    n = g.num_nodes
    nbrs = _neighbors(g)
    deg = g.degrees()
    cap = -(-n // M)
    hard_cap = 2 * cap

    owner = np.full(n, -1, dtype=np.int64)
    sizes = np.zeros(M, dtype=np.int64)
    seeds = _pick_seeds(nbrs, deg, M)
    frontiers = []
    for p, s in enumerate(seeds):
        owner[s] = p
        sizes[p] = 1
        frontiers.append(deque([s]))

    active = True
    while active:
        active = False
        for p in range(M):
            if sizes[p] >= cap:
                continue
            q = frontiers[p]
            while q:
                u = q[0]
                free = [v for v in nbrs[u] if owner[v] < 0]
                if not free:
                    q.popleft()
                    continue
                v = min(free)
                owner[v] = p
                sizes[p] += 1
                q.append(v)
                active = True
                break

    # leftovers: attach to the smallest adjacent part that has room
    changed = True
    while changed and np.any(owner < 0):
        changed = False
        for u in np.flatnonzero(owner < 0):
            parts = {int(owner[v]) for v in nbrs[u] if owner[v] >= 0}
            parts = [p for p in parts if sizes[p] < hard_cap]
            if parts:
                p = min(parts, key=lambda k: (sizes[k], k))
                owner[u] = p
                sizes[p] += 1
                changed = True
    for u in np.flatnonzero(owner < 0):
        p = int(np.argmin(sizes))
        owner[u] = p
        sizes[p] += 1
    return [np.flatnonzero(owner == p) for p in range(M)]


def partition_nonoverlapping(g, M, seed=0):
    """Disjoint, covering split of ``g`` into ``M`` connected-ish regions.

    Seeds are spread farthest-first in hop distance starting from the
    maximum-degree node, BFS regions grow round-robin up to ``ceil(n/M)``
    nodes, and nodes left over join the smallest adjacent region. No part
    exceeds ``2 * ceil(n/M)`` nodes. The result does not depend on
    ``seed``; it is recorded on the plan for provenance.
    """
    M = int(M)
    if M < 1:
        raise ConfigError(f"M={M} must be at least 1")
    if M > g.num_nodes:
        raise ConfigError(f"M={M} exceeds the number of nodes {g.num_nodes}")
    sets = tuple(_region_grow(g, M))
    return PartitionPlan("non_overlapping", sets, seed=int(seed))


def partition_overlapping(g, M, seed=0):
    M = int(M)
    if M < DRAWS_PER_PART or M % DRAWS_PER_PART:
        raise ConfigError(f"overlapping mode needs M divisible by 5 (got M={M})")
    base = partition_nonoverlapping(g, M // DRAWS_PER_PART, seed)
    sets, index = [], []
    for b, part in enumerate(base.sets):
        size = -(-part.size // 2)
        for draw in range(DRAWS_PER_PART):
            rng = rng_for(seed, "partition", "overlap", b, draw)
            sets.append(np.sort(rng.choice(part, size=size, replace=False)))
            index.append(b)
    return PartitionPlan("overlapping", tuple(sets), seed=int(seed),
                         base_sets=base.sets, base_index=tuple(index))


def partition(g, mode, M, seed=0):
    if mode == "non_overlapping":
        return partition_nonoverlapping(g, M, seed)
    if mode == "overlapping":
        return partition_overlapping(g, M, seed)
    raise ConfigError(f"unknown partition mode {mode!r}; expected one of {MODES}")


def induce_subgraph(g, nodes):
    """Subgraph on ``nodes``, relabelled 0..k-1 in ascending global id."""
    keep = np.unique(np.asarray(nodes, dtype=np.int64))
    local = np.full(g.num_nodes, -1, dtype=np.int64)
    local[keep] = np.arange(keep.size)
    e = g.edges
    inside = (local[e[:, 0]] >= 0) & (local[e[:, 1]] >= 0) if e.size else np.zeros(0, bool)
    edges = local[e[inside]] if e.size else np.zeros((0, 2), np.int64)
    masks = {name: m[keep] for name, m in g.masks.items()}
    return make_graph(keep.size, edges, g.features[keep], g.labels[keep],
                      num_classes=g.num_classes, masks=masks)


def validate_plan(plan, g):
    n = g.num_nodes
    for i, s in enumerate(plan.sets):
        if s.size and (s.min() < 0 or s.max() >= n):
            raise ValidationError("sets", f"client {i} references a node outside [0, {n})")
        if np.unique(s).size != s.size:
            raise ValidationError("sets", f"client {i} lists a node twice")
    if plan.mode == "non_overlapping":
        counts = np.bincount(np.concatenate(plan.sets) if plan.sets else np.zeros(0, np.int64),
                             minlength=n)
        missing = np.flatnonzero(counts == 0)
        if missing.size:
            raise ValidationError("sets", f"node {int(missing[0])} is not assigned to any client")
        twice = np.flatnonzero(counts > 1)
        if twice.size:
            raise ValidationError("sets", f"node {int(twice[0])} is assigned to more than one client")
    elif plan.mode == "overlapping":
        if plan.M % DRAWS_PER_PART:
            raise ValidationError("M", f"M divisible by 5 required in overlapping mode (got M={plan.M})")
    else:
        raise ValidationError("mode", f"unknown mode {plan.mode!r}")
    return plan


def save_partition(plan, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan.to_dict(), fh, separators=(",", ":"))
        fh.write("\n")


def load_partition(path, g):
    """Load an external plan (e.g. converted METIS output) and check it against ``g``."""
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError("file", f"parse error in {path}: {exc}") from exc
    for key in ("mode", "M", "sets"):
        if key not in obj:
            raise ValidationError(key, "missing key")
    sets = tuple(np.asarray(s, dtype=np.int64) for s in obj["sets"])
    if len(sets) != int(obj["M"]):
        raise ValidationError("M", f"declares M={obj['M']} but lists {len(sets)} sets")
    if obj["mode"] == "overlapping" and int(obj["M"]) % DRAWS_PER_PART:
        raise ValidationError("M", f"M divisible by 5 required in overlapping mode (got M={obj['M']})")
    plan = PartitionPlan(obj["mode"], sets, seed=int(obj.get("seed", 0)))
    return validate_plan(plan, g)
