"""Server-side optimisation of client collaboration strengths.

For one order of bases the server minimises

    sum_ij ( ||R(p_i - p_j)||² w_ij - ||S(q_i - q_j)||² w_ij + gamma w_ij² )

over row-stochastic ``W`` and simplex attention vectors ``r`` (R = diag r)
and ``s`` (S = diag s), alternating closed-form updates of ``r`` and ``s``
with an exact per-row update of ``W``. Small homophily-signature distances
and large heterophily-signature distances both raise a collaboration
weight.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, NumericalError

ENERGY_FLOOR = 1e-12
NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 100
DEFAULT_OUTER_ITERS = 5
TERMS = ("both", "p", "q")


@dataclass(frozen=True, eq=False)
class CollabProblem:
    """Signatures of ``M`` clients for one order (or the concatenated MLP problem).

    ``terms`` selects which part of the pairwise cost is used: ``"both"``,
    ``"p"`` (homophily distances only) or ``"q"`` (heterophily only).
    """

    P: np.ndarray
    Q: np.ndarray
    gamma: float = 1.0
    terms: str = "both"

    def __post_init__(self):
        object.__setattr__(self, "P", np.atleast_2d(np.asarray(self.P, dtype=np.float64)))
        object.__setattr__(self, "Q", np.atleast_2d(np.asarray(self.Q, dtype=np.float64)))
        if self.P.shape != self.Q.shape:
            raise ConfigError(f"P {self.P.shape} and Q {self.Q.shape} must have the same shape")
        if not (np.all(np.isfinite(self.P)) and np.all(np.isfinite(self.Q))):
            raise NumericalError("signature matrices contain non-finite values")
        if not self.gamma > 0:
            raise ConfigError(f"gamma={self.gamma} must be positive")
        if self.terms not in TERMS:
            raise ConfigError(f"terms={self.terms!r} must be one of {TERMS}")

    @property
    def M(self):
        return self.P.shape[0]

    @property
    def D(self):
        return self.P.shape[1]


@dataclass(eq=False)
class CollabSolution:
    W: np.ndarray
    r: np.ndarray
    s: np.ndarray
    objective: list = field(default_factory=list)
    converged: bool = True
    degenerate_r: bool = False
    degenerate_s: bool = False


def laplacian_of_collab(W):
    """Unnormalised Laplacian of the symmetrised, loop-free collaboration graph."""
    W = np.asarray(W, dtype=np.float64)
    A = (W + W.T) / 2.0
    np.fill_diagonal(A, 0.0)
    return np.diag(A.sum(axis=1)) - A


def dirichlet_energies(X, L):
    """Column-wise quadratic forms ``x_[:,i]^T L x_[:,i]``."""
    return np.einsum("mi,mn,ni->i", X, L, X)


def attention_from_energies(energies):
    """Simplex weights proportional to ``1 / energy``.

    Energies at or below 1e-12 are floored to 1e-12 first, so a coordinate
    with (numerically) zero spread takes almost all of the mass. If every
    energy is floored the result is uniform and ``degenerate`` is True.

    Returns
    -------
    weights : ndarray
    degenerate : bool
    """
    e = np.asarray(energies, dtype=np.float64)
    if np.all(e <= ENERGY_FLOOR):
        return np.full(e.shape[0], 1.0 / e.shape[0]), True
    inv = 1.0 / np.maximum(e, ENERGY_FLOOR)
    return inv / inv.sum(), False


def update_attention(P, L):
    """Closed-form minimiser of ``sum_i r_i² e_i`` on the simplex."""
    return attention_from_energies(dirichlet_energies(P, L))[0]


def update_attention_neg(Q, L):
    """Heterophily attention ``s``; same closed form on the ``q`` energies."""
    return attention_from_energies(dirichlet_energies(Q, L))[0]


def pairwise_costs(problem, r, s):
    """Full ``M x M`` cost matrix ``t``; row ``i`` equals :func:`row_costs` for ``i``."""
    t = np.zeros((problem.M, problem.M))
    if problem.terms in ("both", "p"):
        Rp = problem.P * r
        t += _sq_dists(Rp)
    if problem.terms in ("both", "q"):
        Sq = problem.Q * s
        t -= _sq_dists(Sq)
    return t


def _sq_dists(X):
    diff = X[:, None, :] - X[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def row_costs(problem, r, s, i):
    """``t_ij = ||R p_i - R p_j||² - ||S q_i - S q_j||²`` for all ``j``."""
    t = np.zeros(problem.M)
    if problem.terms in ("both", "p"):
        dp = (problem.P[i] - problem.P) * r
        t += np.einsum("jk,jk->j", dp, dp)
    if problem.terms in ("both", "q"):
        dq = (problem.Q[i] - problem.Q) * s
        t -= np.einsum("jk,jk->j", dq, dq)
    return t


def shifted_targets(t, gamma):
    """``h_j = 1/M - t_j / 2gamma + sum(t) / 2 M gamma``; always sums to one."""
    t = np.asarray(t, dtype=np.float64)
    M = t.shape[0]
    return 1.0 / M - t / (2.0 * gamma) + t.sum() / (2.0 * M * gamma)


def newton_b_hat(h, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """Threshold ``b`` with ``sum_j (h_j - b)_+ = 1``, by Newton's method.

    Solves ``(1/M) sum_j (b - h_j)_+ - b + (sum(h) - 1)/M = 0``, a convex,
    piecewise-linear, decreasing function of ``b``. The offset vanishes for
    shifted targets, which already sum to one. Starting at ``max(h) - 1/M`` (to the
    right of the root) the first step lands left of it and the iterates
    then increase monotonically, so the method stops after finitely many
    steps. The stopping tolerance is ``tol`` relative to ``max(1, max|h|)``.
    """
    h = np.asarray(h, dtype=np.float64)
    if not np.all(np.isfinite(h)):
        raise NumericalError("Newton threshold needs finite targets")
    M = h.shape[0]
    offset = (float(h.sum()) - 1.0) / M
    scale = max(1.0, float(np.max(np.abs(h))))
    b = float(h.max()) - 1.0 / M
    residual = np.inf
    for _ in range(max_iter):
        residual = np.maximum(h - b, 0.0).sum() - 1.0
        if abs(residual) <= tol * scale:
            return b
        value = np.maximum(b - h, 0.0).sum() / M - b + offset
        slope = np.count_nonzero(h < b) / M - 1.0
        step = value / slope
        if step == 0.0:
            return b
        b -= step
    residual = np.maximum(h - b, 0.0).sum() - 1.0
    if abs(residual) <= tol * scale:
        return b
    raise NumericalError(f"Newton threshold did not converge: residual {residual:.3e} after {max_iter} steps")


def update_w_row(t_i, gamma, M=None):
    """Minimise ``sum_j t_j w_j + gamma w_j²`` over the probability simplex."""
    t_i = np.asarray(t_i, dtype=np.float64)
    if M is not None and t_i.shape[0] != M:
        raise ConfigError(f"cost row has length {t_i.shape[0]}, expected M={M}")
    h = shifted_targets(t_i, gamma)
    w = np.maximum(h - newton_b_hat(h), 0.0)
    return w / w.sum()


def objective(problem, W, r, s):
    t = pairwise_costs(problem, r, s)
    return float(np.sum(t * W) + problem.gamma * np.sum(W * W))


def solve_collaboration(problem, outer_iters=DEFAULT_OUTER_ITERS):
    """Alternate the ``r``, ``s`` and ``W`` updates ``outer_iters`` times from uniform ``W``."""
    M, D = problem.M, problem.D
    W = np.full((M, M), 1.0 / M)
    r = np.full(D, 1.0 / D)
    s = np.full(D, 1.0 / D)
    sol = CollabSolution(W=W, r=r, s=s)
    for _ in range(outer_iters):
        L = laplacian_of_collab(W)
        r, sol.degenerate_r = attention_from_energies(dirichlet_energies(problem.P, L))
        s, sol.degenerate_s = attention_from_energies(dirichlet_energies(problem.Q, L))
        t = pairwise_costs(problem, r, s)
        W = np.vstack([update_w_row(t[i], problem.gamma) for i in range(M)])
        sol.objective.append(objective(problem, W, r, s))
    sol.W, sol.r, sol.s = W, r, s
    return sol


@dataclass(eq=False)
class OrderSolutions:
    """Collaboration matrices for every basis order plus the classifier."""

    orders: list
    mlp: CollabSolution

    @property
    def matrices(self):
        return [sol.W for sol in self.orders]


def solve_all_orders(bundles, gamma=1.0, terms="both", outer_iters=DEFAULT_OUTER_ITERS):
    """One problem per order on ``(p^k, q^k)`` and one on the concatenations."""
    K = bundles[0].K
    orders = []
    for k in range(K + 1):
        prob = CollabProblem(np.vstack([b.p[k] for b in bundles]),
                             np.vstack([b.q[k] for b in bundles]), gamma, terms)
        orders.append(solve_collaboration(prob, outer_iters))
    mlp_prob = CollabProblem(np.vstack([b.p_hat for b in bundles]),
                             np.vstack([b.q_hat for b in bundles]), gamma, terms)
    return OrderSolutions(orders=orders, mlp=solve_collaboration(mlp_prob, outer_iters))
