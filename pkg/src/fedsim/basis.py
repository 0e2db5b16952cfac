"""Homophily / heterophily polynomial bases and their SVD signatures."""

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateInputError, NumericalError, ValidationError
from .graph import propagation_matrix
from .homophily import estimate_train_homophily

HHAT_MIN, HHAT_MAX = 0.01, 0.99
# helpers are unit-norm; a residual below this means the Krylov space is exhausted
BREAKDOWN_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class BasisSet:
    """The ``K + 1`` homophily and heterophily bases of one client.

    ``clamp_flags[k]`` is True when order ``k`` could not be placed at the
    fixed angle: either the correction radicand went negative and was
    clamped at zero, or the orthonormal helper vanished.
    """

    H: tuple
    U: tuple
    theta: float
    hhat: float
    clamp_flags: tuple

    @property
    def K(self):
        return len(self.H) - 1

    @property
    def shape(self):
        return self.H[0].shape

    def mixed(self, tau):
        """``tau * H^k + (1 - tau) * U^k`` for every order."""
        return [tau * h + (1.0 - tau) * u for h, u in zip(self.H, self.U)]


def _frob(a, b):
    return float(np.vdot(a, b))


def build_homophily_bases(g, K, P=None):
    """``[X, P X, P² X, ..., P^K X]``."""
    if K < 0:
        raise ValidationError("K", f"must be non-negative (got {K})")
    P = propagation_matrix(g) if P is None else P
    H = [np.asarray(g.features, dtype=np.float64)]
    for _ in range(K):
        H.append(np.asarray(P @ H[-1]))
    return H


def angle_from_homophily(hhat):
    h = float(np.clip(hhat, HHAT_MIN, HHAT_MAX))
    return np.pi / 2.0 * (1.0 - h)


def build_heterophily_bases(g, K, hhat, P=None):
    """Unit-norm bases meeting pairwise at the angle ``pi/2 (1 - hhat)``.

    Each new order starts from the running mean of the earlier bases and
    is pushed along a fresh orthonormal direction ``V^k`` of the Krylov
    sequence ``X, P X, ...`` by exactly the amount that restores the fixed
    angle. Inner products between bases are Frobenius inner products.

    ``hhat`` is clipped to [0.01, 0.99] so that ``cos(theta)`` is never 0.

    Returns
    -------
    U : list of ndarray
    theta : float
    clamp_flags : list of bool
    """
    if K < 0:
        raise ValidationError("K", f"must be non-negative (got {K})")
    X = np.asarray(g.features, dtype=np.float64)
    xnorm = np.linalg.norm(X)
    if not xnorm > 0:
        raise DegenerateInputError("heterophily bases need a non-zero feature matrix")
    P = propagation_matrix(g) if P is None else P

    theta = angle_from_homophily(hhat)
    cos = np.cos(theta)

    U = [X / xnorm]
    V = [U[0]]
    S = U[0].copy()
    flags = [False]
    for k in range(1, K + 1):
        v = np.asarray(P @ V[k - 1])
        v = v - _frob(v, V[k - 1]) * V[k - 1]
        if k >= 2:
            v = v - _frob(v, V[k - 2]) * V[k - 2]
        # second Gram-Schmidt pass: a no-op in exact arithmetic, but the
        # three-term recurrence alone drifts by ~1e-1 at K = 8
        for j in range(k):
            v = v - _frob(v, V[j]) * V[j]
        vnorm = np.linalg.norm(v)
        broke = vnorm <= BREAKDOWN_TOL
        v = np.zeros_like(v) if broke else v / vnorm
        V.append(v)

        u = S / k
        S = np.sum(U, axis=0)
        radicand = (_frob(S, U[k - 1]) / (k * cos)) ** 2 - ((k - 1) * cos + 1.0) / k
        clamped = radicand < 0
        T = np.sqrt(max(radicand, 0.0))

        u = u + T * v
        U.append(u / np.linalg.norm(u))
        S = S + U[k]
        flags.append(bool(broke or clamped))
    return U, float(theta), flags


def build_bases(g, K, hhat=None):
    """Both basis families for one client; ``hhat`` defaults to the train-edge estimate."""
    if hhat is None:
        hhat = estimate_train_homophily(g)
    P = propagation_matrix(g)
    H = build_homophily_bases(g, K, P)
    U, theta, flags = build_heterophily_bases(g, K, hhat, P)
    for arr in (*H, *U):
        arr.setflags(write=False)
    return BasisSet(H=tuple(H), U=tuple(U), theta=theta, hhat=float(hhat), clamp_flags=tuple(flags))


def svd_signature(B, t=1):
    """Flattened top-``t`` right singular vectors weighted by ``sigma_i / ||sigma||``.

    Each singular vector is sign-fixed so that its largest-magnitude entry
    (lowest index on ties) is positive. The weighting makes the signature
    invariant to positive rescaling of ``B``. A zero matrix yields zeros.
    """
    B = np.asarray(B, dtype=np.float64)
    n, d = B.shape
    if not 1 <= t <= min(n, d):
        raise ValidationError("t", f"t={t} must lie in [1, min(n, d)] = [1, {min(n, d)}]")
    try:
        _, sigma, vt = np.linalg.svd(B, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD did not converge (shape={B.shape}, ||B||_F={np.linalg.norm(B):.3e}, "
            f"max|B|={np.abs(B).max():.3e})"
        ) from exc
    total = np.linalg.norm(sigma)
    if total == 0:
        return np.zeros(t * d)
    vecs = vt[:t].copy()
    pivot = np.argmax(np.abs(vecs), axis=1)
    signs = np.sign(vecs[np.arange(t), pivot])
    signs[signs == 0] = 1.0
    vecs *= signs[:, None]
    return (vecs * (sigma[:t] / total)[:, None]).ravel()


@dataclass(frozen=True, eq=False)
class SignatureBundle:
    """Per-order homophily (p) and heterophily (q) signatures of one client."""

    p: tuple
    q: tuple
    t: int
    clamp_flags: tuple = ()

    @property
    def K(self):
        return len(self.p) - 1

    @property
    def p_hat(self):
        return np.concatenate(self.p)

    @property
    def q_hat(self):
        return np.concatenate(self.q)

    def __eq__(self, other):
        if not isinstance(other, SignatureBundle):
            return NotImplemented
        return (self.t == other.t and len(self.p) == len(other.p)
                and all(np.array_equal(a, b) for a, b in zip(self.p, other.p))
                and all(np.array_equal(a, b) for a, b in zip(self.q, other.q)))

    __hash__ = None


def client_signatures(bases, t=1):
    p = tuple(svd_signature(h, t) for h in bases.H)
    q = tuple(svd_signature(u, t) for u in bases.U)
    return SignatureBundle(p=p, q=q, t=int(t), clamp_flags=tuple(bases.clamp_flags))
