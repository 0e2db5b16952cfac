"""scikit-learn compatible wrappers.

``UniFilterClassifier`` fits one client's spectral filter on a
:class:`~fedsim.graph.Graph` (transductive: ``fit`` and ``predict`` take
the same graph, supervision comes from its train mask).
``CollaborationOptimizer`` fits collaboration strengths from stacked
client signatures.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted
from scipy.special import softmax

from .basis import build_bases
from .collab import DEFAULT_OUTER_ITERS, CollabProblem, solve_collaboration
from .graph import Graph
from .model import TrainConfig, evaluate, forward, init_model, train_local


def _check_graph(graph):
    if not isinstance(graph, Graph):
        raise TypeError(f"expected a fedsim Graph, got {type(graph).__name__}")
    return graph


class UniFilterClassifier(ClassifierMixin, BaseEstimator):
    """Polynomial filter over homophily and heterophily bases + linear classifier.

    Parameters
    ----------
    K : int, default=4
        Highest basis order.
    tau : float, default=0.5
        Weight of the homophily bases against the heterophily bases.
    lr : float, default=0.05
    epochs : int, default=100
    init_scale : float, default=0.1
    hhat : float or None, default=None
        Homophily estimate fixing the heterophily angle; estimated from
        train-train edges when None.
    random_state : int, default=0

    Attributes
    ----------
    model_ : LocalModel
    bases_ : BasisSet
    classes_ : ndarray
    """

    def __init__(self, K=4, tau=0.5, lr=0.05, epochs=100, init_scale=0.1, hhat=None,
                 random_state=0):
        self.K = K
        self.tau = tau
        self.lr = lr
        self.epochs = epochs
        self.init_scale = init_scale
        self.hhat = hhat
        self.random_state = random_state

    def fit(self, graph, y=None):
        graph = _check_graph(graph)
        self.bases_ = build_bases(graph, self.K, self.hhat)
        self.classes_ = np.arange(graph.num_classes)
        start = init_model(self.K, graph.num_features, graph.num_classes, self.tau,
                           self.init_scale, self.random_state)
        cfg = TrainConfig(epochs=self.epochs, lr=self.lr, seed=self.random_state,
                          init_scale=self.init_scale)
        self.model_ = train_local(start, self.bases_, graph.labels, graph.masks, cfg)
        self._fit_graph = graph
        return self

    def _logits(self, graph):
        check_is_fitted(self, "model_")
        graph = _check_graph(graph)
        bases = self.bases_ if graph is self._fit_graph else build_bases(graph, self.K, self.hhat)
        return forward(self.model_, bases)[1]

    def decision_function(self, graph):
        return self._logits(graph)

    def predict_proba(self, graph):
        return softmax(self._logits(graph), axis=1)

    def predict(self, graph):
        logits = self._logits(graph)
        return self.classes_[np.argmax(logits, axis=1)]

    def score(self, graph, y=None, mask="test"):
        """Accuracy on ``graph.masks[mask]`` (or on all nodes against ``y`` if given)."""
        if y is not None:
            return float(np.mean(self.predict(graph) == np.asarray(y)))
        check_is_fitted(self, "model_")
        return evaluate(self.model_, self.bases_, graph.labels, graph.masks[mask]).accuracy


class CollaborationOptimizer(BaseEstimator):
    """Collaboration strengths between clients from their signatures.

    Parameters
    ----------
    gamma : float, default=1.0
        Weight of the quadratic regulariser on the strengths.
    outer_iters : int, default=5
    terms : {"both", "p", "q"}, default="both"

    Attributes
    ----------
    W_ : ndarray of shape (M, M)
        Row-stochastic collaboration matrix.
    r_, s_ : ndarray of shape (D,)
        Attention over homophily / heterophily signature coordinates.
    objective_ : list of float
    """

    def __init__(self, gamma=1.0, outer_iters=DEFAULT_OUTER_ITERS, terms="both"):
        self.gamma = gamma
        self.outer_iters = outer_iters
        self.terms = terms

    def fit(self, P, Q):
        P = check_array(P, dtype=np.float64)
        Q = check_array(Q, dtype=np.float64)
        sol = solve_collaboration(CollabProblem(P, Q, self.gamma, self.terms), self.outer_iters)
        self.W_, self.r_, self.s_ = sol.W, sol.r, sol.s
        self.objective_ = sol.objective
        self.n_features_in_ = P.shape[1]
        return self

    def transform(self, theta):
        """Aggregate client parameters (one row per client) with the fitted strengths."""
        check_is_fitted(self, "W_")
        theta = check_array(theta, dtype=np.float64)
        return self.W_ @ theta

    def fit_transform(self, P, Q, theta):
        return self.fit(P, Q).transform(theta)
