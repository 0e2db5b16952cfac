"""Simulator for spectral graph federated learning with optimized collaboration."""

from .analysis import (CollabGraphView, SpectralProfile, frequency_component, heterogeneity,
                       ratios, similarity_matrix, spectral_profile)
from .basis import (BasisSet, SignatureBundle, build_bases, build_heterophily_bases,
                    build_homophily_bases, client_signatures, svd_signature)
from .collab import (CollabProblem, CollabSolution, laplacian_of_collab, newton_b_hat,
                     row_costs, solve_all_orders, solve_collaboration, update_attention,
                     update_attention_neg, update_w_row)
from .estimators import CollaborationOptimizer, UniFilterClassifier
from .exceptions import (ConfigError, DegenerateInputError, FedSimError, NumericalError,
                         ValidationError)
from .fedrun import FedConfig, Federation, RoundRecord, aggregate_coefficients, aggregate_mlp, run_federation
from .graph import Graph, load_graph, make_graph, normalized_laplacian, propagation_matrix, save_graph
from .homophily import adjusted_homophily, edge_homophily, estimate_train_homophily, node_homophily
from .model import LocalModel, Metrics, TrainConfig, evaluate, forward, loss_and_gradients, train_local
from .partition import (PartitionPlan, induce_subgraph, load_partition, partition_nonoverlapping,
                        partition_overlapping)
from .synthetic import CsbmParams, generate_csbm

__version__ = "0.1.0"
