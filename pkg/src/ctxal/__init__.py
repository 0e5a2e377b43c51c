"""Active learning over inter-related event instances.

The package couples a per-instance classifier with learned pairwise
context (co-occurrence, spatial and temporal structure) in a graphical
model, scores unlabeled batches by approximate joint entropy, selects
the K jointly most informative instances with a certified branch-and-
bound solver, and keeps all models current from both manual labels and
confident self-labels.
"""
from .context import (BinningScheme, BinRangeWarning, ContextModel,
                      CooccurrenceMatrix, GaussianParam, RunningGaussian,
                      gaussian_density, new_context_model, update_context)
from .graph import (ActivityInstance, ActivityNode, ContextNode,
                    ContextObservation, CrfGraph, EdgeRecord, PotentialTable,
                    build_graph, condition)
from .inference import BpOptions, MarginalSet, infer, predict_labels
from .infometrics import (QueryProblem, approx_joint_entropy,
                          build_query_problem, edge_mutual_information,
                          node_entropy)
from .links import LinkPredictor, fit_links, predict_link
from .mlr import (MlrModel, TeacherConfig, classify, classify_batch, fit,
                  gradient, incremental_update, loss, weak_teacher, zero_model)
from .optimizer import (BqpInstance, InfeasibleFixing, Selection,
                        brute_force_select, convexify, from_problem,
                        objective, objective_of_set, select_batch,
                        solve_relaxation)

__version__ = "0.1.0"

__all__ = [
    "ActivityInstance", "ActivityNode", "BinningScheme", "BinRangeWarning",
    "BpOptions", "BqpInstance", "ContextModel", "ContextNode",
    "ContextObservation", "CooccurrenceMatrix", "CrfGraph", "EdgeRecord",
    "GaussianParam", "InfeasibleFixing", "LinkPredictor", "MarginalSet",
    "MlrModel", "PotentialTable", "QueryProblem", "RunningGaussian",
    "Selection", "TeacherConfig", "approx_joint_entropy",
    "brute_force_select", "build_graph", "build_query_problem", "classify",
    "classify_batch", "condition", "convexify", "edge_mutual_information",
    "fit", "fit_links", "from_problem", "gaussian_density", "gradient",
    "incremental_update", "infer", "loss", "new_context_model",
    "node_entropy", "objective", "objective_of_set", "predict_labels",
    "predict_link", "select_batch", "solve_relaxation", "update_context",
    "weak_teacher", "zero_model",
]
