"""Graph-regularized model fitting with simultaneous clustering.

The package solves problems of the form

    minimize_x   sum_i f_i(x_i)  +  penalty on edge differences x_i - x_j

over the nodes of a weighted graph.  Two penalties are covered: the
convex weighted sum of edge-difference norms (network lasso) and its
trimmed variant that leaves the K largest differences unpenalized, which
targets a solution with at most K unmerged edges.
"""

from . import cli, datasets, graph, losses, path, penalty, solver, thresholds

__all__ = [
    "cli",
    "datasets",
    "graph",
    "losses",
    "path",
    "penalty",
    "solver",
    "thresholds",
]

__version__ = "0.1.0"
