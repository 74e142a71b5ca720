"""Threshold calculators, checked against what the solver actually does.

Two well-separated point clouds on a Gaussian-weighted complete graph.
The recovery interval predicts the strengths at which the convex
solution's merge pattern equals the true grouping; the exact-penalty
preset predicts the strength above which the trimmed penalty behaves
like a hard cardinality constraint.  Both predictions are then tested
by running the solver.  The weighting matters: on the same points with
uniform weights the interval premise fails, because the cross-cloud
edges then carry as much pull as the within-cloud ones.

Run from the repository root:

    python3 demos/recovery_thresholds.py
"""

import numpy as np

from netlasso.graph import complete_graph
from netlasso.losses import SquaredDistance
from netlasso.path import (Partition, adjusted_rand_index, extract_partition,
                           partition_relation)
from netlasso.solver import SolverConfig, solve_nl, solve_ntl
from netlasso.thresholds import (bound_C_clustering, clustering_threshold,
                                 exact_penalty_threshold, recovery_interval,
                                 recovery_interval_cc)


def main():
    rng = np.random.default_rng(3)
    sizes = (7, 7)
    centers = np.array([[-3.0, 0.0], [3.0, 0.5]])
    points = np.vstack([c + 0.3 * rng.standard_normal((s, 2))
                        for s, c in zip(sizes, centers)])
    labels = np.repeat([0, 1], sizes)
    losses = SquaredDistance(points)
    graph = complete_graph(len(points), points=points, alpha=0.5)
    truth = Partition(labels)

    # General interval, then the wider specialized one for this loss.
    report = recovery_interval(losses, graph, labels)
    lo_cc, hi_cc = recovery_interval_cc(losses, graph, labels)
    print(f"general interval:     [{report.gamma_min:.4f}, "
          f"{report.gamma_max:.4f}]  premise "
          f"{'holds' if report.premise_ok else 'fails'}")
    print(f"specialized interval: [{lo_cc:.4f}, {hi_cc:.4f}]")
    uniform = recovery_interval(losses, complete_graph(len(points)), labels)
    print(f"uniform-weight check: premise "
          f"{'holds' if uniform.premise_ok else 'fails'} "
          f"(cross-cloud edges too heavy without the kernel)")

    # Solve inside the predicted interval and compare partitions.  The
    # interval spans orders of magnitude (the cross-cloud weights are
    # around 1e-8), so the geometric mean is the sensible probe point.
    gamma = float(np.sqrt(report.gamma_min * report.gamma_max))
    state, reason = solve_nl(losses, graph, gamma, rho=1.0,
                             max_iters=6000, eps_abs=1e-10, eps_rel=1e-10)
    found = extract_partition(state.x, graph, merge_tol=1e-5)
    print(f"solve at gamma={gamma:.4f}: {found.num_clusters} clusters, "
          f"relation to truth: {partition_relation(found, truth)}, "
          f"ARI {adjusted_rand_index(found, truth):.3f}")

    # Exact-penalty side.  Above gamma_star the trimmed penalty must
    # zero out all but K block differences; here K counts the surviving
    # cross-cloud connections, and with K equal to the cross-cloud edge
    # count the constrained solution is exactly the two cloud means.
    preset = exact_penalty_threshold(losses, bound_C_clustering(losses))
    print(f"exact-penalty bound:  gamma_star {preset.gamma_star:.1f} "
          f"(closed-form preset {clustering_threshold(points):.1f})")

    K = sizes[0] * sizes[1]
    cfg = SolverConfig(gamma=preset.gamma_star * 1.001, cardinality=K,
                       rho=1.0, max_iters=8000, eps_abs=1e-10, eps_rel=1e-10)
    state, reason = solve_ntl(losses, graph, cfg)
    part = extract_partition(state.x, graph, merge_tol=1e-5)
    spread = max(np.linalg.norm(state.x[labels == c]
                                - state.x[labels == c].mean(0), axis=1).max()
                 for c in (0, 1))
    print(f"trimmed solve, budget K={K}: {part.num_clusters} clusters "
          f"({reason}), ARI {adjusted_rand_index(part, truth):.3f}")
    print(f"  within-cloud spread after trimming: {spread:.2e}")

    print()
    print("The interval calculators are sufficient conditions, so they")
    print("can be conservative, but any strength they admit is safe.")


if __name__ == "__main__":
    main()
