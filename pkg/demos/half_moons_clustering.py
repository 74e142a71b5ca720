"""Edge weighting decides whether the half-moons are separable.

Centroid clustering on two interleaved arcs.  The convex penalty sees
the data only through the graph, so the same solver recovers the arcs
perfectly or not at all depending on how the edges are weighted.

Run from the repository root:

    python3 demos/half_moons_clustering.py
"""

import numpy as np

from netlasso.datasets import gen_half_moons
from netlasso.graph import WeightedGraph, complete_graph, knn_gaussian_graph
from netlasso.losses import SquaredDistance
from netlasso.path import Partition, adjusted_rand_index, gamma_path, k_path
from netlasso.thresholds import clustering_threshold


def best_on_grid(losses, graph, grid, points, truth):
    path = gamma_path(losses, graph, grid, warm_start=True,
                      stop_on_full_merge=True, x0=points.copy(),
                      rho=1.0, max_iters=800, eps_abs=1e-6, eps_rel=1e-6)
    aris = [adjusted_rand_index(s.partition, truth) for s in path.steps]
    i = int(np.argmax(aris))
    return aris[i], path.steps[i].parameter


def main():
    n = 60
    moons = gen_half_moons(n, noise_sd=0.08, seed=7)
    losses = SquaredDistance(moons.points)
    truth = Partition(moons.labels)
    grid = [10 ** (-3 + 4 * t / 39) for t in range(40)]

    print(f"{n} points on two arcs, sweeping {len(grid)} strengths per graph")
    print()

    # Uniform complete graph: every pair pulls equally hard, so the
    # first thing that happens is a collapse to one centroid.
    a, g = best_on_grid(losses, complete_graph(n), grid, moons.points, truth)
    print(f"complete graph, uniform weights:   best ARI {a:.3f}")

    # Neighbourhood graph without weights already helps.
    gauss = knn_gaussian_graph(moons.points, 20, alpha=15.0)
    uniform = WeightedGraph(n, gauss.edges, np.ones(gauss.num_edges))
    a, g = best_on_grid(losses, uniform, grid, moons.points, truth)
    print(f"20-nn graph, uniform weights:      best ARI {a:.3f}")

    # Gaussian kernel weights on the same edges separate the arcs
    # exactly at the right strength.
    a, g = best_on_grid(losses, gauss, grid, moons.points, truth)
    print(f"20-nn graph, Gaussian weights:     best ARI {a:.3f} "
          f"(at strength {g:.2f})")

    # The trimmed penalty ignores edge weights by construction, so the
    # kernel information is unavailable to it.  Worth seeing on a task
    # where that information is exactly what separates the classes.
    gamma = clustering_threshold(moons.points) * 1.001
    kp = k_path(losses, gauss, gamma, list(range(500, -1, -25)),
                x0=moons.points.copy(), rho=1e4,
                max_iters=1000, eps_abs=1e-5, eps_rel=1e-5)
    aris = [adjusted_rand_index(s.partition, truth) for s in kp.steps]
    i = int(np.argmax(aris))
    print(f"trimmed schedule on the 20-nn graph: best ARI {aris[i]:.3f} "
          f"at budget K={kp.steps[i].parameter:.0f}")

    print()
    print("Same solver, same losses.  The kernel weighting carries all")
    print("of the geometry here, which is why the weighted convex run")
    print("is exact while the unweighted variants are not.")


if __name__ == "__main__":
    main()
