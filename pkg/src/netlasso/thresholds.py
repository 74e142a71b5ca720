"""Threshold calculators for cluster recovery and cardinality exactness.

Two families of guarantees are computable from a problem instance:

* a regularization interval for the convex solver such that, for any
  strength inside it, the solution's merge pattern equals a given target
  partition (or at least coarsens it non-trivially), and
* a strength above which the trimmed penalty acts as an exact penalty,
  i.e. the penalized solution already satisfies the cardinality
  constraint it relaxes.

Everything here is diagnostic arithmetic on the loss curvatures and the
weight structure; nothing solves an optimization problem except the
small per-cluster minimizations delegated to the losses module.
"""

import math
from dataclasses import dataclass

import numpy as np

from .losses import SquaredDistance, sum_loss_minimizer


def _safe_ratio(num, den):
    # division convention: a positive numerator over a vanishing (or
    # negative, i.e. premise-violating) denominator is "no finite bound"
    if den > 0.0:
        return float(num) / float(den)
    return math.inf if num > 0.0 else 0.0


def _weight_matrix(graph):
    n = graph.num_nodes
    W = np.zeros((n, n))
    if graph.num_edges:
        i, j = graph.edges[:, 0], graph.edges[:, 1]
        W[i, j] = graph.weights
        W[j, i] = graph.weights
    return W


def _jsonify(value):
    """Make a report field JSON-friendly; infinities become strings."""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, np.ndarray):
        return [_jsonify(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return _jsonify(float(value)) if isinstance(value, np.floating) \
            else int(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    return value


@dataclass
class RecoveryReport:
    """Everything the recovery interval is built from, plus the interval.

    ``members[k]`` lists the nodes of cluster k in ascending order, and
    the per-cluster matrices (``mu``, ``pair_ok``) are indexed in that
    order.  ``gamma_min``/``gamma_max`` bound the strengths at which the
    convex solver reproduces the target partition exactly, provided
    ``premise_ok`` is true; ``coarsening_bound`` is the (possibly
    smaller) upper limit below which at least a non-trivial coarsening
    is guaranteed.
    """

    num_clusters: int
    members: list
    cluster_sizes: list
    cluster_minimizers: np.ndarray
    aggregate_curvatures: list
    smoothness: list
    node_cluster_weights: np.ndarray
    cross_weights: np.ndarray
    mu: list
    pair_ok: list
    separated_ok: np.ndarray
    curvature_assumed: bool
    gamma_min: float
    gamma_max: float
    coarsening_bound: float

    @property
    def premise_ok(self):
        pairs = all(bool(ok.all()) for ok in self.pair_ok)
        N = self.num_clusters
        off = ~np.eye(N, dtype=bool)
        return pairs and bool(self.separated_ok[off].all())

    def to_json_dict(self):
        return {
            "gamma_min": _jsonify(self.gamma_min),
            "gamma_max": _jsonify(self.gamma_max),
            "coarsening_bound": _jsonify(self.coarsening_bound),
            "premise_ok": self.premise_ok,
            "num_clusters": self.num_clusters,
            "members": [list(map(int, m)) for m in self.members],
            "cluster_sizes": list(map(int, self.cluster_sizes)),
            "cluster_minimizers": _jsonify(self.cluster_minimizers),
            "aggregate_curvatures": _jsonify(self.aggregate_curvatures),
            "smoothness": _jsonify(self.smoothness),
            "node_cluster_weights": _jsonify(self.node_cluster_weights),
            "cross_weights": _jsonify(self.cross_weights),
            "mu": _jsonify(self.mu),
            "pair_ok": [ok.tolist() for ok in self.pair_ok],
            "separated_ok": self.separated_ok.tolist(),
            "curvature_assumed": self.curvature_assumed,
        }


def _clusters_from_labels(labels, n):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise ValueError(
            f"expected one label per node ({n}), got shape {labels.shape}")
    if labels.size == 0:
        raise ValueError("empty partition")
    if labels.min() < 0:
        raise ValueError("labels must be non-negative")
    N = int(labels.max()) + 1
    members = [np.flatnonzero(labels == k) for k in range(N)]
    for k, mem in enumerate(members):
        if len(mem) == 0:
            raise ValueError(f"cluster {k} is empty; ids must be dense")
    return N, members


def recovery_interval(losses, graph, labels, aggregate_curvature=None):
    """Strength interval under which the target partition is recovered.

    ``labels`` assigns every node a dense cluster id.  Each per-node
    loss must be strictly convex; aggregate curvatures default to the
    per-cluster sums of the node constants (exact for quadratics, since
    Hessians add).  Pass ``aggregate_curvature`` to assert the constants
    yourself, e.g. for custom losses whose declared per-node constant is
    zero or loose; the report then has ``curvature_assumed`` set.

    Premise failures (a too-weak intra-cluster weight, or two clusters
    whose aggregate minimizers coincide) are reported via the flag
    matrices rather than raised: an instance that merely fails the
    sufficient conditions is still worth inspecting.
    """
    n = losses.num_nodes
    if graph.num_nodes != n:
        raise ValueError("graph and losses disagree on the node count")
    N, members = _clusters_from_labels(labels, n)

    L = [float(losses.smoothness(i)) for i in range(n)]
    if aggregate_curvature is None:
        node_alpha = [float(losses.strong_convexity(i)) for i in range(n)]
        if min(node_alpha) <= 0.0:
            raise ValueError(
                "recovery interval needs strictly convex node losses; "
                "pass aggregate_curvature to assert cluster constants")
        alpha = [float(sum(node_alpha[i] for i in mem)) for mem in members]
        curvature_assumed = False
    else:
        alpha = [float(a) for a in aggregate_curvature]
        if len(alpha) != N:
            raise ValueError("need one aggregate curvature per cluster")
        if min(alpha) <= 0.0:
            raise ValueError("aggregate curvatures must be positive")
        curvature_assumed = True

    xbar = np.stack([sum_loss_minimizer(losses, mem) for mem in members])
    grand = sum_loss_minimizer(losses, range(n))

    W = _weight_matrix(graph)
    membership = np.zeros((n, N))
    membership[np.arange(n), np.asarray(labels, dtype=np.int64)] = 1.0
    node_cluster = W @ membership              # w_i^(k)
    cross = membership.T @ W @ membership      # w^(k,k')
    cross_out = cross.sum(axis=1) - np.diag(cross)

    mu = []
    pair_ok = []
    gamma_min = 0.0
    for k, mem in enumerate(members):
        n_k = len(mem)
        other = [l for l in range(N) if l != k]
        nc = node_cluster[np.ix_(mem, other)]
        mu_k = np.abs(nc[:, None, :] - nc[None, :, :]).sum(axis=2)
        Lk = np.asarray([L[i] for i in mem])
        mu_k = mu_k + (Lk[:, None] + Lk[None, :]) / alpha[k] * cross_out[k]
        np.fill_diagonal(mu_k, 0.0)
        mu.append(mu_k)

        Wk = W[np.ix_(mem, mem)]
        ok = n_k * Wk > mu_k
        np.fill_diagonal(ok, True)
        pair_ok.append(ok)

        grads = np.stack([np.asarray(losses.gradient(i, xbar[k]))
                          for i in mem])
        for a_idx in range(n_k):
            for b_idx in range(n_k):
                if a_idx == b_idx:
                    continue
                num = float(np.linalg.norm(grads[b_idx] - grads[a_idx]))
                den = n_k * Wk[a_idx, b_idx] - mu_k[a_idx, b_idx]
                gamma_min = max(gamma_min, _safe_ratio(num, den))

    separated = np.ones((N, N), dtype=bool)
    gamma_max = math.inf
    for k in range(N):
        for kp in range(k + 1, N):
            num = float(np.linalg.norm(xbar[k] - xbar[kp]))
            scale = 1.0 + float(np.linalg.norm(xbar[k])) \
                + float(np.linalg.norm(xbar[kp]))
            if num <= 1e-9 * scale:
                separated[k, kp] = separated[kp, k] = False
            den = cross_out[k] / alpha[k] + cross_out[kp] / alpha[kp]
            gamma_max = min(gamma_max, _safe_ratio(num, den))

    coarsening = 0.0
    for k, mem in enumerate(members):
        grad = np.sum([np.asarray(losses.gradient(i, grand)) for i in mem],
                      axis=0)
        coarsening = max(coarsening,
                         _safe_ratio(float(np.linalg.norm(grad)),
                                     cross_out[k]))

    return RecoveryReport(
        num_clusters=N,
        members=[mem.tolist() for mem in members],
        cluster_sizes=[len(mem) for mem in members],
        cluster_minimizers=xbar,
        aggregate_curvatures=alpha,
        smoothness=L,
        node_cluster_weights=node_cluster,
        cross_weights=cross,
        mu=mu,
        pair_ok=pair_ok,
        separated_ok=separated,
        curvature_assumed=curvature_assumed,
        gamma_min=float(gamma_min),
        gamma_max=float(gamma_max),
        coarsening_bound=float(coarsening))


def recovery_interval_cc(points, graph, labels):
    """Specialized (wider) interval for squared-distance clustering.

    Accepts the data matrix directly, or a SquaredDistance loss.  The
    general interval from :func:`recovery_interval` is contained in this
    one: the lower thresholds satisfy general >= specialized and the
    upper thresholds coincide for these losses.
    """
    if isinstance(points, SquaredDistance):
        points = points.points
    elif hasattr(points, "num_nodes"):
        raise TypeError("squared-distance losses required; got a "
                        "different loss family")
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise TypeError("squared-distance data required: a 2-D array "
                        "of anchor points (or a SquaredDistance loss)")
    n = len(points)
    if graph.num_nodes != n:
        raise ValueError("graph and data disagree on the node count")
    N, members = _clusters_from_labels(labels, n)

    W = _weight_matrix(graph)
    membership = np.zeros((n, N))
    membership[np.arange(n), np.asarray(labels, dtype=np.int64)] = 1.0
    node_cluster = W @ membership
    cross = membership.T @ W @ membership
    cross_out = cross.sum(axis=1) - np.diag(cross)

    gamma_min = 0.0
    for k, mem in enumerate(members):
        n_k = len(mem)
        other = [l for l in range(N) if l != k]
        nc = node_cluster[np.ix_(mem, other)]
        spread = np.abs(nc[:, None, :] - nc[None, :, :]).sum(axis=2)
        Wk = W[np.ix_(mem, mem)]
        for a_idx in range(n_k):
            for b_idx in range(n_k):
                if a_idx == b_idx:
                    continue
                num = float(np.linalg.norm(points[mem[a_idx]]
                                           - points[mem[b_idx]]))
                den = n_k * Wk[a_idx, b_idx] - spread[a_idx, b_idx]
                gamma_min = max(gamma_min, _safe_ratio(num, den))

    means = np.stack([points[mem].mean(axis=0) for mem in members])
    gamma_max = math.inf
    for k in range(N):
        for kp in range(k + 1, N):
            num = float(np.linalg.norm(means[k] - means[kp]))
            den = cross_out[k] / len(members[k]) \
                + cross_out[kp] / len(members[kp])
            gamma_max = min(gamma_max, _safe_ratio(num, den))

    return float(gamma_min), float(gamma_max)


@dataclass
class PenaltyThreshold:
    """Exact-penalty strength and the solution bound it was built from."""

    bound_C: float
    gamma_star: float
    method: str = "supplied-C"

    @property
    def degenerate(self):
        return self.gamma_star == 0.0

    def to_json_dict(self):
        return {"bound_C": _jsonify(self.bound_C),
                "gamma_star": _jsonify(self.gamma_star),
                "method": self.method,
                "degenerate": self.degenerate}


def exact_penalty_threshold(losses, bound, method="supplied-C"):
    """Strength above which the trimmed penalty enforces its cardinality.

    ``bound`` must dominate the norm of every per-node coordinate at any
    (locally) optimal solution; the bound_C_* helpers compute valid
    choices for the built-in loss families.  Any strength strictly above
    the returned ``gamma_star`` makes every solution of the penalized
    problem feasible for the cardinality-constrained one.
    """
    bound = float(bound)
    if bound < 0.0:
        raise ValueError("solution bound must be non-negative")
    zero = np.zeros(losses.dim)
    total = 0.0
    for i in range(losses.num_nodes):
        L_i = float(losses.smoothness(i))
        if not math.isfinite(L_i):
            raise ValueError(f"node {i} has no finite smoothness constant")
        total += float(np.linalg.norm(losses.gradient(i, zero)))
        total += 2.0 * L_i * bound
    return PenaltyThreshold(bound_C=bound, gamma_star=float(total),
                            method=method)


def bound_C_clustering(points):
    """Norm bound for squared-distance solutions: the largest anchor."""
    if isinstance(points, SquaredDistance):
        points = points.points
    points = np.asarray(points, dtype=np.float64)
    if points.size == 0:
        return 0.0
    return float(np.linalg.norm(points, axis=-1).max())


def bound_C_strongly_convex(losses):
    """Norm bound from strong convexity of every node loss.

    Looser than the clustering bound where both apply, but valid for
    any strongly convex family with known minimizers.
    """
    alphas = [float(losses.strong_convexity(i))
              for i in range(losses.num_nodes)]
    if min(alphas) <= 0.0:
        raise ValueError("every node loss must be strongly convex")
    mins = []
    for i in range(losses.num_nodes):
        m = losses.minimizer(i)
        if m is None:
            raise ValueError(f"node {i} exposes no minimizer")
        mins.append(np.asarray(m, dtype=np.float64))
    zero = np.zeros(losses.dim)
    gap = sum(float(losses.value(i, zero)) - float(losses.value(i, mins[i]))
              for i in range(losses.num_nodes))
    gap = max(gap, 0.0)  # roundoff can push the sum a hair negative
    radius = math.sqrt(2.0 * gap / min(alphas))
    return radius + max(float(np.linalg.norm(m)) for m in mins)


def bound_C_quadratic(losses):
    """Norm bound for quadratic node losses with positive definite terms."""
    terms = losses.quadratic_terms()
    if terms is None:
        raise ValueError("quadratic losses required")
    H, g = terms
    n = H.shape[0]
    alpha = math.inf
    sols = np.zeros_like(g)
    quad = 0.0
    for i in range(n):
        evals = np.linalg.eigvalsh(H[i])
        if evals[0] <= 1e-12 * max(evals[-1], 1.0):
            raise ValueError(f"node {i} quadratic term is not positive "
                             "definite")
        alpha = min(alpha, float(evals[0]))
        sols[i] = np.linalg.solve(H[i], g[i])
        quad += float(g[i] @ sols[i])
    radius = math.sqrt(max(quad, 0.0) / alpha)
    return radius + float(np.linalg.norm(sols, axis=1).max())


def clustering_threshold(points):
    """Closed-form clustering preset: 3 * n * (largest anchor norm).

    An upper bound on :func:`exact_penalty_threshold` evaluated with the
    clustering solution bound, convenient because it needs no loss
    object.  Strengths strictly above it keep the exactness guarantee.
    """
    if isinstance(points, SquaredDistance):
        points = points.points
    points = np.asarray(points, dtype=np.float64)
    return 3.0 * len(points) * bound_C_clustering(points)
