"""Per-node convex losses with explicit curvature information.

Every node ``i`` of the graph carries a convex loss ``f_i`` on R^p.  The
solvers and the threshold calculators need more than point evaluation:
each loss exposes its gradient, a smoothness constant ``L_i`` (gradient
Lipschitz constant), a strong-convexity constant ``alpha_i`` (0 when the
loss is merely convex, reported honestly), and the minimizer when one
exists.

Three concrete families cover the built-in experiments:

``SquaredDistance``   f_i(x) = 0.5 ||x - a_i||^2
``RidgeRegression``   f_i(x) = 0.5 (b_i - x_1 - a_i x_2)^2 + eps/2 x_2^2
``Quadratic``         f_i(x) = 0.5 x^T A_i x - B_i^T x

``CustomLoss`` wraps user callables and can finite-difference check the
supplied gradient before it is trusted.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize as _minimize

__all__ = [
    "Loss",
    "SquaredDistance",
    "RidgeRegression",
    "Quadratic",
    "CustomLoss",
    "sum_loss_minimizer",
]


class Loss:
    """Base class; concrete losses fill in the per-node callbacks.

    Attributes
    ----------
    num_nodes : int
    dim : int
        Dimension p of each node variable.
    """

    num_nodes = 0
    dim = 0
    is_convex = True

    def value(self, i, x):
        raise NotImplementedError

    def gradient(self, i, x):
        raise NotImplementedError

    def smoothness(self, i):
        raise NotImplementedError

    def strong_convexity(self, i):
        raise NotImplementedError

    def minimizer(self, i):
        """Minimizer of f_i, or None when it does not exist."""
        raise NotImplementedError

    def quadratic_terms(self):
        """Per-node (H, g) with f_i(x) = 0.5 x^T H_i x - g_i^T x + const.

        Returns None for losses that are not quadratic; the solver then
        falls back to the linearized update.
        """
        return None

    # -- aggregates over all nodes -------------------------------------

    def total_value(self, X):
        X = np.asarray(X, dtype=np.float64)
        return float(sum(self.value(i, X[i]) for i in range(self.num_nodes)))

    def total_gradient(self, X):
        X = np.asarray(X, dtype=np.float64)
        return np.stack([self.gradient(i, X[i])
                         for i in range(self.num_nodes)])

    def max_smoothness(self):
        return max(self.smoothness(i) for i in range(self.num_nodes))

    def min_strong_convexity(self):
        return min(self.strong_convexity(i) for i in range(self.num_nodes))

    def all_minimizers(self):
        """Stacked per-node minimizers, the solver's default start."""
        mins = [self.minimizer(i) for i in range(self.num_nodes)]
        if any(m is None for m in mins):
            raise ValueError("some node losses have no minimizer")
        return np.stack(mins)

    def _check_node(self, i):
        if not 0 <= i < self.num_nodes:
            raise IndexError(f"node index {i} out of range")


class SquaredDistance(Loss):
    """f_i(x) = 0.5 ||x - a_i||^2 for anchor points a_i.

    This is the loss of convex clustering; every node has L = alpha = 1
    and the minimizer is the anchor itself.
    """

    def __init__(self, points):
        points = np.asarray(points, dtype=np.float64)
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2 or len(points) == 0:
            raise ValueError("points must be a non-empty (n, p) array")
        self.points = points
        self.num_nodes, self.dim = points.shape

    def value(self, i, x):
        self._check_node(i)
        d = np.asarray(x, dtype=np.float64) - self.points[i]
        return 0.5 * float(d @ d)

    def gradient(self, i, x):
        self._check_node(i)
        return np.asarray(x, dtype=np.float64) - self.points[i]

    def smoothness(self, i):
        self._check_node(i)
        return 1.0

    def strong_convexity(self, i):
        self._check_node(i)
        return 1.0

    def minimizer(self, i):
        self._check_node(i)
        return self.points[i].copy()

    def quadratic_terms(self):
        n, p = self.num_nodes, self.dim
        H = np.broadcast_to(np.eye(p), (n, p, p)).copy()
        return H, self.points.copy()

    def total_value(self, X):
        d = np.asarray(X, dtype=np.float64) - self.points
        return 0.5 * float((d * d).sum())

    def total_gradient(self, X):
        return np.asarray(X, dtype=np.float64) - self.points


class RidgeRegression(Loss):
    """Per-node scalar regression with a ridge term on the slope.

    Node i holds one observation (a_i, b_i) and fits the line
    b ~ x_1 + a x_2, so

        f_i(x) = 0.5 (b_i - x_1 - a_i x_2)^2 + eps/2 * x_2^2.

    ``eps = 0`` gives plain least squares; its Hessian is singular and
    the per-node strong convexity is honestly reported as 0.
    """

    dim = 2

    def __init__(self, inputs, responses, epsilon=1e-2):
        inputs = np.asarray(inputs, dtype=np.float64).reshape(-1)
        responses = np.asarray(responses, dtype=np.float64).reshape(-1)
        if len(inputs) != len(responses) or len(inputs) == 0:
            raise ValueError("inputs and responses must be equal, non-empty")
        if epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        self.inputs = inputs
        self.responses = responses
        self.epsilon = float(epsilon)
        self.num_nodes = len(inputs)
        # per-node 2x2 Hessian [[1, a], [a, a^2 + eps]]
        a = inputs
        self._H = np.empty((self.num_nodes, 2, 2))
        self._H[:, 0, 0] = 1.0
        self._H[:, 0, 1] = a
        self._H[:, 1, 0] = a
        self._H[:, 1, 1] = a * a + self.epsilon
        self._eigs = np.linalg.eigvalsh(self._H)

    def value(self, i, x):
        self._check_node(i)
        x = np.asarray(x, dtype=np.float64)
        r = self.responses[i] - x[0] - self.inputs[i] * x[1]
        return 0.5 * r * r + 0.5 * self.epsilon * x[1] ** 2

    def gradient(self, i, x):
        self._check_node(i)
        x = np.asarray(x, dtype=np.float64)
        r = self.responses[i] - x[0] - self.inputs[i] * x[1]
        return np.array([-r, -self.inputs[i] * r + self.epsilon * x[1]])

    def smoothness(self, i):
        self._check_node(i)
        return float(self._eigs[i, 1])

    def strong_convexity(self, i):
        self._check_node(i)
        return float(max(self._eigs[i, 0], 0.0))

    def minimizer(self, i):
        self._check_node(i)
        if self.epsilon == 0.0:
            return None
        # (b_i, 0) zeroes both gradient components for any a_i
        return np.array([self.responses[i], 0.0])

    def quadratic_terms(self):
        g = np.column_stack((self.responses, self.inputs * self.responses))
        return self._H.copy(), g

    def total_value(self, X):
        X = np.asarray(X, dtype=np.float64)
        r = self.responses - X[:, 0] - self.inputs * X[:, 1]
        return 0.5 * float(r @ r) + 0.5 * self.epsilon * float(X[:, 1] @ X[:, 1])

    def total_gradient(self, X):
        X = np.asarray(X, dtype=np.float64)
        r = self.responses - X[:, 0] - self.inputs * X[:, 1]
        return np.column_stack((-r, -self.inputs * r + self.epsilon * X[:, 1]))


class Quadratic(Loss):
    """General quadratic node losses f_i(x) = 0.5 x^T A_i x - B_i^T x.

    Parameters
    ----------
    A : array_like, shape (n, p, p)
        Symmetric positive semidefinite matrices.
    B : array_like, shape (n, p)
    """

    def __init__(self, A, B):
        A = np.asarray(A, dtype=np.float64)
        B = np.asarray(B, dtype=np.float64)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError("A must have shape (n, p, p)")
        if B.shape != A.shape[:2]:
            raise ValueError("B must have shape (n, p)")
        if not np.allclose(A, np.swapaxes(A, 1, 2), atol=1e-12):
            raise ValueError("A matrices must be symmetric")
        self.A = A
        self.B = B
        self.num_nodes, self.dim = B.shape
        self._eigs = np.linalg.eigvalsh(A)
        if self._eigs[:, 0].min() < -1e-10:
            raise ValueError("A matrices must be positive semidefinite")

    def value(self, i, x):
        self._check_node(i)
        x = np.asarray(x, dtype=np.float64)
        return 0.5 * float(x @ self.A[i] @ x) - float(self.B[i] @ x)

    def gradient(self, i, x):
        self._check_node(i)
        return self.A[i] @ np.asarray(x, dtype=np.float64) - self.B[i]

    def smoothness(self, i):
        self._check_node(i)
        return float(self._eigs[i, -1])

    def strong_convexity(self, i):
        self._check_node(i)
        return float(max(self._eigs[i, 0], 0.0))

    def minimizer(self, i):
        self._check_node(i)
        if self._eigs[i, 0] <= 1e-12 * max(1.0, self._eigs[i, -1]):
            return None
        return np.linalg.solve(self.A[i], self.B[i])

    def quadratic_terms(self):
        return self.A.copy(), self.B.copy()

    def total_value(self, X):
        X = np.asarray(X, dtype=np.float64)
        quad = np.einsum("ij,ijk,ik->", X, self.A, X)
        return 0.5 * float(quad) - float((self.B * X).sum())

    def total_gradient(self, X):
        X = np.asarray(X, dtype=np.float64)
        return np.einsum("ijk,ik->ij", self.A, X) - self.B


class CustomLoss(Loss):
    """User-supplied loss callbacks with declared curvature constants.

    Parameters
    ----------
    num_nodes, dim : int
    value_fn, gradient_fn : callable
        Called as ``fn(i, x)`` with ``x`` of shape (dim,).
    smoothness, strong_convexity : float or array_like
        Declared constants, scalar or per node.
    minimizer_fn : callable, optional
        ``fn(i) -> ndarray`` when per-node minimizers are known.
    convex : bool
        Declared convexity; the solvers only have guarantees when True.
    """

    def __init__(self, num_nodes, dim, value_fn, gradient_fn,
                 smoothness, strong_convexity=0.0, minimizer_fn=None,
                 convex=True):
        self.num_nodes = int(num_nodes)
        self.dim = int(dim)
        self._value_fn = value_fn
        self._gradient_fn = gradient_fn
        self._L = np.broadcast_to(
            np.asarray(smoothness, dtype=np.float64), (self.num_nodes,))
        self._alpha = np.broadcast_to(
            np.asarray(strong_convexity, dtype=np.float64), (self.num_nodes,))
        self._minimizer_fn = minimizer_fn
        self.is_convex = bool(convex)

    def value(self, i, x):
        self._check_node(i)
        return float(self._value_fn(i, np.asarray(x, dtype=np.float64)))

    def gradient(self, i, x):
        self._check_node(i)
        g = np.asarray(self._gradient_fn(i, np.asarray(x, dtype=np.float64)),
                       dtype=np.float64)
        return g.reshape(self.dim)

    def smoothness(self, i):
        self._check_node(i)
        return float(self._L[i])

    def strong_convexity(self, i):
        self._check_node(i)
        return float(self._alpha[i])

    def minimizer(self, i):
        self._check_node(i)
        if self._minimizer_fn is None:
            return None
        return np.asarray(self._minimizer_fn(i), dtype=np.float64)

    def check_gradient(self, seed=0, num_points=5, step=1e-6, tol=1e-4):
        """Finite-difference check of the supplied gradient.

        Raises ValueError when the central-difference gradient disagrees
        with ``gradient_fn`` beyond ``tol`` (relative to gradient scale)
        at any of ``num_points`` random points per node.
        """
        rng = np.random.default_rng(seed)
        for i in range(self.num_nodes):
            for _ in range(num_points):
                x = rng.normal(size=self.dim)
                g = self.gradient(i, x)
                fd = np.empty(self.dim)
                for c in range(self.dim):
                    e = np.zeros(self.dim)
                    e[c] = step
                    fd[c] = (self.value(i, x + e)
                             - self.value(i, x - e)) / (2 * step)
                scale = 1.0 + float(np.linalg.norm(g))
                if np.linalg.norm(fd - g) > tol * scale:
                    raise ValueError(
                        f"gradient of node {i} fails the finite-difference "
                        f"check (|fd - grad| = {np.linalg.norm(fd - g):.3e})")
        return True


def sum_loss_minimizer(loss, nodes):
    """Minimizer of sum_{i in nodes} f_i over a single shared variable.

    For the quadratic families this solves the aggregated normal
    equations exactly; other losses are minimized numerically (BFGS on
    the aggregate, started from zero).  Raises ValueError when the
    aggregate is not strictly convex or ``nodes`` is empty.
    """
    nodes = np.asarray(nodes, dtype=np.int64).reshape(-1)
    if len(nodes) == 0:
        raise ValueError("nodes must be non-empty")
    if len(np.unique(nodes)) != len(nodes):
        raise ValueError("nodes must be distinct")
    for i in nodes:
        if not 0 <= i < loss.num_nodes:
            raise IndexError(f"node index {i} out of range")
    terms = loss.quadratic_terms()
    if terms is not None:
        H, g = terms
        Hsum = H[nodes].sum(axis=0)
        gsum = g[nodes].sum(axis=0)
        eigs = np.linalg.eigvalsh(Hsum)
        if eigs[0] <= 1e-12 * max(1.0, eigs[-1]):
            raise ValueError("aggregate loss is not strictly convex "
                             "on this node set")
        return np.linalg.solve(Hsum, gsum)

    def agg(xflat):
        return sum(loss.value(i, xflat) for i in nodes)

    def agg_grad(xflat):
        return sum(loss.gradient(i, xflat) for i in nodes)

    res = _minimize(agg, np.zeros(loss.dim), jac=agg_grad, method="BFGS",
                    options={"gtol": 1e-12, "maxiter": 1000})
    if not res.success and np.linalg.norm(res.jac) > 1e-6:
        raise ValueError(f"numeric aggregate minimization failed: "
                         f"{res.message}")
    return np.asarray(res.x, dtype=np.float64)
