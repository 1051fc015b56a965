"""Exact discrete optimal transport between uniform empirical measures.

The solver works on the bipartite transportation polytope. Masses are scaled
to integers (each of the m source points carries n units, each of the n
target points m units) so every basic solution stays exactly integral; the
returned plan is rescaled to probability mass, i.e. row sums 1/m and column
sums 1/n.

Two backends sit behind `solve_exact`:

* `simplex`: a network simplex with a northwest-corner initial basis,
  most-negative-reduced-cost pricing, and a switch to Bland's rule after a
  degenerate stall (the anti-cycling guarantee). Handles any m x n problem.
* `assignment`: for equal-size measures the polytope's vertices are the
  scaled permutation matrices, so a min-cost assignment (scipy's exact
  Jonker-Volgenant solver) returns an optimal vertex directly. This is the
  `auto` choice for m == n, where it is orders of magnitude faster.

Every call that runs an OT solve ticks a global counter so tests and the CLI
can assert how many solves a pipeline performed.

Also here: the closed-form squared 2-Wasserstein distance between Gaussians
(mean shift plus a covariance cross term through PSD square roots), used as
the label-to-label ground distance.
"""

import threading
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dataset import GaussianLabelStats
from .errors import (
    DegeneratePlanError,
    DimensionMismatchError,
    SolverFailureError,
)
from .numerics import psd_sqrt, symmetrize


@dataclass
class DiscreteMeasure:
    """Uniform discrete measure: n support points, each with mass 1/n."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[0] < 1:
            raise ValueError(f"support must be a nonempty 2-D array, got shape {self.points.shape}")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("support points contain NaN or Inf")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass
class TransportPlan:
    """Coupling between two uniform measures; entries sum to one."""

    matrix: np.ndarray

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    def marginal_residual(self) -> float:
        """Largest deviation of a row/column sum from its uniform target."""
        row_gap = np.abs(self.matrix.sum(axis=1) - 1.0 / self.rows).max()
        col_gap = np.abs(self.matrix.sum(axis=0) - 1.0 / self.cols).max()
        return float(max(row_gap, col_gap))


@dataclass
class MongeMapApprox:
    """Barycentric images of the reference points under a transport plan."""

    images: np.ndarray


class _SolveCounter:
    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def tick(self):
        with self._lock:
            self._count += 1

    @property
    def count(self) -> int:
        with self._lock:
            return self._count


_COUNTER = _SolveCounter()


def solve_count() -> int:
    """Total number of exact OT solves performed by this process."""
    return _COUNTER.count


class SolveTally:
    """Solves since the tally was opened; frozen once its context block exits."""

    def __init__(self, start: int):
        self._start = start
        self._end = None

    @property
    def count(self) -> int:
        end = self._end if self._end is not None else _COUNTER.count
        return end - self._start


@contextmanager
def count_solves():
    tally = SolveTally(_COUNTER.count)
    try:
        yield tally
    finally:
        tally._end = _COUNTER.count


def pairwise_sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """All-pairs squared Euclidean distances between the rows of x and y.

    Small feature dimensions use an exact broadcast difference (identical rows
    give exactly zero); wide rows fall back to the BLAS expansion with a clamp.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatchError(f"point dimensions differ: {x.shape[1]} vs {y.shape[1]}")
    n, d = x.shape
    m = y.shape[0]
    if d >= 64 and n * m > 16384:
        sq = (x * x).sum(axis=1)[:, None] + (y * y).sum(axis=1)[None, :] - 2.0 * (x @ y.T)
        return np.maximum(sq, 0.0)
    out = np.empty((n, m))
    chunk = max(1, int(4_000_000 // max(m * d, 1)))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        diff = x[start:stop, None, :] - y[None, :, :]
        out[start:stop] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def cost_matrix(a: DiscreteMeasure, b: DiscreteMeasure) -> np.ndarray:
    """Squared-Euclidean ground cost; entry (j, m) pairs a.points[j] with b.points[m]."""
    return pairwise_sq_dists(a.points, b.points)


def solve_cost(cost: np.ndarray, method: str = "auto"):
    """Minimize sum(plan * cost) over couplings of two uniform measures.

    Returns (TransportPlan, optimal cost). The plan is a basic optimal
    solution: at most rows+cols-1 nonzero entries.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] < 1 or cost.shape[1] < 1:
        raise ValueError(f"cost matrix must be 2-D and nonempty, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains NaN or Inf")
    m, n = cost.shape
    if method == "auto":
        method = "assignment" if m == n else "simplex"
    if method == "assignment":
        if m != n:
            raise ValueError("assignment backend requires equal-size measures")
        _COUNTER.tick()
        rows, cols = linear_sum_assignment(cost)
        plan = np.zeros((m, n))
        plan[rows, cols] = 1.0 / n
        total = float(cost[rows, cols].sum() / n)
        return TransportPlan(plan), total
    if method != "simplex":
        raise ValueError(f"unknown method {method!r}")
    _COUNTER.tick()
    flow = _network_simplex(cost)
    scale = float(m) * float(n)
    plan = np.zeros((m, n))
    total = 0.0
    for (i, j), units in flow.items():
        if units:
            plan[i, j] = units / scale
            total += units * cost[i, j]
    return TransportPlan(plan), total / scale


def solve_exact(a: DiscreteMeasure, b: DiscreteMeasure, method: str = "auto"):
    """Exact OT between two uniform measures under squared Euclidean cost."""
    return solve_cost(cost_matrix(a, b), method=method)


def wasserstein2(a: DiscreteMeasure, b: DiscreteMeasure, method: str = "auto") -> float:
    """2-Wasserstein distance: square root of the optimal squared-cost total."""
    _, total = solve_exact(a, b, method=method)
    return float(np.sqrt(max(total, 0.0)))


def barycentric_project(plan: TransportPlan, target: DiscreteMeasure) -> MongeMapApprox:
    """Send each source point to the center of mass of its plan row.

    Rows are normalized before the product so permutation plans reproduce the
    matched target points bit-exactly.
    """
    if plan.cols != target.n:
        raise DimensionMismatchError(f"plan has {plan.cols} columns, target has {target.n} points")
    mass = plan.matrix.sum(axis=1)
    if np.any(mass <= 0.0):
        raise DegeneratePlanError("plan has a zero-mass row; cannot form barycenters")
    weights = plan.matrix / mass[:, None]
    return MongeMapApprox(weights @ target.points)


# -- Gaussian (Bures) squared 2-Wasserstein distance --------------------------


def bures_wasserstein2(a: GaussianLabelStats, b: GaussianLabelStats) -> float:
    """Squared 2-Wasserstein distance between two Gaussian surrogates.

    ||mean gap||^2 plus the covariance term tr(A) + tr(B) - 2 tr((A^1/2 B A^1/2)^1/2).
    Covariances are jointly rescaled to unit average trace before the square
    roots so the PSD eigenvalue floor is applied at a sane scale.
    """
    if a.mean.shape != b.mean.shape:
        raise DimensionMismatchError(
            f"Gaussian dimensions differ: {a.mean.shape[0]} vs {b.mean.shape[0]}"
        )
    if np.array_equal(a.mean, b.mean) and np.array_equal(a.cov, b.cov):
        return 0.0
    gap = a.mean - b.mean
    mean_term = float(gap @ gap)
    scale = 0.5 * float(np.trace(a.cov) + np.trace(b.cov))
    if scale <= 0.0:
        return mean_term
    ca = symmetrize(a.cov / scale)
    cb = symmetrize(b.cov / scale)
    root = psd_sqrt(ca)
    cross = psd_sqrt(symmetrize(root @ cb @ root))
    cov_term = scale * float(np.trace(ca) + np.trace(cb) - 2.0 * np.trace(cross))
    return max(mean_term + cov_term, 0.0)


# -- network simplex -----------------------------------------------------------


def _northwest_corner(m: int, n: int):
    """Initial basic feasible flow: supplies n per row, demands m per column.

    The staircase it produces is a spanning tree with exactly m+n-1 basic
    arcs (degenerate zero-flow arcs included on ties).
    """
    supply = np.full(m, n, dtype=np.int64)
    demand = np.full(n, m, dtype=np.int64)
    flow = {}
    i = j = 0
    for _ in range(m + n - 1):
        q = int(min(supply[i], demand[j]))
        flow[(i, j)] = q
        supply[i] -= q
        demand[j] -= q
        if supply[i] == 0 and i < m - 1:
            i += 1
        elif j < n - 1:
            j += 1
        else:
            i += 1
    return flow


def _tree_state(adj, cost, m, n):
    """Parents, depths, and dual potentials from a BFS over the basis tree.

    Node ids: 0..m-1 are rows, m..m+n-1 are columns. Potentials satisfy
    u[i] + v[j] = cost[i, j] on every basic arc.
    """
    size = m + n
    parent = np.full(size, -1, dtype=np.int64)
    depth = np.zeros(size, dtype=np.int64)
    pot = np.zeros(size)
    seen = np.zeros(size, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        x = queue.popleft()
        for w in adj[x]:
            if seen[w]:
                continue
            seen[w] = True
            parent[w] = x
            depth[w] = depth[x] + 1
            if x < m:
                pot[w] = cost[x, w - m] - pot[x]
            else:
                pot[w] = cost[w, x - m] - pot[x]
            queue.append(w)
    if not seen.all():
        raise SolverFailureError("basis tree lost connectivity")
    return parent, depth, pot[:m], pot[m:]


def _cycle_nodes(parent, depth, p, q):
    """Node sequence of the unique tree cycle closed by arc (p, q), ending back at p."""
    path_p = [p]
    path_q = [q]
    x, y = p, q
    while depth[x] > depth[y]:
        x = parent[x]
        path_p.append(x)
    while depth[y] > depth[x]:
        y = parent[y]
        path_q.append(y)
    while x != y:
        x = parent[x]
        y = parent[y]
        path_p.append(x)
        path_q.append(y)
    # path_p and path_q both end at the common ancestor
    return [p, *path_q, *path_p[-2::-1]]


def _network_simplex(cost: np.ndarray):
    """Optimal integral flow for the scaled uniform transportation problem.

    Pricing is most-negative reduced cost with first-index tie-breaking;
    after a long run of degenerate pivots it switches to Bland's rule (first
    eligible arc, lowest-index leaving arc), which cannot cycle, and switches
    back on the next improving pivot. Deterministic throughout.
    """
    m, n = cost.shape
    flow = _northwest_corner(m, n)
    adj = [set() for _ in range(m + n)]
    for (i, j) in flow:
        adj[i].add(m + j)
        adj[m + j].add(i)
    tol = 1e-10 * max(1.0, float(np.abs(cost).max()))
    stall_limit = 2 * (m + n)
    max_pivots = max(20_000, 200 * (m + n))
    bland = False
    stall = 0
    pivots = 0
    while True:
        parent, depth, u, v = _tree_state(adj, cost, m, n)
        reduced = cost - u[:, None] - v[None, :]
        if bland:
            eligible = np.flatnonzero(reduced.ravel() < -tol)
            if eligible.size == 0:
                break
            flat = int(eligible[0])
        else:
            flat = int(np.argmin(reduced))
            if reduced.flat[flat] >= -tol:
                break
        p, q = divmod(flat, n)
        nodes = _cycle_nodes(parent, depth, p, m + q)
        arcs = []
        for x, y in zip(nodes, nodes[1:]):
            if x < m:
                arcs.append(((x, y - m), 1))
            else:
                arcs.append(((y, x - m), -1))
        delta = None
        leaving = None
        for arc, sign in arcs[1:]:
            if sign < 0:
                f = flow[arc]
                if delta is None or f < delta or (f == delta and arc < leaving):
                    delta = f
                    leaving = arc
        if leaving is None:
            raise SolverFailureError("transport cycle without a leaving arc", pivots=pivots)
        flow[(p, q)] = 0
        for arc, sign in arcs:
            flow[arc] += sign * delta
        if flow[leaving] != 0:
            raise SolverFailureError("leaving arc retained flow", pivots=pivots)
        del flow[leaving]
        li, lj = leaving
        adj[li].discard(m + lj)
        adj[m + lj].discard(li)
        adj[p].add(m + q)
        adj[m + q].add(p)
        pivots += 1
        if delta == 0:
            stall += 1
            if not bland and stall > stall_limit:
                bland = True
        else:
            stall = 0
            bland = False
        if pivots > max_pivots:
            raise SolverFailureError("network simplex hit its pivot cap", pivots=pivots)
    return flow
