"""Ground costs and balanced OT solvers (exact and entropic)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError
from .simplex import transportation_simplex

METRICS = ("euclidean", "squared_euclidean", "precomputed")
SOLVERS = ("exact", "entropic", "uot_entropic", "pot_exact", "pot_entropic")
MASS_ATOL = 1e-9
ANNEAL_RATIO = 3.0


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud: ``points`` is (n, d), ``weights`` is (n,)."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidInputError(f"points must be a non-empty (n, d) matrix, got shape {pts.shape}")
        if w.shape[0] != pts.shape[0]:
            raise InvalidInputError(f"{w.shape[0]} weights for {pts.shape[0]} points")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidInputError("weights must be finite and nonnegative")
        total = w.sum()
        if not (0.0 < total <= 1.0 + MASS_ATOL):
            raise InvalidInputError(f"weight sum must lie in (0, 1], got {total!r}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points) -> "DiscreteMeasure":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = pts.shape[0]
        return cls(pts, np.full(n, 1.0 / n))

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def mass(self) -> float:
        return float(self.weights.sum())


@dataclass(frozen=True, eq=False)
class CostMatrix:
    entries: np.ndarray
    metric: str = "precomputed"

    def __post_init__(self):
        c = np.asarray(self.entries, dtype=float)
        if c.ndim != 2:
            raise InvalidInputError(f"cost matrix must be 2-D, got shape {c.shape}")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise InvalidInputError("cost entries must be finite and nonnegative")
        if self.metric not in METRICS:
            raise InvalidInputError(f"unknown metric {self.metric!r}")
        object.__setattr__(self, "entries", c)

    @property
    def shape(self):
        return self.entries.shape

    def scaled(self, factor: float) -> "CostMatrix":
        return CostMatrix(self.entries * factor, "precomputed")


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """A coupling together with the bookkeeping recorded at solve time."""

    coupling: np.ndarray
    total_mass: float
    objective: float
    solver: str
    converged: bool = True
    iterations: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def row_sums(self) -> np.ndarray:
        return self.coupling.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.coupling.sum(axis=0)


@dataclass(frozen=True)
class SolverParams:
    epsilon: float = 0.01
    tolerance: float = 1e-7
    max_iterations: int = 10000

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise InvalidInputError("epsilon must be >= 0")
        if not self.tolerance > 0:
            raise InvalidInputError("tolerance must be > 0")
        if int(self.max_iterations) < 1:
            raise InvalidInputError("max_iterations must be >= 1")


def as_cost(C) -> np.ndarray:
    if isinstance(C, CostMatrix):
        return C.entries
    arr = np.asarray(C, dtype=float)
    if arr.ndim != 2:
        raise InvalidInputError(f"cost matrix must be 2-D, got shape {arr.shape}")
    return arr


def _check_weights(a, b, C):
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    C = as_cost(C)
    if C.shape != (a.size, b.size):
        raise InvalidInputError(f"cost shape {C.shape} does not match weights ({a.size}, {b.size})")
    if np.any(a < 0) or np.any(b < 0):
        raise InvalidInputError("weights must be nonnegative")
    return a, b, C


def _check_balanced(a, b):
    if abs(a.sum() - b.sum()) > MASS_ATOL:
        raise InvalidInputError(f"marginal masses differ: {a.sum()!r} vs {b.sum()!r}")


def build_cost(source: DiscreteMeasure, target: DiscreteMeasure, metric: str = "euclidean") -> CostMatrix:
    """Pairwise ground cost between the supports of two measures."""
    xs = source.points if isinstance(source, DiscreteMeasure) else np.atleast_2d(np.asarray(source, float))
    ys = target.points if isinstance(target, DiscreteMeasure) else np.atleast_2d(np.asarray(target, float))
    if xs.shape[1] != ys.shape[1]:
        raise InvalidInputError(f"dimension mismatch: {xs.shape[1]} vs {ys.shape[1]}")
    if metric not in ("euclidean", "squared_euclidean"):
        raise InvalidInputError(f"cannot build a {metric!r} cost from points")
    diff = xs[:, None, :] - ys[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    entries = np.sqrt(sq) if metric == "euclidean" else sq
    return CostMatrix(entries, metric)


def plan_cost(plan, C) -> float:
    """``<C, plan>``; ``plan`` may be a TransportPlan or a raw matrix."""
    P = plan.coupling if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=float)
    C = as_cost(C)
    if P.shape != C.shape:
        raise InvalidInputError(f"plan shape {P.shape} does not match cost shape {C.shape}")
    return float(np.sum(C * P))


def _is_uniform_square(a, b):
    return a.size == b.size and a.size > 0 and np.all(a == a[0]) and np.all(b == a[0])


def solve_ot_exact(a, b, C, method: str = "auto") -> TransportPlan:
    """Exact balanced OT.

    ``method="simplex"`` always runs the transportation simplex. ``"auto"``
    short-cuts equal-size uniform problems to an assignment solver, whose
    optimal permutations are vertices of the same polytope.
    """
    a, b, C = _check_weights(a, b, C)
    _check_balanced(a, b)
    if method not in ("auto", "simplex", "assignment"):
        raise InvalidInputError(f"unknown exact method {method!r}")
    use_assignment = method == "assignment" or (method == "auto" and _is_uniform_square(a, b))
    if use_assignment:
        if not _is_uniform_square(a, b):
            raise InvalidInputError("assignment method needs equal-size uniform marginals")
        rows, cols = linear_sum_assignment(C)
        P = np.zeros_like(C)
        P[rows, cols] = a[rows]
        pivots = 0
    else:
        P, _, _, pivots = transportation_simplex(a, b, C)
    return TransportPlan(P, float(P.sum()), float(np.sum(C * P)), "exact", True, pivots)


def _lse(x, axis):
    top = np.max(x, axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(x - top), axis=axis, keepdims=True)) + top
    return np.squeeze(out, axis=axis)


def log_sinkhorn(a, b, C, epsilon, tolerance, max_iterations, rho=None, newton_after=200):
    """Log-domain (generalized) Sinkhorn against the reference ``a ⊗ b``.

    The plan is ``a_i b_j exp((f_i + g_j - C_ij) / epsilon)``. With
    ``rho=None`` the marginals are hard constraints and the loop stops on
    the L1 marginal violation; with a finite ``rho`` they are KL penalties
    with weight ``rho`` and the loop stops on the L-inf change of the log
    plan.

    In the balanced case epsilon is annealed geometrically from the cost
    scale down to the target, warm-starting the potentials, and whenever
    plain scaling has not met the tolerance after ``newton_after`` sweeps the
    remaining budget of that stage goes to damped Newton steps on the dual.

    Returns ``(plan, f, g, iterations, converged)``.
    """
    n, m = C.shape
    with np.errstate(divide="ignore"):
        log_a = np.log(a)
        log_b = np.log(b)
    f = np.zeros(n)
    g = np.zeros(m)
    budget = int(max_iterations)
    used = 0
    if rho is None:
        top = float(C.max()) if C.size else 0.0
        stages = int(np.ceil(np.log(top / epsilon) / np.log(ANNEAL_RATIO))) if top > epsilon else 0
        schedule = [top * (epsilon / top) ** (i / stages) for i in range(stages)]
        for e in schedule:
            f, g, it, _ = _scaling_loop(log_a, log_b, C, e, 1e-6, min(budget - used, 200), None, f, g, 50)
            used += it
            if used >= budget:
                break
    f, g, it, converged = _scaling_loop(
        log_a, log_b, C, epsilon, tolerance, max(budget - used, 1), rho, f, g, newton_after
    )
    used += it
    P = _plan_from_potentials(log_a, log_b, C, f, g, epsilon)
    return P, f, g, used, converged


def _scaling_loop(log_a, log_b, C, epsilon, tolerance, max_iterations, rho, f, g, newton_after):
    a = np.exp(log_a)
    kappa = 1.0 if rho is None else rho / (rho + epsilon)
    scaled = -C / epsilon
    converged = False
    it = 0
    row_lse = _lse(scaled + (log_b + g / epsilon)[None, :], axis=1)
    while it < max_iterations:
        it += 1
        f_old, g_old = f, g
        f = -kappa * epsilon * row_lse
        g = -kappa * epsilon * _lse(scaled + (log_a + f / epsilon)[:, None], axis=0)
        row_lse = _lse(scaled + (log_b + g / epsilon)[None, :], axis=1)
        if rho is None:
            # row marginal of the current plan is a * exp(f/eps + row_lse)
            with np.errstate(invalid="ignore"):
                err = float(np.nansum(a * np.abs(np.expm1(f / epsilon + row_lse))))
        else:
            df, dg = f - f_old, g - g_old
            err = max(abs(df.max() + dg.max()), abs(df.min() + dg.min())) / epsilon
        if err <= tolerance:
            converged = True
            break
        if rho is None and it >= newton_after:
            f_n, g_n, extra, ok = _newton_dual(a, np.exp(log_b), C, epsilon, f, g, tolerance, max_iterations - it)
            it += extra
            if ok:
                f, g, converged = f_n, g_n, True
            break
    return f, g, it, converged


def _plan_from_potentials(log_a, log_b, C, f, g, epsilon):
    with np.errstate(invalid="ignore", over="ignore"):
        log_plan = log_a[:, None] + log_b[None, :] + (f[:, None] + g[None, :] - C) / epsilon
        return np.where(np.isfinite(log_plan) | (log_plan > 0), np.exp(log_plan), 0.0)


def _newton_dual(a, b, C, epsilon, f, g, tolerance, budget):
    """Damped Newton ascent on the entropic dual, restricted to the supports."""
    rows, cols = a > 0, b > 0
    a_s, b_s, C_s = a[rows], b[cols], C[np.ix_(rows, cols)]
    la, lb = np.log(a_s), np.log(b_s)
    n = a_s.size
    fs, gs = f[rows].copy(), g[cols].copy()

    def state(fv, gv):
        P = _plan_from_potentials(la, lb, C_s, fv, gv, epsilon)
        value = fv @ a_s + gv @ b_s - epsilon * P.sum()
        return P, value

    P, value = state(fs, gs)
    steps = 0
    converged = False
    while steps < budget:
        r, c = P.sum(axis=1), P.sum(axis=0)
        grad = np.concatenate([a_s - r, b_s - c])
        if np.abs(grad).sum() <= tolerance:
            converged = True
            break
        M = np.block([[np.diag(r), P], [P.T, np.diag(c)]]) / epsilon
        d = np.linalg.lstsq(M, grad, rcond=None)[0]
        slope = grad @ d
        t = 1.0
        while t > 1e-12:
            f_try, g_try = fs + t * d[:n], gs + t * d[n:]
            P_try, v_try = state(f_try, g_try)
            if np.isfinite(v_try) and v_try >= value + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break
        fs, gs, P, value = f_try, g_try, P_try, v_try
        steps += 1
    f, g = f.copy(), g.copy()
    f[rows], g[cols] = fs, gs
    return f, g, steps, converged


def solve_ot_entropic(a, b, C, params: SolverParams | None = None) -> TransportPlan:
    """Entropic OT via log-domain Sinkhorn.

    Non-convergence is not an error: the last iterate is returned with
    ``converged=False``.
    """
    params = params or SolverParams()
    a, b, C = _check_weights(a, b, C)
    _check_balanced(a, b)
    if not params.epsilon > 0:
        raise InvalidInputError("entropic OT needs epsilon > 0")
    P, f, g, it, ok = log_sinkhorn(a, b, C, params.epsilon, params.tolerance, params.max_iterations)
    return TransportPlan(P, float(P.sum()), float(np.sum(C * P)), "entropic", ok, it, {"f": f, "g": g})


def wasserstein2(source: DiscreteMeasure, target: DiscreteMeasure) -> float:
    """Exact 2-Wasserstein distance under the squared Euclidean ground cost."""
    if abs(source.mass - target.mass) > MASS_ATOL:
        raise InvalidInputError(f"total masses differ: {source.mass!r} vs {target.mass!r}")
    C = build_cost(source, target, "squared_euclidean")
    plan = solve_ot_exact(source.weights, target.weights, C)
    return float(np.sqrt(max(plan.objective, 0.0)))
