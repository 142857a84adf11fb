"""Optimal transport solvers for discrete measures with squared-Euclidean cost.

Entropic Sinkhorn scaling is the workhorse; an exact LP solver (vertex
optimal, deterministic) covers small problems and test oracles. Plans follow
the convention: rows index the first marginal, columns the second, so
P @ 1 = row_marginal and P.T @ 1 = col_marginal.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.special import logsumexp

from .measures import DiscreteMeasure, cost_matrix

DEFAULT_MAX_ITER = 10_000
DEFAULT_TOL = 1e-6
EXACT_ENTRY_CAP = 1_000_000

# scaling vectors beyond this magnitude are absorbed into log potentials
_ABSORB_LIMIT = 1e100

_UNDERFLOW_MSG = (
    "Sinkhorn scaling underflowed; use log_domain=True or a larger epsilon"
)


class NumericalError(RuntimeError):
    """A solver failed for numerical reasons (underflow, LP failure)."""


@dataclass(frozen=True)
class TransportPlan:
    """A nonnegative coupling matrix with its marginals and cost.

    `residual` is the L1 row-marginal error of the returned plan (columns are
    matched exactly by the final scaling sweep); `residual_history` records it
    after every full sweep for solvers that iterate.
    """

    matrix: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    transport_cost: float
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    residual_history: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        P = np.asarray(self.matrix, dtype=np.float64)
        if P.ndim != 2:
            raise ValueError("plan must be a p x n matrix")
        if np.any(P < -1e-12):
            raise ValueError("plan entries must be nonnegative")
        object.__setattr__(self, "matrix", P)

    def marginal_error(self):
        """L1 deviation of both marginals from their prescribed values."""
        row = np.abs(self.matrix.sum(axis=1) - self.row_marginal).sum()
        col = np.abs(self.matrix.sum(axis=0) - self.col_marginal).sum()
        return row + col

    def check_marginals(self, tol=1e-6):
        err = self.marginal_error()
        if err > tol:
            raise ValueError(f"plan marginals deviate by {err:g} > {tol:g}")


def _check_problem(a, b, M):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape != (a.shape[0], b.shape[0]):
        raise ValueError(
            f"cost matrix shape {M.shape} does not match weights ({a.shape[0]}, {b.shape[0]})"
        )
    return a, b, M


def _want_log_domain(epsilon, M, log_domain):
    # Log-domain iterations when epsilon is small against the cost scale;
    # (stabilized) plain scaling is much faster otherwise.
    if log_domain is not None:
        return bool(log_domain)
    return epsilon < 1e-2 * float(np.median(M))


def sinkhorn(a, b, M, epsilon, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL,
             log_domain=None):
    """Entropy regularized transport between weights a (rows) and b (columns).

    Args:
      a: (p,) row marginal (simplex weights).
      b: (n,) column marginal.
      M: (p, n) cost matrix.
      epsilon: regularization strength, > 0 (absolute units of M).
      max_iter: scaling sweep cap; running out returns an unconverged plan
        rather than raising.
      tol: L1 row-marginal residual at which to stop.
      log_domain: None (default) picks log-domain iterations for small
        epsilon and otherwise plain scaling stabilized by log-potential
        absorption; True forces pure log-domain; False forces plain scaling
        with no stabilization.

    Returns:
      TransportPlan of the form D(u) exp(-M/epsilon) D(v). `converged` is
      False when max_iter was reached before the residual dropped below tol.

    Raises:
      NumericalError: with log_domain=False, the scaling vectors became
        non-finite (underflow); rerun with log_domain=True (or None) or a
        larger epsilon.
    """
    a, b, M = _check_problem(a, b, M)
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if _want_log_domain(epsilon, M, log_domain):
        logP, iters, history = _sinkhorn_log(a, b, M, epsilon, max_iter, tol)
        P = np.exp(logP)
    elif log_domain is False:
        P, iters, history = _sinkhorn_strict(a, b, M, epsilon, max_iter, tol)
    else:
        P, iters, history = _sinkhorn_stabilized(a, b, M, epsilon, max_iter, tol)
    res = history[-1]
    return TransportPlan(
        matrix=P,
        row_marginal=a,
        col_marginal=b,
        transport_cost=float((P * M).sum()),
        iterations=iters,
        residual=float(res),
        converged=bool(res <= tol),
        residual_history=np.asarray(history),
    )


def _mask_ones(w):
    return np.where(w > 0, 1.0, 0.0)


def _safe_log(x):
    return np.log(np.where(x > 0, x, 1.0))


def _sinkhorn_strict(a, b, M, epsilon, max_iter, tol):
    """Classic scaling loop; underflow is detected and raised."""
    K = np.exp(-M / epsilon)
    v = _mask_ones(b)
    Kv = K @ v
    history = []
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for it in range(1, max_iter + 1):
            u = np.where(a > 0, a / Kv, 0.0)
            if not np.all(np.isfinite(u)):
                raise NumericalError(_UNDERFLOW_MSG)
            KTu = K.T @ u
            v = np.where(b > 0, b / KTu, 0.0)
            if not np.all(np.isfinite(v)):
                raise NumericalError(_UNDERFLOW_MSG)
            Kv = K @ v
            res = np.abs(u * Kv - a).sum()
            history.append(res)
            if res <= tol:
                break
    return u[:, None] * K * v[None, :], it, history


def _sinkhorn_stabilized(a, b, M, epsilon, max_iter, tol):
    """Plain scaling stabilized by absorbing extremes into log potentials.

    When a scaling vector leaves the safe range (or a kernel row or column
    dies by underflow) the current sweep is redone as an exact log-domain
    half-update and the kernel is rebuilt around the new potentials, so the
    iteration matches plain Sinkhorn but cannot underflow on finite costs.
    """
    with np.errstate(divide="ignore"):
        log_a = np.log(a)
        log_b = np.log(b)
    alpha = np.zeros_like(a)
    beta = np.zeros_like(b)
    K = np.exp(-M / epsilon)
    u = _mask_ones(a)
    v = _mask_ones(b)
    Kv = K @ v
    history = []

    def rebuild(alpha, beta):
        with np.errstate(over="ignore", invalid="ignore"):
            K = np.exp((alpha[:, None] + beta[None, :] - M) / epsilon)
        u = _mask_ones(a)
        v = _mask_ones(b)
        return u, v, K, K @ v

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for it in range(1, max_iter + 1):
            u = np.where(a > 0, a / Kv, 0.0)
            if not np.all(np.isfinite(u)):
                beta = beta + epsilon * _safe_log(v)
                alpha = epsilon * log_a - epsilon * logsumexp(
                    (beta[None, :] - M) / epsilon, axis=1)
                u, v, K, Kv = rebuild(alpha, beta)
                continue
            KTu = K.T @ u
            v = np.where(b > 0, b / KTu, 0.0)
            if not np.all(np.isfinite(v)):
                alpha = alpha + epsilon * _safe_log(u)
                beta = epsilon * log_b - epsilon * logsumexp(
                    (alpha[:, None] - M) / epsilon, axis=0)
                u, v, K, Kv = rebuild(alpha, beta)
                continue
            if max(u.max(), v.max()) > _ABSORB_LIMIT:
                alpha = alpha + epsilon * _safe_log(u)
                beta = beta + epsilon * _safe_log(v)
                u, v, K, Kv = rebuild(alpha, beta)
            else:
                Kv = K @ v
            res = np.abs(u * Kv - a).sum()
            history.append(res)
            if res <= tol:
                break
    return u[:, None] * K * v[None, :], it, history


def _sinkhorn_log(a, b, M, epsilon, max_iter, tol):
    with np.errstate(divide="ignore"):
        log_a = np.log(a)
        log_b = np.log(b)
    g = np.zeros_like(b)
    history = []
    for it in range(1, max_iter + 1):
        f = epsilon * log_a - epsilon * logsumexp((g[None, :] - M) / epsilon, axis=1)
        f = np.where(a > 0, f, -np.inf)
        g = epsilon * log_b - epsilon * logsumexp((f[:, None] - M) / epsilon, axis=0)
        g = np.where(b > 0, g, -np.inf)
        logP = (f[:, None] + g[None, :] - M) / epsilon
        res = np.abs(np.exp(logsumexp(logP, axis=1)) - a).sum()
        history.append(res)
        if res <= tol:
            break
    return logP, it, history


def sinkhorn_grid(a, b, Ms, epsilon, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL,
                  log_domain=None):
    """Sinkhorn on a stack of cost matrices sharing the same marginals.

    Ms has shape (K, p, n); all K problems are iterated together until the
    worst residual passes tol, so already-converged slices only get extra
    refinement sweeps. Plain scaling is stabilized the same way as
    `sinkhorn`'s automatic mode. Returns a list of K TransportPlan.
    """
    Ms = np.asarray(Ms, dtype=np.float64)
    if Ms.ndim != 3:
        raise ValueError("Ms must have shape (K, p, n)")
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if Ms.shape[1] != a.shape[0] or Ms.shape[2] != b.shape[0]:
        raise ValueError("cost stack shape does not match weights")
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")

    if _want_log_domain(epsilon, Ms, log_domain):
        P, it, res = _grid_log(a, b, Ms, epsilon, max_iter, tol)
    else:
        P, it, res = _grid_stabilized(a, b, Ms, epsilon, max_iter, tol)

    costs = np.einsum("kpn,kpn->k", P, Ms)
    return [
        TransportPlan(
            matrix=P[k],
            row_marginal=a,
            col_marginal=b,
            transport_cost=float(costs[k]),
            iterations=it,
            residual=float(res[k]),
            converged=bool(res[k] <= tol),
        )
        for k in range(Ms.shape[0])
    ]


def _grid_log(a, b, Ms, epsilon, max_iter, tol):
    with np.errstate(divide="ignore"):
        log_a = np.log(a)
        log_b = np.log(b)
    g = np.zeros((Ms.shape[0], b.shape[0]))
    for it in range(1, max_iter + 1):
        f = epsilon * log_a[None, :] - epsilon * logsumexp(
            (g[:, None, :] - Ms) / epsilon, axis=2)
        f = np.where(a[None, :] > 0, f, -np.inf)
        g = epsilon * log_b[None, :] - epsilon * logsumexp(
            (f[:, :, None] - Ms) / epsilon, axis=1)
        g = np.where(b[None, :] > 0, g, -np.inf)
        logP = (f[:, :, None] + g[:, None, :] - Ms) / epsilon
        res = np.abs(np.exp(logsumexp(logP, axis=2)) - a[None, :]).sum(axis=1)
        if res.max() <= tol:
            break
    return np.exp(logP), it, res


def _grid_stabilized(a, b, Ms, epsilon, max_iter, tol):
    with np.errstate(divide="ignore"):
        log_a = np.log(a)
        log_b = np.log(b)
    n_slices = Ms.shape[0]
    alpha = np.zeros((n_slices, a.shape[0]))
    beta = np.zeros((n_slices, b.shape[0]))
    Ker = np.exp(-Ms / epsilon)
    u = np.broadcast_to(_mask_ones(a), alpha.shape).copy()
    v = np.broadcast_to(_mask_ones(b), beta.shape).copy()
    Kv = np.einsum("kpn,kn->kp", Ker, v)

    def rebuild(alpha, beta):
        with np.errstate(over="ignore", invalid="ignore"):
            Ker = np.exp((alpha[:, :, None] + beta[:, None, :] - Ms) / epsilon)
        u = np.broadcast_to(_mask_ones(a), alpha.shape).copy()
        v = np.broadcast_to(_mask_ones(b), beta.shape).copy()
        return u, v, Ker, np.einsum("kpn,kn->kp", Ker, v)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for it in range(1, max_iter + 1):
            u = np.where(a[None, :] > 0, a[None, :] / Kv, 0.0)
            if not np.all(np.isfinite(u)):
                beta = beta + epsilon * _safe_log(v)
                alpha = epsilon * log_a[None, :] - epsilon * logsumexp(
                    (beta[:, None, :] - Ms) / epsilon, axis=2)
                u, v, Ker, Kv = rebuild(alpha, beta)
                continue
            KTu = np.einsum("kpn,kp->kn", Ker, u)
            v = np.where(b[None, :] > 0, b[None, :] / KTu, 0.0)
            if not np.all(np.isfinite(v)):
                alpha = alpha + epsilon * _safe_log(u)
                beta = epsilon * log_b[None, :] - epsilon * logsumexp(
                    (alpha[:, :, None] - Ms) / epsilon, axis=1)
                u, v, Ker, Kv = rebuild(alpha, beta)
                continue
            if max(u.max(), v.max()) > _ABSORB_LIMIT:
                alpha = alpha + epsilon * _safe_log(u)
                beta = beta + epsilon * _safe_log(v)
                u, v, Ker, Kv = rebuild(alpha, beta)
            else:
                Kv = np.einsum("kpn,kn->kp", Ker, v)
            res = np.abs(u * Kv - a[None, :]).sum(axis=1)
            if res.max() <= tol:
                break
    return u[:, :, None] * Ker * v[:, None, :], it, res


def exact_transport(a, b, M, max_entries=EXACT_ENTRY_CAP):
    """Exact optimal transport via linear programming (vertex optimal).

    Solved with the HiGHS dual simplex, so the returned plan is a vertex of
    the transportation polytope and deterministic for a fixed input ordering.

    Raises:
      ValueError: problem has more than `max_entries` plan entries; use
        `sinkhorn` for problems of that size.
      NumericalError: the LP solver failed.
    """
    a, b, M = _check_problem(a, b, M)
    p, n = M.shape
    if p * n > max_entries:
        raise ValueError(
            f"exact transport capped at {max_entries} plan entries "
            f"(got {p * n}); use sinkhorn for larger problems"
        )
    rows = []
    cols = []
    for i in range(p):
        rows.extend([i] * n)
        cols.extend(range(i * n, (i + 1) * n))
    for j in range(n):
        rows.extend([p + j] * p)
        cols.extend(range(j, p * n, n))
    A = sparse.coo_matrix(
        (np.ones(2 * p * n), (rows, cols)), shape=(p + n, p * n)
    ).tocsr()
    rhs = np.concatenate([a, b])
    result = linprog(M.ravel(), A_eq=A, b_eq=rhs, bounds=(0, None), method="highs-ds")
    if not result.success:
        raise NumericalError(f"exact transport LP failed: {result.message}")
    P = np.clip(result.x.reshape(p, n), 0.0, None)
    return TransportPlan(
        matrix=P,
        row_marginal=a,
        col_marginal=b,
        transport_cost=float((P * M).sum()),
        iterations=int(result.nit),
        residual=float(np.abs(P.sum(axis=1) - a).sum()),
        converged=True,
    )


def w2_squared(nu, eta, method="exact", epsilon=None, **solver_kwargs):
    """Squared 2-Wasserstein distance between two discrete measures.

    method is "exact" or "sinkhorn"; the latter requires epsilon and returns
    the transport cost <P, M> of the entropic plan (slightly biased upward).
    """
    if nu.d != eta.d:
        raise ValueError("dimension mismatch")
    M = cost_matrix(nu.locations, eta.locations)
    if method == "exact":
        plan = exact_transport(nu.weights, eta.weights, M, **solver_kwargs)
    elif method == "sinkhorn":
        if epsilon is None:
            raise ValueError("sinkhorn method requires epsilon")
        plan = sinkhorn(nu.weights, eta.weights, M, epsilon, **solver_kwargs)
    else:
        raise ValueError(f"unknown method {method!r}")
    return plan.transport_cost


@dataclass(frozen=True)
class BarycentricMap:
    """Conditional-expectation map extracted from a plan.

    images[:, k] is where source atom k is sent; it is a convex combination
    of the target atoms. `identity_fallback` flags zero-mass source atoms
    that were mapped to their own location.
    """

    images: np.ndarray
    source_weights: np.ndarray
    identity_fallback: np.ndarray


def barycentric_projection(plan, targets, source_locations=None):
    """Row-normalized image of each source atom under a transport plan.

    images[:, k] = (sum_j P_kj x_j) / b_k, i.e. targets @ P.T @ D(1/b).

    Source atoms with b_k = 0 and an all-zero plan row fall back to their own
    location (requires source_locations); b_k = 0 with a nonzero row is an
    inconsistent plan and raises.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    P = plan.matrix
    b = plan.row_marginal
    if targets.shape[1] != P.shape[1]:
        raise ValueError("targets do not match plan columns")
    raw = targets @ P.T
    zero = b == 0.0
    fallback = np.zeros(P.shape[0], dtype=bool)
    if zero.any():
        if np.any(P[zero].sum(axis=1) > 0):
            raise ValueError("zero-weight source atom carries plan mass")
        if source_locations is None:
            raise ValueError(
                "zero-weight source atoms need source_locations for the identity fallback"
            )
        fallback = zero
    safe_b = np.where(zero, 1.0, b)
    images = raw / safe_b[None, :]
    if fallback.any():
        source_locations = np.atleast_2d(np.asarray(source_locations, dtype=np.float64))
        images[:, fallback] = source_locations[:, fallback]
    return BarycentricMap(images=images, source_weights=b.copy(),
                          identity_fallback=fallback)


def map_pushforward(base, images):
    """Measure obtained by moving each atom of `base` to its image."""
    return DiscreteMeasure(images, base.weights)


def map_optimality_gap(base, images):
    """How far a map is from being optimal out of `base`.

    Returns (map_cost, w2sq): the map's transport cost sum_k b_k ||y_k - T_k||^2
    and the exact squared distance between `base` and the map's pushforward.
    The map is optimal iff the two agree (map_cost >= w2sq always).
    """
    diff = images - base.locations
    map_cost = float(np.einsum("dk,dk,k->", diff, diff, base.weights))
    w2sq = w2_squared(base, map_pushforward(base, images), method="exact")
    return map_cost, w2sq
