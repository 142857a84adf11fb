"""Wasserstein barycenters of families of discrete measures.

Three routes: scaling iterations on a fixed support (shared grid), an
alternating free-support scheme (plan solves + support updates), and the
exact multi-marginal linear program for tiny instances (the test oracle).
"""

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.special import logsumexp

from .kmeans import kmeans
from .measures import DiscreteMeasure, cost_matrix
from .transport import NumericalError, sinkhorn

MULTIMARGINAL_TUPLE_CAP = 100_000


def _uniform_lambdas(n, lambdas):
    if lambdas is None:
        return np.full(n, 1.0 / n)
    lam = np.asarray(lambdas, dtype=np.float64).ravel()
    if lam.shape[0] != n or np.any(lam < 0):
        raise ValueError("lambdas must be nonnegative, one per measure")
    return lam / lam.sum()


def barycenter_fixed_support(histograms, grid, epsilon, max_iter=5000, tol=1e-7,
                             lambdas=None, log_domain=None, return_history=False):
    """Entropic barycenter of histograms sharing one support grid.

    Runs the scaling iterations that alternately match each plan's marginal to
    its input histogram and average the shared barycenter marginal
    (geometrically). Stops when the barycenter's L1 change drops below tol.

    Args:
      histograms: (N, p) array or list of weight vectors on the grid.
      grid: (d, p) shared support locations.
      epsilon: entropic regularization, > 0 (absolute units of squared distance).
      lambdas: barycenter weights, default uniform.
      log_domain: force stabilized iterations (None = automatic).

    Returns:
      DiscreteMeasure on the grid; with return_history=True also the list of
      barycenter weight iterates.
    """
    A = np.atleast_2d(np.asarray(histograms, dtype=np.float64))
    if A.shape[0] < 1:
        raise ValueError("need at least one histogram")
    grid = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    p = grid.shape[1]
    if A.shape[1] != p:
        raise ValueError(f"histograms have {A.shape[1]} bins, grid has {p}")
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    lam = _uniform_lambdas(A.shape[0], lambdas)
    A = A / A.sum(axis=1, keepdims=True)
    M = cost_matrix(grid, grid)
    if log_domain is None:
        log_domain = epsilon < 1e-2 * float(np.median(M))

    if log_domain:
        q, history = _fixed_support_log(A, M, epsilon, lam, max_iter, tol)
    else:
        q, history = _fixed_support_scaling(A, M, epsilon, lam, max_iter, tol)
    measure = DiscreteMeasure(grid, q)
    if return_history:
        return measure, history
    return measure


def _fixed_support_scaling(A, M, epsilon, lam, max_iter, tol):
    # Plans P_i = D(u_i) K D(v_i); columns match input i, rows match the
    # shared barycenter.
    K = np.exp(-M / epsilon)
    N, p = A.shape
    U = np.ones((p, N))
    q = np.full(p, 1.0 / p)
    history = [q]
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(max_iter):
            V = np.where(A.T > 0, A.T / (K.T @ U), 0.0)
            KV = K @ V
            if not np.all(np.isfinite(KV)):
                raise NumericalError(
                    "barycenter scaling underflowed; use log_domain=True or a larger epsilon"
                )
            log_q = (lam[None, :] * np.log(U * KV)).sum(axis=1)
            q_new = np.exp(log_q)
            U = q_new[:, None] / KV
            if not np.all(np.isfinite(U)):
                raise NumericalError(
                    "barycenter scaling underflowed; use log_domain=True or a larger epsilon"
                )
            history.append(q_new)
            delta = np.abs(q_new - q).sum()
            q = q_new
            if delta < tol:
                break
    return q / q.sum(), history


def _fixed_support_log(A, M, epsilon, lam, max_iter, tol):
    N, p = A.shape
    with np.errstate(divide="ignore"):
        log_A = np.log(A)
    F = np.zeros((N, p))
    q = np.full(p, 1.0 / p)
    history = [q]
    for _ in range(max_iter):
        G = epsilon * log_A - epsilon * logsumexp(
            (F[:, :, None] - M[None, :, :]) / epsilon, axis=1)
        S = logsumexp((G[:, None, :] - M[None, :, :]) / epsilon, axis=2)
        log_q = (lam[:, None] * (F / epsilon + S)).sum(axis=0)
        F = epsilon * (log_q[None, :] - S)
        q_new = np.exp(log_q)
        history.append(q_new)
        delta = np.abs(q_new - q).sum()
        q = q_new
        if delta < tol:
            break
    return q / q.sum(), history


def barycenter_free_support(measures, p, epsilon, outer_iter=50, seed=0,
                            move_tol=1e-9, sinkhorn_kwargs=None,
                            return_history=False):
    """Barycenter with free support locations and uniform atom weights.

    Alternates entropic plan solves against each input with a support update
    that moves every atom to the average of its per-input barycentric images.
    Initialized with seeded k-means centroids of the pooled atom cloud, so a
    fixed seed reproduces bit-identical output.

    Returns:
      DiscreteMeasure with at most p atoms; with return_history=True also the
      per-iteration transport objective sum_i <P_i, M_i> / N.
    """
    if not measures:
        raise ValueError("need at least one measure")
    d = measures[0].d
    if any(m.d != d for m in measures):
        raise ValueError("measures must share the ambient dimension")
    total_atoms = sum(m.n for m in measures)
    if p < 1 or p > total_atoms:
        raise ValueError(f"p must be in [1, {total_atoms}] (pooled atom budget)")
    sinkhorn_kwargs = dict(sinkhorn_kwargs or {})

    pooled = np.concatenate([m.locations for m in measures], axis=1)
    pooled_w = np.concatenate([m.weights for m in measures])
    pooled_w = pooled_w / pooled_w.sum()
    centers, _, _ = kmeans(pooled.T, p, np.random.default_rng(seed), weights=pooled_w)
    Y = centers.T
    b = np.full(Y.shape[1], 1.0 / Y.shape[1])

    objective = []
    for _ in range(outer_iter):
        images = np.zeros_like(Y)
        cost = 0.0
        for m in measures:
            M = cost_matrix(Y, m.locations)
            plan = sinkhorn(b, m.weights, M, epsilon, **sinkhorn_kwargs)
            images += (m.locations @ plan.matrix.T) / b[None, :]
            cost += plan.transport_cost
        images /= len(measures)
        objective.append(cost / len(measures))
        move = np.abs(images - Y).max()
        Y = images
        if move < move_tol:
            break
    measure = DiscreteMeasure(Y, b)
    if return_history:
        return measure, objective
    return measure


def barycenter_multimarginal_exact(measures, lambdas=None,
                                   max_tuples=MULTIMARGINAL_TUPLE_CAP):
    """Exact barycenter via the multi-marginal transport LP (tiny instances).

    Enumerates all support tuples, prices each at the weighted variance of its
    points around their weighted average, and solves the LP whose marginals
    are the input weight vectors. Atoms of the barycenter sit at the tuple
    averages that carry optimal mass.
    """
    if not measures:
        raise ValueError("need at least one measure")
    d = measures[0].d
    if any(m.d != d for m in measures):
        raise ValueError("measures must share the ambient dimension")
    sizes = [m.n for m in measures]
    n_tuples = int(np.prod(sizes))
    if n_tuples > max_tuples:
        raise ValueError(
            f"{n_tuples} support tuples exceed the cap {max_tuples}"
        )
    N = len(measures)
    lam = _uniform_lambdas(N, lambdas)

    idx = np.stack(
        np.meshgrid(*[np.arange(n) for n in sizes], indexing="ij")
    ).reshape(N, -1)
    mean = np.zeros((d, n_tuples))
    sumsq = np.zeros(n_tuples)
    for i, m in enumerate(measures):
        pts = m.locations[:, idx[i]]
        mean += lam[i] * pts
        sumsq += lam[i] * (pts * pts).sum(axis=0)
    costs = sumsq - (mean * mean).sum(axis=0)

    rows = []
    cols = []
    offset = 0
    for i in range(N):
        rows.append(offset + idx[i])
        cols.append(np.arange(n_tuples))
        offset += sizes[i]
    A = sparse.coo_matrix(
        (np.ones(N * n_tuples), (np.concatenate(rows), np.concatenate(cols))),
        shape=(offset, n_tuples),
    ).tocsr()
    rhs = np.concatenate([m.weights for m in measures])
    result = linprog(costs, A_eq=A, b_eq=rhs, bounds=(0, None), method="highs-ds")
    if not result.success:
        raise NumericalError(f"multi-marginal LP failed: {result.message}")
    gamma = np.clip(result.x, 0.0, None)
    keep = gamma > 1e-12
    from .geodesics import merge_close_atoms

    loc, w = merge_close_atoms(mean[:, keep], gamma[keep])
    return DiscreteMeasure(loc, w / w.sum())
