"""Independent reference computations the tests check the library against.

Everything here is deliberately written the slow, obvious way (loops,
enumeration, a second LP stack) so it shares no code path with the package.
"""

import numpy as np


def cost_matrix_loops(Z, X):
    p = Z.shape[1]
    n = X.shape[1]
    M = np.zeros((p, n))
    for k in range(p):
        for j in range(n):
            M[k, j] = float(np.sum((Z[:, k] - X[:, j]) ** 2))
    return M


def weighted_inner_loops(u, v, b):
    total = 0.0
    for k in range(u.shape[1]):
        total += b[k] * float(u[:, k] @ v[:, k])
    return total


def wasserstein_1d(x, a, y, b):
    """Exact 1-d squared-distance transport by monotone rearrangement.

    Returns (cost, entries) where entries are (source index, target index,
    mass) triples of the quantile-matching coupling.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    a = np.asarray(a, dtype=np.float64).ravel().copy()
    b = np.asarray(b, dtype=np.float64).ravel().copy()
    ix = np.argsort(x, kind="stable")
    iy = np.argsort(y, kind="stable")
    i = j = 0
    cost = 0.0
    entries = []
    ra = a[ix[i]]
    rb = b[iy[j]]
    while True:
        m = min(ra, rb)
        if m > 0:
            cost += m * (x[ix[i]] - y[iy[j]]) ** 2
            entries.append((int(ix[i]), int(iy[j]), m))
        ra -= m
        rb -= m
        if ra <= 1e-15:
            i += 1
            if i == len(ix):
                break
            ra = a[ix[i]]
        if rb <= 1e-15:
            j += 1
            if j == len(iy):
                break
            rb = b[iy[j]]
    return cost, entries


def lp_transport_reference(a, b, M):
    """Exact transport cost from an independent LP stack (cvxpy + GLPK)."""
    import cvxpy as cp

    p, n = M.shape
    P = cp.Variable((p, n), nonneg=True)
    constraints = [cp.sum(P, axis=1) == a, cp.sum(P, axis=0) == b]
    problem = cp.Problem(cp.Minimize(cp.sum(cp.multiply(P, M))), constraints)
    problem.solve(solver=cp.GLPK)
    if problem.status != "optimal":
        raise RuntimeError(f"reference LP not optimal: {problem.status}")
    return float(problem.value), np.asarray(P.value)


def central_difference(f, X, step=1e-5):
    """Entrywise central finite differences of a scalar function of a matrix."""
    X = np.asarray(X, dtype=np.float64)
    grad = np.zeros_like(X)
    it = np.nditer(X, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        plus = X.copy()
        plus[idx] += step
        minus = X.copy()
        minus[idx] -= step
        grad[idx] = (f(plus) - f(minus)) / (2 * step)
        it.iternext()
    return grad


def quantile_function(x, a, levels):
    """Left-continuous quantile function of a 1-d measure at given levels."""
    order = np.argsort(x, kind="stable")
    xs = np.asarray(x, dtype=np.float64)[order]
    cdf = np.cumsum(np.asarray(a, dtype=np.float64)[order])
    return xs[np.searchsorted(cdf, np.asarray(levels) - 1e-12, side="left").clip(0, len(xs) - 1)]


def w1_distance_1d(x, a, y, b, grid=20001):
    """1-d W1 distance = L1 distance between quantile functions (midpoint rule)."""
    levels = (np.arange(grid) + 0.5) / grid
    qx = quantile_function(x, a, levels)
    qy = quantile_function(y, b, levels)
    return float(np.abs(qx - qy).mean())


def random_measure(rng, d, n, spread=1.0):
    from wassgeo import DiscreteMeasure

    locations = spread * rng.standard_normal((d, n))
    weights = rng.random(n) + 0.05
    return DiscreteMeasure(locations, weights / weights.sum())
