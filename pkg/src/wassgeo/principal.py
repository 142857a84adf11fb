"""Principal geodesic components of a family of measures around their mean.

Each component is a generalized geodesic through the base measure,
parameterized by two velocity fields on its support. Fitting alternates
three steps until the objective stalls:

  1. project every measure onto the current curve (grid search over the
     curve parameter, one transport solve per grid point);
  2. take a gradient step on the resulting quadratic surrogate of the
     summed squared distances plus the proportionality penalty;
  3. re-project the fields: first onto the orthogonal complement of the
     previously fitted components, then onto (near-)optimal maps via the
     barycentric projection of endpoint transport plans.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .geodesics import GeneralizedGeodesic, grad_omega, omega
from .measures import (
    DiscreteMeasure,
    check_velocity_field,
    cost_matrix,
    weighted_inner,
    weighted_norm,
)
from . import transport


@dataclass
class SolverConfig:
    """Knobs of the component solver; positivity is enforced on construction.

    epsilon is the absolute entropic regularization used by the grid-search
    transport solves (see the CLI for the relative-to-mean-cost convention).
    projection_solver picks the solver for those measure-onto-curve solves;
    endpoint plans for the optimal-map step are exact whenever the base has
    at most endpoint_exact_cap atoms, otherwise entropic with the same
    epsilon halved over the last anneal_iters outer iterations.
    """

    epsilon: float
    n_components: int = 1
    lam: float = 1.0
    beta: float = 0.1
    grid_k: int = 17
    max_outer_iter: int = 200
    obj_tol: float = 1e-5
    seed: int = 0
    projection_solver: str = "sinkhorn"
    translation_mode: bool = False
    init: str = "pca"
    backtracking: bool = True
    max_halvings: int = 20
    endpoint_exact_cap: int = 512
    anneal_iters: int = 3
    track_map_optimality: bool = False
    # Inner transport solves only need approximate plans (they carry their
    # residual); near the unregularized regime Sinkhorn's tail is ~1/k, so an
    # unbounded budget buys noise reduction at enormous cost.
    sinkhorn_max_iter: int = 1000
    sinkhorn_tol: float = 1e-6

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if self.grid_k < 2:
            raise ValueError("grid_k must be >= 2")
        if self.max_outer_iter < 1:
            raise ValueError("max_outer_iter must be >= 1")
        if self.obj_tol <= 0:
            raise ValueError("obj_tol must be > 0")
        if self.projection_solver not in ("sinkhorn", "exact"):
            raise ValueError("projection_solver must be 'sinkhorn' or 'exact'")
        if self.init not in ("pca", "random"):
            raise ValueError("init must be 'pca' or 'random'")


@dataclass
class PrincipalComponentSet:
    """Fitted components with their per-measure projection times and traces."""

    base: DiscreteMeasure
    components: list = field(default_factory=list)  # [(V1, V2)] per component
    projection_times: list = field(default_factory=list)  # (N,) array each
    objective_trace: list = field(default_factory=list)  # list of floats each
    map_optimality: list = field(default_factory=list)  # (map_cost, w2sq) pairs

    def geodesic(self, index):
        V1, V2 = self.components[index]
        return GeneralizedGeodesic(self.base, V1, V2)

    def orthogonality_max_violation(self):
        """Largest |<V, prior V1+V2>_b| over all components and both fields."""
        b = self.base.weights
        worst = 0.0
        for n, (V1, V2) in enumerate(self.components):
            for W1, W2 in self.components[:n]:
                w = W1 + W2
                worst = max(worst, abs(weighted_inner(V1, w, b)),
                            abs(weighted_inner(V2, w, b)))
        return worst


def euclidean_pca_means(measures):
    """Principal directions of the measures' mean points.

    Returns a (d, k) matrix of orthonormal columns in descending eigenvalue
    order; directions whose eigenvalue is negligible against the largest are
    dropped, so a degenerate covariance yields fewer columns.
    """
    if len(measures) < 2:
        raise ValueError("need at least two measures")
    means = np.stack([m.locations @ m.weights for m in measures], axis=1)
    centered = means - means.mean(axis=1, keepdims=True)
    cov = centered @ centered.T / means.shape[1]
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    keep = vals > max(vals[0], 0.0) * 1e-12
    if vals[0] <= 0:
        keep = np.zeros_like(keep)
    vecs = vecs[:, keep]
    # canonical sign: largest-magnitude entry positive
    for j in range(vecs.shape[1]):
        lead = np.argmax(np.abs(vecs[:, j]))
        if vecs[lead, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vecs


def _squared_norms(X):
    return (X * X).sum(axis=0)


def distance_to_geodesic(g, mu, cfg):
    """Projection of a measure onto a curve by exhaustive grid search.

    Evaluates the transport cost to the curve at grid_k uniform times in
    [0, 1] (entropic or exact plans per cfg) and returns the minimizing time,
    its plan, and the cost value computed from the marginal decomposition
    b.z + a.x - 2 <P, Z^T X>. Grid ties resolve to the smallest time.
    """
    ts = np.linspace(0.0, 1.0, cfg.grid_k)
    X = mu.locations
    a = mu.weights
    b = g.base.weights
    x_sq = float(a @ _squared_norms(X))
    Zs = np.stack([g.locations_at(t) for t in ts])
    if cfg.projection_solver == "exact":
        plans = [
            transport.exact_transport(b, a, cost_matrix(Z, X)) for Z in Zs
        ]
    else:
        Ms = np.stack([cost_matrix(Z, X) for Z in Zs])
        plans = transport.sinkhorn_grid(
            b, a, Ms, cfg.epsilon,
            max_iter=cfg.sinkhorn_max_iter, tol=cfg.sinkhorn_tol,
        )
    values = np.array([
        float(b @ _squared_norms(Z)) + x_sq
        - 2.0 * float(np.einsum("pn,pn->", plan.matrix, Z.T @ X))
        for Z, plan in zip(Zs, plans)
    ])
    k = int(np.argmin(values))
    return float(ts[k]), plans[k], float(values[k])


def majorization_value(V1, V2, plan, t_sharp, mu, base):
    """Quadratic surrogate <P, M_{Z X}> with Z built from (V1, V2) at t_sharp.

    Tight at the fields that produced (plan, t_sharp) and an upper bound on
    the curve distance elsewhere.
    """
    V1 = check_velocity_field(V1, base.n)
    V2 = check_velocity_field(V2, base.n)
    # a Sinkhorn plan is feasible only up to its reported residual
    plan.check_marginals(tol=1e-6 + plan.residual)
    if plan.matrix.shape != (base.n, mu.n):
        raise ValueError("plan shape does not match base and measure")
    Z = base.locations - V1 + t_sharp * (V1 + V2)
    return float((plan.matrix * cost_matrix(Z, mu.locations)).sum())


def mm_gradients(V1, V2, plan, t_sharp, mu, base):
    """Surrogate gradients with respect to both fields (weighted-metric form).

    G1 = 2 (t-1) (Z_t - X P^T D(1/b)) and G2 = 2 t (Z_t - X P^T D(1/b)):
    the common factor is the gap between the curve's atoms and their
    plan-barycentric images, so both vanish at a perfectly fitted time.
    """
    V1 = check_velocity_field(V1, base.n)
    V2 = check_velocity_field(V2, base.n)
    b = base.weights
    if np.any(b <= 0):
        raise ValueError("base weights must be strictly positive")
    Z = base.locations - V1 + t_sharp * (V1 + V2)
    D = Z - (mu.locations @ plan.matrix.T) / b[None, :]
    return 2.0 * (t_sharp - 1.0) * D, 2.0 * t_sharp * D


def orthogonality_projection(V, prior_sums, b):
    """Project a field onto the weighted-orthogonal complement of prior sums.

    Linearly dependent priors are dropped with a warning; the output is the
    closest field to V (weighted norm) among those orthogonal to every prior.
    """
    V = check_velocity_field(V)
    if not prior_sums:
        return V.copy()
    b = np.asarray(b, dtype=np.float64).ravel()
    basis = []
    for w in prior_sums:
        w = check_velocity_field(w, V.shape[1])
        r = w.copy()
        for e in basis:
            r = r - weighted_inner(r, e, b) * e
        norm = weighted_norm(r, b)
        if norm <= 1e-10 * max(weighted_norm(w, b), 1.0):
            warnings.warn("dropping linearly dependent prior component sum")
            continue
        basis.append(r / norm)
    out = V.copy()
    for e in basis:
        out = out - weighted_inner(out, e, b) * e
    return out


def optimal_map_projection(g, cfg, epsilon=None):
    """Pull both endpoint maps back into the optimal-map cone (approximately).

    Solves a transport plan from the base to each endpoint (exact for small
    supports, entropic otherwise) and replaces each field by the barycentric
    image displacement. Idempotent when the maps are already optimal and the
    plans do not split mass.
    """
    Y = g.base.locations
    b = g.base.weights
    if np.any(b <= 0):
        raise ValueError("base weights must be strictly positive")
    p = g.base.n
    eps = cfg.epsilon if epsilon is None else epsilon
    use_exact = p <= cfg.endpoint_exact_cap

    def project(endpoint):
        M = cost_matrix(Y, endpoint)
        if use_exact:
            plan = transport.exact_transport(b, b, M)
        else:
            plan = transport.sinkhorn(
                b, b, M, eps, max_iter=cfg.sinkhorn_max_iter, tol=cfg.sinkhorn_tol
            )
        return transport.barycentric_projection(plan, endpoint, source_locations=Y).images

    images1 = project(Y - g.v1)
    images2 = project(Y + g.v2)
    return GeneralizedGeodesic(g.base, Y - images1, images2 - Y)


def _translation_part(V, b):
    """Weighted column mean, replicated: the uniform-translation component."""
    tau = V @ b
    return np.tile(tau[:, None], (1, V.shape[1]))


def _initial_fields(measures, base, comp_index, cfg, rng):
    d, p = base.d, base.n
    if cfg.init == "pca" and len(measures) >= 2:
        dirs = euclidean_pca_means(measures)
        if dirs.shape[1] == 0:
            # the means do not vary at all: the warm-start scale is zero
            return np.zeros((d, p)), np.zeros((d, p))
        if comp_index < dirs.shape[1]:
            direction = dirs[:, comp_index]
            means = np.stack([m.locations @ m.weights for m in measures], axis=1)
            proj = direction @ (means - means.mean(axis=1, keepdims=True))
            scale = float(np.sqrt((proj * proj).mean()))
            tau = 0.5 * scale * direction
            V = np.tile(tau[:, None], (1, p))
            return V.copy(), V.copy()
    # fallback: small seeded random fields
    spread = float(base.locations.std()) or 1.0
    if cfg.translation_mode:
        tau = 0.1 * spread * rng.standard_normal(d)
        V = np.tile(tau[:, None], (1, p))
        return V.copy(), V.copy()
    V = 0.1 * spread * rng.standard_normal((d, p))
    return V.copy(), V.copy()


def fit(measures, base, cfg):
    """Fit principal geodesic components around a given base measure.

    The caller provides the base (normally the Wasserstein mean of the
    measures). Zero-weight base atoms carry no mass and are dropped before
    solving. Components are fitted one at a time; each later component is
    kept weighted-orthogonal to the sums V1+V2 of all earlier ones.

    Returns a PrincipalComponentSet with, per component, the fitted field
    pair, the per-measure projection times of the final curve, and the
    objective value at the start of every outer iteration.
    """
    if not measures:
        raise ValueError("need at least one measure")
    base = base.drop_zero_atoms()
    if any(m.d != base.d for m in measures):
        raise ValueError("measures must share the base dimension")
    b = base.weights
    rng = np.random.default_rng(cfg.seed)
    result = PrincipalComponentSet(base=base)
    prior_sums = []

    for comp in range(cfg.n_components):
        V1, V2 = _initial_fields(measures, base, comp, cfg, rng)
        if cfg.translation_mode:
            V1, V2 = _translation_part(V1, b), _translation_part(V2, b)
        V1 = orthogonality_projection(V1, prior_sums, b)
        V2 = orthogonality_projection(V2, prior_sums, b)
        V1, V2 = _project_fields(base, V1, V2, cfg, cfg.epsilon, None)

        trace = []
        map_records = []
        stall = 0
        for it in range(cfg.max_outer_iter):
            geod = GeneralizedGeodesic(base, V1, V2)
            sharp = [distance_to_geodesic(geod, mu, cfg) for mu in measures]
            obj = sum(s[2] for s in sharp) + cfg.lam * omega(V1, V2, b)
            trace.append(float(obj))
            if it >= 1:
                rel = abs(trace[-1] - trace[-2]) / max(abs(trace[-2]), 1e-30)
                stall = stall + 1 if rel < cfg.obj_tol else 0
                if stall >= 2:
                    break

            G1 = np.zeros_like(V1)
            G2 = np.zeros_like(V2)
            for mu, (t_i, plan_i, _) in zip(measures, sharp):
                g1, g2 = mm_gradients(V1, V2, plan_i, t_i, mu, base)
                G1 += g1
                G2 += g2
            if cfg.lam > 0:
                go1, go2 = grad_omega(V1, V2, b)
                # entrywise gradient rescaled to the weighted metric, matching
                # the data-term gradients above
                G1 += cfg.lam * go1 / b[None, :]
                G2 += cfg.lam * go2 / b[None, :]
            if cfg.translation_mode:
                G1, G2 = _translation_part(G1, b), _translation_part(G2, b)

            V1, V2 = _descent_step(
                measures, base, V1, V2, G1, G2, sharp, cfg
            )

            V1 = orthogonality_projection(V1, prior_sums, b)
            V2 = orthogonality_projection(V2, prior_sums, b)
            eps_proj = _annealed_epsilon(cfg, it)
            V1, V2 = _project_fields(base, V1, V2, cfg, eps_proj, map_records)
            if cfg.translation_mode:
                V1, V2 = _translation_part(V1, b), _translation_part(V2, b)

        if prior_sums:
            V1, V2, refine_records = _orthogonality_refinement(
                base, V1, V2, prior_sums, cfg
            )
            map_records.extend(refine_records)

        geod = GeneralizedGeodesic(base, V1, V2)
        times = np.array([
            distance_to_geodesic(geod, mu, cfg)[0] for mu in measures
        ])
        result.components.append((V1, V2))
        result.projection_times.append(times)
        result.objective_trace.append(trace)
        result.map_optimality.append(map_records)
        prior_sums.append(V1 + V2)
    return result


def _annealed_epsilon(cfg, it):
    """Endpoint-plan epsilon, halved over the final anneal_iters iterations."""
    remaining = cfg.max_outer_iter - 1 - it
    if remaining >= cfg.anneal_iters:
        return cfg.epsilon
    return cfg.epsilon * 0.5 ** (cfg.anneal_iters - remaining)


def _project_fields(base, V1, V2, cfg, eps_proj, map_records):
    g = optimal_map_projection(GeneralizedGeodesic(base, V1, V2), cfg, eps_proj)
    if map_records is not None and cfg.track_map_optimality and base.n <= 64:
        for images in (base.locations - g.v1, base.locations + g.v2):
            map_records.append(transport.map_optimality_gap(base, images))
    return np.asarray(g.v1), np.asarray(g.v2)


def _descent_step(measures, base, V1, V2, G1, G2, sharp, cfg):
    """Gradient step on the surrogate, halving the stepsize until it descends."""
    def surrogate(A, B):
        total = cfg.lam * omega(A, B, base.weights)
        for mu, (t_i, plan_i, _) in zip(measures, sharp):
            total += majorization_value(A, B, plan_i, t_i, mu, base)
        return total

    if not cfg.backtracking:
        return V1 - cfg.beta * G1, V2 - cfg.beta * G2
    base_value = surrogate(V1, V2)
    step = cfg.beta
    for _ in range(cfg.max_halvings + 1):
        A = V1 - step * G1
        B = V2 - step * G2
        if surrogate(A, B) <= base_value:
            return A, B
        step *= 0.5
    return V1.copy(), V2.copy()


def _orthogonality_refinement(base, V1, V2, prior_sums, cfg, max_rounds=5,
                              tol=1e-8):
    """Alternate span and optimal-map projections until both nearly hold.

    The barycentric step can nudge the fields slightly off the orthogonal
    complement; near a fixed point the two projections agree, so a few
    alternations land within both tolerances.
    """
    b = base.weights
    records = []
    for _ in range(max_rounds):
        worst = max(
            max(abs(weighted_inner(V, w, b)) for w in prior_sums)
            for V in (V1, V2)
        )
        if worst <= tol:
            break
        V1 = orthogonality_projection(V1, prior_sums, b)
        V2 = orthogonality_projection(V2, prior_sums, b)
        V1, V2 = _project_fields(base, V1, V2, cfg, cfg.epsilon, records)
    return V1, V2, records
