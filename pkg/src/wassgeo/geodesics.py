"""Geodesic curves between discrete measures in the 2-Wasserstein metric.

Covers displacement interpolation from an exact plan, two-field generalized
geodesics anchored at a base measure, and the proportionality penalty that
measures how far a field pair is from tracing a true geodesic.
"""

from dataclasses import dataclass

import numpy as np

from .measures import (
    DiscreteMeasure,
    check_velocity_field,
    cost_matrix,
    weighted_inner,
    weighted_norm,
)
from . import transport

MERGE_TOL = 1e-12


@dataclass(frozen=True)
class GeneralizedGeodesic:
    """A curve t -> (id - v1 + t (v1 + v2)) # base, for t in [0, 1].

    The curve starts at the image of the base under id - v1 and ends at its
    image under id + v2. It is a true geodesic when v1 and v2 are positively
    proportional and both maps are optimal out of the base.
    """

    base: DiscreteMeasure
    v1: np.ndarray
    v2: np.ndarray

    def __post_init__(self):
        v1 = check_velocity_field(self.v1, self.base.n)
        v2 = check_velocity_field(self.v2, self.base.n)
        if v1.shape[0] != self.base.d or v2.shape[0] != self.base.d:
            raise ValueError("velocity fields must match the base dimension")
        v1 = v1.copy()
        v2 = v2.copy()
        v1.flags.writeable = False
        v2.flags.writeable = False
        object.__setattr__(self, "v1", v1)
        object.__setattr__(self, "v2", v2)

    def locations_at(self, t):
        """Support locations Z_t = Y - V1 + t (V1 + V2)."""
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"t={t} outside [0, 1]")
        return self.base.locations - self.v1 + t * (self.v1 + self.v2)


def sample_geodesic(g, t):
    """Measure at time t of a generalized geodesic (base weights, moved atoms)."""
    return DiscreteMeasure(g.locations_at(t), g.base.weights)


def merge_close_atoms(locations, weights, tol=MERGE_TOL):
    """Sum the masses of atoms whose coordinates agree within tol."""
    locations = np.atleast_2d(np.asarray(locations, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64).ravel()
    order = np.lexsort(locations[::-1])
    loc_sorted = locations[:, order]
    w_sorted = weights[order]
    kept_loc = [loc_sorted[:, 0]]
    kept_w = [w_sorted[0]]
    for j in range(1, loc_sorted.shape[1]):
        if np.max(np.abs(loc_sorted[:, j] - kept_loc[-1])) <= tol:
            kept_w[-1] += w_sorted[j]
        else:
            kept_loc.append(loc_sorted[:, j])
            kept_w.append(w_sorted[j])
    return np.stack(kept_loc, axis=1), np.asarray(kept_w)


def mccann_interpolant(nu, eta, t):
    """Displacement interpolation between nu and eta at time t in [0, 1].

    Computes an exact plan and places one atom per nonzero plan entry at
    (1 - t) x + t y carrying that entry's mass, so mass splitting is handled;
    coincident interpolated atoms are merged.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    plan = transport.exact_transport(
        nu.weights, eta.weights, cost_matrix(nu.locations, eta.locations)
    )
    rows, cols = np.nonzero(plan.matrix)
    pts = (1.0 - t) * nu.locations[:, rows] + t * eta.locations[:, cols]
    masses = plan.matrix[rows, cols]
    loc, w = merge_close_atoms(pts, masses)
    return DiscreteMeasure(loc, w / w.sum())


def omega(v1, v2, b):
    """Deviation of two fields from positive proportionality.

    (<v1, v2>_b - ||v1||_b ||v2||_b)^2, zero iff v2 = c v1 with c >= 0 (or
    either field vanishes on the weighted support).
    """
    s = weighted_inner(v1, v2, b) - weighted_norm(v1, b) * weighted_norm(v2, b)
    return s * s


def grad_omega(v1, v2, b):
    """Entrywise gradient of `omega` with respect to both field matrices.

    With s = <v1,v2>_b - ||v1||_b ||v2||_b, the gradient in v1 is
    2 s (v2 - (||v2||_b / ||v1||_b) v1) scaled per atom by b_k, and
    symmetrically for v2. Where either norm vanishes the penalty is
    identically zero along that slice and the zero gradient is returned.
    """
    v1 = check_velocity_field(v1)
    v2 = check_velocity_field(v2)
    b = np.asarray(b, dtype=np.float64).ravel()
    n1 = weighted_norm(v1, b)
    n2 = weighted_norm(v2, b)
    if n1 == 0.0 or n2 == 0.0:
        return np.zeros_like(v1), np.zeros_like(v2)
    s = weighted_inner(v1, v2, b) - n1 * n2
    g1 = 2.0 * s * (v2 - (n2 / n1) * v1) * b[None, :]
    g2 = 2.0 * s * (v1 - (n1 / n2) * v2) * b[None, :]
    return g1, g2
