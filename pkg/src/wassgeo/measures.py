"""Discrete measures, velocity fields and the weighted geometry of their support.

Conventions used across the package:
  * locations are stored column-major, shape (d, n): one column per atom;
  * weight vectors live on the probability simplex;
  * velocity fields are plain (d, p) arrays, one displacement column per atom
    of the base measure they are attached to.
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np

# Weights below this value are clamped to zero after normalization; keeps
# D(b^-1) style rescalings well behaved downstream.
WEIGHT_CLAMP = 1e-12
SIMPLEX_TOL = 1e-9


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class DiscreteMeasure:
    """A weighted point cloud: locations (d, n) and simplex weights (n,).

    Atoms whose weight falls below the clamp threshold are kept (so the
    support stays aligned with e.g. a fixed grid) but their weight is set to
    exactly zero and flagged in `zero_weight_atoms`.
    """

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self, simplex_tol=SIMPLEX_TOL):
        loc = np.atleast_2d(np.asarray(self.locations, dtype=np.float64))
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if loc.ndim != 2 or loc.shape[0] < 1 or loc.shape[1] < 1:
            raise ValueError("locations must be a d x n matrix with d, n >= 1")
        if loc.shape[1] != w.shape[0]:
            raise ValueError(
                f"weights length {w.shape[0]} does not match atom count {loc.shape[1]}"
            )
        if not np.all(np.isfinite(loc)):
            raise ValueError("locations must be finite")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < -simplex_tol):
            raise ValueError("weights must be nonnegative")
        total = w.sum()
        if abs(total - 1.0) > simplex_tol:
            raise ValueError(
                f"weights must sum to 1 within {simplex_tol:g} (got {total!r}); "
                "normalize before constructing"
            )
        w = np.clip(w, 0.0, None)
        w[w < WEIGHT_CLAMP] = 0.0
        w = w / w.sum()
        object.__setattr__(self, "locations", _readonly(loc))
        object.__setattr__(self, "weights", _readonly(w))

    @property
    def d(self):
        return self.locations.shape[0]

    @property
    def n(self):
        return self.locations.shape[1]

    @property
    def zero_weight_atoms(self):
        """Boolean mask of atoms whose weight was clamped to zero."""
        return self.weights == 0.0

    @classmethod
    def dirac(cls, point):
        p = np.asarray(point, dtype=np.float64).ravel()
        return cls(p[:, None], np.ones(1))

    @classmethod
    def uniform(cls, locations):
        """Uniform weights on the given (d, n) support."""
        locations = np.atleast_2d(np.asarray(locations, dtype=np.float64))
        n = locations.shape[1]
        return cls(locations, np.full(n, 1.0 / n))

    def translate(self, tau):
        tau = np.asarray(tau, dtype=np.float64).ravel()
        return DiscreteMeasure(self.locations + tau[:, None], self.weights)

    def drop_zero_atoms(self):
        """Restriction to the positive-weight support (mass is unchanged)."""
        keep = self.weights > 0.0
        if keep.all():
            return self
        return DiscreteMeasure(self.locations[:, keep], self.weights[keep])


def check_velocity_field(v, p=None):
    """Validate a velocity field and return it as a float64 (d, p) array.

    A velocity field attaches one displacement column to each of the p atoms
    of its base measure.
    """
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    if v.ndim != 2:
        raise ValueError("velocity field must be a d x p matrix")
    if p is not None and v.shape[1] != p:
        raise ValueError(
            f"velocity field has {v.shape[1]} columns, base support has {p} atoms"
        )
    if not np.all(np.isfinite(v)):
        raise ValueError("velocity field entries must be finite")
    return v


def cost_matrix(Z, X):
    """Pairwise squared Euclidean distances between columns of Z and X.

    Args:
      Z: (d, p) locations.
      X: (d, n) locations.

    Returns:
      (p, n) array with entry (k, j) = ||z_k - x_j||^2. Computed from the
      coordinate differences directly, so entries are exactly zero iff the
      points coincide.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if Z.shape[0] != X.shape[0]:
        raise ValueError("dimension mismatch")
    diff = Z[:, :, None] - X[:, None, :]
    return np.einsum("dpn,dpn->pn", diff, diff)


def weighted_inner(u, v, b):
    """Inner product sum_k b_k <u_k, v_k> of two fields on a weighted support."""
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64).ravel()
    if u.shape != v.shape or u.shape[1] != b.shape[0]:
        raise ValueError("size mismatch between fields and weights")
    return float(np.einsum("dk,dk,k->", u, v, b))


def weighted_norm(u, b):
    """Norm induced by `weighted_inner`."""
    return float(np.sqrt(max(weighted_inner(u, u, b), 0.0)))


def mean_point(m):
    """Barycenter of a measure's atoms: sum_j a_j x_j, a point in R^d."""
    return m.locations @ m.weights


def load_measure_csv(path, warn_tol=1e-6):
    """Read a measure from CSV with header ``w,x1,...,xd``.

    Weights are auto-normalized; a warning is emitted when their sum deviates
    from 1 by more than `warn_tol`.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2 or header[0].strip() != "w":
            raise ValueError(f"{path}: expected header 'w,x1,...,xd'")
        rows = [[float(c) for c in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no atoms")
    data = np.asarray(rows, dtype=np.float64)
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: row length does not match header")
    w = data[:, 0]
    total = w.sum()
    if total <= 0:
        raise ValueError(f"{path}: nonpositive total weight")
    if abs(total - 1.0) > warn_tol:
        warnings.warn(f"{path}: weights sum to {total:.9g}, normalizing")
    return DiscreteMeasure(data[:, 1:].T, w / total)


def save_measure_csv(m, path):
    """Write a measure as CSV with header ``w,x1,...,xd`` (round-trip exact)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["w"] + [f"x{i + 1}" for i in range(m.d)])
        for j in range(m.n):
            writer.writerow(
                [f"{m.weights[j]:.17g}"] + [f"{c:.17g}" for c in m.locations[:, j]]
            )
