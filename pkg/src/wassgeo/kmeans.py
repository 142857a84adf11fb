"""Seeded k-means with optional point weights.

Used for color-palette quantization and to initialize free-support barycenter
atoms. Kept in-house so the stopping rule (iteration cap or centroid movement
below tol) and seeding are exactly reproducible.
"""

import warnings

import numpy as np


def _weighted_choice(rng, probs, size=None):
    return rng.choice(probs.shape[0], size=size, p=probs)


def kmeans(points, k, seed, weights=None, max_iter=100, tol=1e-8):
    """Lloyd iterations with k-means++ initialization.

    Args:
      points: (m, d) rows of points.
      k: requested number of clusters, >= 1.
      seed: int seed or a numpy Generator.
      weights: optional nonnegative point weights (treated as multiplicities).
      max_iter: iteration cap.
      tol: stop when the largest centroid movement falls below this.

    Returns:
      (centroids, cluster_weights, inertia_history): centroids is (k', d) with
      k' <= k (fewer when the points have fewer distinct values, with a
      warning), cluster_weights the fraction of total weight per cluster.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    m = points.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if weights is None:
        w = np.full(m, 1.0 / m)
    else:
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.shape[0] != m or np.any(w < 0):
            raise ValueError("weights must be nonnegative, one per point")
        w = w / w.sum()

    distinct = np.unique(points, axis=0)
    if distinct.shape[0] < k:
        warnings.warn(
            f"only {distinct.shape[0]} distinct points for k={k}; returning them"
        )
        centers = distinct
        k = centers.shape[0]
    else:
        centers = _plus_plus_init(points, k, w, rng)

    inertia_history = []
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for c in range(k):
            mask = labels == c
            mass = w[mask].sum()
            if mass > 0:
                new_centers[c] = (w[mask, None] * points[mask]).sum(axis=0) / mass
            else:
                # deterministic re-seed: the point contributing the most inertia
                far = np.argmax(w * d2[np.arange(m), labels])
                new_centers[c] = points[far]
        inertia_history.append(float((w * d2[np.arange(m), labels]).sum()))
        move = np.abs(new_centers - centers).max()
        centers = new_centers
        if move < tol:
            break

    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    cluster_weights = np.zeros(k)
    np.add.at(cluster_weights, labels, w)
    return centers, cluster_weights, inertia_history


def _plus_plus_init(points, k, w, rng):
    m = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[_weighted_choice(rng, w)]
    closest = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        probs = w * closest
        total = probs.sum()
        if total <= 0:
            # remaining points coincide with chosen centers; pick by weight
            probs = w.copy()
            total = probs.sum()
        centers[c] = points[_weighted_choice(rng, probs / total)]
        closest = np.minimum(closest, ((points - centers[c]) ** 2).sum(axis=1))
    return centers
