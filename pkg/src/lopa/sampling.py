"""Deterministic point sets on spheres and frequency hemispheres."""

import numpy as np
from scipy.stats import norm, qmc


def sphere_points(dim, count):
    """Return ``count`` deterministic unit vectors in ``R^dim``.

    The coordinate directions and their negatives come first; the rest is an
    unscrambled Halton sequence pushed through the normal quantile function
    and normalized, so the set for ``count`` is a prefix of the set for any
    larger count.
    """
    if dim < 1 or count < 1:
        raise ValueError("dim and count must be positive")
    if dim == 1:
        return np.array([[1.0], [-1.0]])[: min(count, 2)]
    axes = []
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = 1.0
        axes.extend([e, -e])
    axes = np.array(axes)
    if count <= len(axes):
        return axes[:count]
    extra = count - len(axes)
    halton = qmc.Halton(d=dim, scramble=False).random(extra + 1)[1:]
    gauss = norm.ppf(halton)
    gauss /= np.linalg.norm(gauss, axis=1, keepdims=True)
    return np.vstack([axes, gauss])


def circle_points(count):
    angles = 2.0 * np.pi * np.arange(count) / count
    return np.column_stack([np.cos(angles), np.sin(angles)])


def tangential_directions(dim, resolution):
    """Unit directions in the (tau, eta) space of dimension ``dim``.

    For ``dim == 2`` the angles are equally spaced with ``4 * (resolution - 1)``
    points, so doubling ``resolution - 1`` refines the previous set.
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        return circle_points(4 * max(resolution - 1, 1))
    return sphere_points(dim, 2 * dim + 4 * resolution**2)


def hemisphere_grid(d, gamma_min, resolution):
    """Points ``(tau, eta, gamma)`` on the unit sphere with ``gamma >= gamma_min``.

    The gamma levels are geometric between ``gamma_min`` and 1 (``resolution``
    levels), which concentrates points near the glancing limit.  Each level
    carries every tangential direction.  Rows are ``[tau, eta_1..eta_{d-1},
    gamma]``.
    """
    if not (0.0 < gamma_min <= 1.0):
        raise ValueError("gamma_min must lie in (0, 1]")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    gammas = np.geomspace(gamma_min, 1.0, resolution)
    dirs = tangential_directions(d, resolution)
    rows = []
    for g in gammas:
        r = np.sqrt(max(1.0 - g * g, 0.0))
        if r == 0.0:
            rows.append(np.concatenate([np.zeros(d), [g]]))
            continue
        for w in dirs:
            rows.append(np.concatenate([r * w, [g]]))
    return np.array(rows)
