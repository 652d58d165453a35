"""Product quadrature rules on spheres and balls in R^n."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import special


@lru_cache(maxsize=64)
def sphere_rule(n: int, angular: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on the unit sphere S^{n-1}; weights sum to its area.

    S^1 uses the periodic trapezoid rule with ``angular`` nodes (exact for
    trigonometric polynomials of degree < angular).  Higher spheres are built
    recursively: the last coordinate t carries Gauss-Jacobi weight
    (1 - t^2)^((n-3)/2) with ``angular // 2`` nodes, the rest is a scaled
    copy of the S^{n-2} rule.
    """
    if n < 2:
        raise ValueError("sphere rules need n >= 2")
    if n == 2:
        theta = 2 * np.pi * np.arange(angular) / angular
        nodes = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return nodes, np.full(angular, 2 * np.pi / angular)
    m = max(angular // 2, 2)
    a = (n - 3) / 2
    t, wt = special.roots_jacobi(m, a, a)
    sub_nodes, sub_w = sphere_rule(n - 1, angular)
    s = np.sqrt(1 - t**2)
    nodes = np.concatenate([sub_nodes[None, :, :] * s[:, None, None],
                            np.broadcast_to(t[:, None, None], (m, len(sub_w), 1))], axis=2)
    weights = wt[:, None] * sub_w[None, :]
    return nodes.reshape(-1, n), weights.reshape(-1)


@lru_cache(maxsize=64)
def ball_rule(n: int, radial: int = 32, angular: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on the unit ball; weights sum to its volume.

    Radial factor: Gauss-Jacobi with weight rho^(n-1) on [0, 1].
    """
    t, wt = special.roots_jacobi(radial, 0.0, n - 1.0)
    rho = (1 + t) / 2
    wr = wt / 2.0**n
    sn, sw = sphere_rule(n, angular)
    nodes = rho[:, None, None] * sn[None, :, :]
    weights = wr[:, None] * sw[None, :]
    return nodes.reshape(-1, n), weights.reshape(-1)
