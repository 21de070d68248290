"""Quadrature rules on the reference triangle and on line segments."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Collapsed Gauss-Legendre rule exact for polynomials of total `degree`.

    Returns barycentric points (q, 3) and weights summing to 1, so that
    ``area * w @ f(points)`` integrates over a physical triangle.
    """
    # Duffy map (u, v) -> (u, v(1-u)) adds one degree in u through the Jacobian
    n = -(-(degree + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    U, V = np.meshgrid(x, x, indexing="ij")
    WU, WV = np.meshgrid(w, w, indexing="ij")
    xi = U.ravel()
    eta = (V * (1.0 - U)).ravel()
    weights = (WU * WV * (1.0 - U)).ravel() * 2.0
    bary = np.column_stack([1.0 - xi - eta, xi, eta])
    return bary, weights


@lru_cache(maxsize=None)
def line_rule(npts):
    """Gauss-Legendre on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w
