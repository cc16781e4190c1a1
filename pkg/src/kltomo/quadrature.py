"""Quadrature rules shared by the transform modules.

All rules return ``(nodes, weights)`` as numpy arrays.  Sphere rules carry
the surface measure, so their weights add up to the area of the sphere.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

__all__ = [
    "sphere_area",
    "gauss_jacobi_01",
    "gauss_legendre_01",
    "jacobi_recurrence",
    "sphere_rule",
    "uniform_sphere",
    "chebyshev_open_grid",
    "chebyshev_closed_grid",
    "beta_fn",
]


def sphere_area(k: int) -> float:
    """Area of the unit sphere S^k in R^{k+1}; ``sphere_area(0) == 2``."""
    if k < 0:
        raise ValueError(f"sphere dimension must be non-negative, got {k}")
    d = k + 1
    return float(2.0 * np.exp(0.5 * d * np.log(np.pi) - gammaln(0.5 * d)))


def beta_fn(a: float, b: float) -> float:
    return float(np.exp(gammaln(a) + gammaln(b) - gammaln(a + b)))


def jacobi_recurrence(K: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Jacobi-matrix coefficients on [-1, 1] for the weight (1-x)^a (1+x)^b.

    Returns diagonal ``alpha[0..K]`` and off-diagonal ``beta[1..K+1]``
    (``beta[0]`` unused) of the monic recurrence.
    """
    alpha = np.empty(K + 1)
    beta = np.zeros(K + 2)
    s = a + b
    alpha[0] = (b - a) / (s + 2.0)
    for k in range(1, K + 1):
        alpha[k] = (b * b - a * a) / ((2 * k + s) * (2 * k + s + 2.0))
    beta[1] = 4.0 * (a + 1.0) * (b + 1.0) / ((s + 2.0) ** 2 * (s + 3.0))
    for k in range(2, K + 2):
        c = 2 * k + s
        beta[k] = 4.0 * k * (k + a) * (k + b) * (k + s) / (c * c * (c + 1.0) * (c - 1.0))
    return alpha, beta


def _orthonormal_values(x: np.ndarray, npts: int, al: np.ndarray, sb: np.ndarray, q0: float):
    """Orthonormal p_0..p_{npts-1} at ``x`` plus p_npts and its derivative."""
    vals = np.empty((npts + 1, x.size))
    dp_prev, dp = np.zeros_like(x), np.zeros_like(x)
    vals[0] = q0
    vals[1] = (x - al[0]) * q0 / sb[1]
    dp = np.full_like(x, q0 / sb[1])
    for k in range(1, npts):
        vals[k + 1] = ((x - al[k]) * vals[k] - sb[k] * vals[k - 1]) / sb[k + 1]
        dp_prev, dp = dp, (vals[k] + (x - al[k]) * dp - sb[k] * dp_prev) / sb[k + 1]
    return vals, dp


@lru_cache(maxsize=256)
def _gj01(npts: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    # Golub-Welsch start, Newton polish on the orthonormal recurrence and
    # Christoffel weights; in x = 2t - 1 the weight is (1-x)^b (1+x)^a
    al, be = jacobi_recurrence(npts, b, a)
    sb = np.sqrt(be)
    mass = float(np.exp(gammaln(a + 1.0) + gammaln(b + 1.0) - gammaln(a + b + 2.0)))
    q0 = 1.0 / np.sqrt(mass)
    if npts == 1:
        x = np.array([al[0]])
    else:
        x = eigh_tridiagonal(al[:npts], sb[1:npts], eigvals_only=True)
        for _ in range(3):
            vals, dp = _orthonormal_values(x, npts, al, sb, q0)
            x = x - vals[npts] / dp
    vals, _ = _orthonormal_values(x, npts, al, sb, q0) if npts > 1 else (np.array([[q0]]), None)
    w = 1.0 / np.sum(vals[:npts] ** 2, axis=0)
    t = 0.5 * (1.0 + x)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def gauss_jacobi_01(npts: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule on [0, 1] for the weight ``t**a * (1 - t)**b`` (a, b > -1)."""
    if a <= -1 or b <= -1:
        raise ValueError(f"Jacobi exponents must exceed -1, got a={a}, b={b}")
    return _gj01(int(npts), float(a), float(b))


def gauss_legendre_01(npts: int) -> tuple[np.ndarray, np.ndarray]:
    return gauss_jacobi_01(npts, 0.0, 0.0)


@lru_cache(maxsize=64)
def _sphere_rule(d: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if d == 2:
        # even point count keeps the rule symmetric under x -> -x
        m = 2 * (degree // 2 + 1)
        phi = 2.0 * np.pi * np.arange(m) / m
        return np.stack([np.cos(phi), np.sin(phi)], axis=1), np.full(m, 2.0 * np.pi / m)
    # z = first coordinate, weight (1 - z^2)^((d-3)/2); the remaining
    # coordinates live on a scaled S^{d-2}
    c = 0.5 * (d - 3)
    tz, wt = gauss_jacobi_01(degree // 2 + 1, c, c)
    z, wz = 2.0 * tz - 1.0, wt * 2.0 ** (2.0 * c + 1.0)
    sub, wsub = _sphere_rule(d - 1, degree)
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    nodes = np.concatenate(
        [np.broadcast_to(z[:, None, None], (z.size, sub.shape[0], 1)),
         r[:, None, None] * sub[None, :, :]],
        axis=2,
    ).reshape(-1, d)
    weights = (wz[:, None] * wsub[None, :]).ravel()
    return nodes, weights


def sphere_rule(d: int, degree: int = 30) -> tuple[np.ndarray, np.ndarray]:
    """Product Gauss rule on S^{d-1} exact for polynomials of degree <= ``degree``.

    Parameters
    ----------
    d : int
        Ambient dimension; the rule lives on the unit sphere of R^d.
    degree : int
        Polynomial exactness degree.

    Returns
    -------
    nodes : (N, d) array
    weights : (N,) array summing to the area of S^{d-1}.
    """
    if d < 1:
        raise ValueError(f"ambient dimension must be positive, got {d}")
    nodes, weights = _sphere_rule(int(d), int(degree))
    return nodes, weights


def uniform_sphere(rng: np.random.Generator, size: int, d: int) -> np.ndarray:
    """``size`` points uniform on S^{d-1} (normalised Gaussians)."""
    x = rng.standard_normal((size, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def chebyshev_open_grid(npts: int) -> np.ndarray:
    """Chebyshev points of the first kind mapped to (0, 1), increasing."""
    j = np.arange(npts)
    return np.sort(0.5 * (1.0 - np.cos((2 * j + 1) * np.pi / (2 * npts))))


def chebyshev_closed_grid(npts: int) -> np.ndarray:
    """Chebyshev-Lobatto points on [0, 1] (endpoints included), increasing."""
    j = np.arange(npts)
    return np.sort(0.5 * (1.0 - np.cos(j * np.pi / (npts - 1))))
