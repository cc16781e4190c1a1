"""Abel-type operators on (0, 1) attached to equal-angle sections.

For ell < i <= n - ell the Radon transform of a K_ell-invariant function on
equal-angle subspaces is the weighted fractional integral ``i_plus``; its
adjoint with respect to dt is ``i_minus``.  ``solve_g`` produces the density
g of the positivity criterion in the two solvable cases i = ell + 1 and
i = ell + 2.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.special import gamma

from .bodies import Profile
from .errors import PreconditionError
from .quadrature import chebyshev_open_grid, gauss_jacobi_01, gauss_legendre_01, sphere_area
from .radon import _abel_plus

__all__ = [
    "AbelParams",
    "GFunction",
    "i_plus",
    "i_minus",
    "rl_integral",
    "abel_duality",
    "solve_g",
]

QUAD_OPTS = dict(epsabs=0.0, epsrel=1e-11, limit=400)


@dataclass(frozen=True)
class AbelParams:
    """Dimensions with ell < i <= n - ell, plus the derived order and constant."""

    n: int
    i: int
    ell: int

    def __post_init__(self) -> None:
        if not (1 <= self.ell < self.i <= self.n - self.ell):
            raise PreconditionError(
                f"Abel operators need 1 <= ell < i <= n - ell, got n={self.n}, i={self.i}, ell={self.ell}"
            )

    @property
    def alpha(self) -> float:
        return 0.5 * (self.i - self.ell)

    @property
    def c1(self) -> float:
        return 0.5 * sphere_area(self.i - self.ell - 1) * sphere_area(self.ell - 1)


def i_plus(f0, lam, p: AbelParams):
    """(I+ f0)(lam) = c1 lam^{1-i/2} int_0^lam t^{ell/2-1} (lam-t)^{alpha-1} f0(t) dt.

    Vectorised in ``lam``; identical to the equal-angle Radon transform.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any((lam < 0) | (lam > 1)):
        raise PreconditionError("lambda must lie in [0, 1]")
    val, _ = _abel_plus(f0, lam, p.i, p.ell)
    return val if val.ndim else float(val)


def _weighted_tail(fun, t: float, order: float) -> float:
    """int_t^1 (lam - t)^{order-1} fun(lam) dlam with the endpoint weight handled exactly."""
    if t >= 1.0:
        return 0.0
    with warnings.catch_warnings():
        # roundoff warnings near the requested tolerance are expected
        warnings.simplefilter("ignore", IntegrationWarning)
        if order == 1.0:
            val, _ = quad(fun, t, 1.0, **QUAD_OPTS)
        else:
            val, _ = quad(fun, t, 1.0, weight="alg", wvar=(order - 1.0, 0.0), **QUAD_OPTS)
    return val


def i_minus(psi, t: float, p: AbelParams) -> float:
    """(I- psi)(t) = c1 t^{ell/2-1} int_t^1 (lam-t)^{alpha-1} psi(lam) lam^{1-i/2} dlam."""
    if not 0.0 < t < 1.0:
        raise PreconditionError(f"t must lie in (0, 1), got {t}")
    e = 1.0 - 0.5 * p.i
    tail = _weighted_tail(lambda lam: psi(lam) * lam ** e, t, p.alpha)
    return p.c1 * t ** (0.5 * p.ell - 1.0) * tail


def rl_integral(g, t: float, alpha: float) -> float:
    """Right-sided Riemann-Liouville integral (1/Gamma(alpha)) int_t^1 g(lam)(lam-t)^{alpha-1} dlam."""
    if alpha <= 0:
        raise PreconditionError(f"alpha must be positive, got {alpha}")
    if not 0.0 <= t < 1.0:
        raise PreconditionError(f"t must lie in [0, 1), got {t}")
    return _weighted_tail(g, t, alpha) / gamma(alpha)


def abel_duality(f0, psi, p: AbelParams) -> tuple[float, float]:
    """Both sides of int_0^1 (I+ f0) psi dlam = int_0^1 f0 (I- psi) dt.

    The left side uses Gauss-Legendre on the smooth function I+ f0; the right
    side nests adaptive quadrature around ``i_minus``.
    """
    lam, w = gauss_legendre_01(128)
    lhs = float(np.dot(w, np.asarray(i_plus(f0, lam, p)) * psi(lam)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        rhs, _ = quad(lambda t: float(f0(t)) * i_minus(psi, t, p), 0.0, 1.0,
                      epsabs=0.0, epsrel=1e-10, limit=400)
    return lhs, rhs


@dataclass
class GFunction:
    """Density g of the positivity criterion, callable on (0, 1) and sampled on a grid."""

    params: AbelParams
    profile: Profile
    t: np.ndarray
    g: np.ndarray
    _fun: object

    def __call__(self, t):
        return self._fun(t)

    @property
    def min(self) -> float:
        return float(self.g.min())

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.g)))

    def is_nonnegative(self, rtol: float = 1e-8) -> bool:
        return self.min >= -rtol * self.max_abs

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "g"])
            for a, b in zip(self.t, self.g):
                w.writerow([repr(float(a)), repr(float(b))])


def _rprime_factor(p: Profile, t):
    # rho(t) - 2 (1 - t) rho'(t): sign of r'(s) at s = 1 - t, r(s) = sqrt(s) rho(1 - s)
    return p(t) - 2.0 * (1.0 - t) * p.derivative(t)


def solve_g(p: Profile, params: AbelParams, grid: int = 512, eta_nodes: int = 128) -> GFunction:
    """Solve (1-t)^{(n-ell)/2-1} rho^{n-i}(t) = (I-^alpha g)(t) for g.

    i = ell + 2 (alpha = 1):
        g(t) = -d/dt [(1-t)^{(n-i)/2} rho^{n-i}(t)]
             = (n-i) r^{n-i-1}(s) (rho(t) - 2(1-t) rho'(t)) / (2 sqrt(s)),  s = 1 - t.
    i = ell + 1 (alpha = 1/2):
        g(t) = pi^{-1/2} d/dp int_0^1 r^{n-i}(p eta) (eta(1-eta))^{-1/2} deta at p = 1 - t,
        differentiated under the integral sign.

    Here r(s) = sqrt(s) rho(1 - s).  The derivative of rho comes from the
    profile (exact when available, otherwise a Chebyshev interpolant), and the
    product-rule form keeps the sqrt(1-t) factors analytic.
    """
    n, i, ell = params.n, params.i, params.ell
    k = n - i
    if i - ell == 2:
        def fun(t):
            t = np.asarray(t, dtype=float)
            s = 1.0 - t
            r = np.sqrt(s) * p(t)
            with np.errstate(divide="ignore", invalid="ignore"):
                return k * r ** (k - 1) * _rprime_factor(p, t) / (2.0 * np.sqrt(s))
    elif i - ell == 1:
        # d/dp r^k(p eta) = k r^{k-1}(p eta) r'(p eta) eta, and
        # r^{k-1}(s) r'(s) = s^{(k-2)/2} rho^{k-1}(1-s) (rho - 2 s rho')(1-s) / 2,
        # so eta^{(k-1)/2} (1-eta)^{-1/2} becomes a Gauss-Jacobi weight.
        eta, w = gauss_jacobi_01(eta_nodes, 0.5 * (k - 1), -0.5)

        def fun(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            pp = 1.0 - t
            tt = 1.0 - pp[:, None] * eta[None, :]
            integrand = p(tt) ** (k - 1) * _rprime_factor(p, tt)
            with np.errstate(divide="ignore", invalid="ignore"):
                val = 0.5 * k * pp ** (0.5 * (k - 2)) * (integrand @ w) / math.sqrt(math.pi)
            return val
    else:
        raise PreconditionError(f"g is only solved for i - ell in {{1, 2}}, got i - ell = {i - ell}")

    t = chebyshev_open_grid(grid)
    g = np.asarray(fun(t), dtype=float)
    return GFunction(params, p, t, g, lambda x: np.asarray(fun(np.asarray(x, dtype=float)), dtype=float))
