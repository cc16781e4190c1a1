"""Invariant harmonics, generalized cosine transforms and intersection bodies.

K_ell-invariant functions f(theta) = f0(t), t = |theta''|^2, are expanded in
the polynomials q_k(t) orthonormal for the weight
t^{ell/2-1} (1-t)^{(n-ell)/2-1} on [0, 1]; q_k is the restriction of the
K_ell-invariant spherical harmonic of degree 2k.  The cosine transform

    (M^alpha f)(u) = gamma_n(alpha) int_{S^{n-1}} f(theta) |theta.u|^{alpha-1} dtheta

acts on degree-2k harmonics by a scalar multiplier m_{2k}(alpha).  The
closed Gamma-ratio form used for the multipliers is checked against direct
quadrature of the integral above before it is trusted (see
``verify_multipliers``); that check also fixes the measure convention.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.special import gammaln, gammasgn

from .bodies import Profile
from .errors import ConvergenceError, PreconditionError
from .grassmann import Dims, as_rng, canonical_lambdas, haar_sample_frame, orthocomplement_frame
from .quadrature import (
    chebyshev_open_grid,
    gauss_jacobi_01,
    jacobi_recurrence,
    sphere_area,
    sphere_rule,
    uniform_sphere,
)
from .radon import radon_reduced_batch

__all__ = [
    "InvariantBasis",
    "HarmonicExpansion",
    "MultiplierTable",
    "IntersectionBodyResult",
    "invariant_basis",
    "expand_invariant",
    "gamma_n",
    "cosine_direct",
    "measure_convention",
    "verify_multipliers",
    "multiplier",
    "build_multiplier_table",
    "cosine_transform",
    "intersection_body_test",
    "verify_intertwining",
    "complement_spectrum",
]

DEFAULT_K = 48
ORACLE_ALPHAS = (0.25, 0.5, 0.75)
ORACLE_KMAX = 6
ORACLE_RTOL = 1e-6
INVERSION_TOL = 1e-8
CHOP_TOL = 64 * np.finfo(float).eps


# ---------------------------------------------------------------- basis


@dataclass(frozen=True)
class InvariantBasis:
    """Orthonormal q_0..q_K for the weight t^{ell/2-1}(1-t)^{(n-ell)/2-1} on [0, 1]."""

    n: int
    ell: int
    K: int

    @property
    def exponents(self) -> tuple[float, float]:
        """(exponent of t, exponent of 1 - t) in the weight."""
        return 0.5 * self.ell - 1.0, 0.5 * (self.n - self.ell) - 1.0

    @property
    def mass(self) -> float:
        a, b = self.exponents
        return float(np.exp(gammaln(a + 1) + gammaln(b + 1) - gammaln(a + b + 2)))

    def __call__(self, t) -> np.ndarray:
        """Values of q_0..q_K at ``t``; shape (K+1,) + t.shape."""
        t = np.asarray(t, dtype=float)
        ta, tb = self.exponents
        # in x = 2t - 1 the (1-t) exponent pairs with (1-x)
        al, be = jacobi_recurrence(self.K, tb, ta)
        x = 2.0 * t - 1.0
        out = np.empty((self.K + 1,) + t.shape)
        out[0] = 1.0 / math.sqrt(self.mass)
        if self.K >= 1:
            out[1] = (x - al[0]) * out[0] / math.sqrt(be[1])
        for k in range(1, self.K):
            out[k + 1] = ((x - al[k]) * out[k] - math.sqrt(be[k]) * out[k - 1]) / math.sqrt(be[k + 1])
        return out

    def series(self, coeffs, t) -> np.ndarray:
        """sum_k coeffs[k] q_k(t), running the recurrence without storing every q_k."""
        t = np.asarray(t, dtype=float)
        ta, tb = self.exponents
        al, be = jacobi_recurrence(self.K, tb, ta)
        x = 2.0 * t - 1.0
        prev = np.full(t.shape, 1.0 / math.sqrt(self.mass))
        total = coeffs[0] * prev
        if self.K == 0:
            return total
        cur = (x - al[0]) * prev / math.sqrt(be[1])
        total = total + coeffs[1] * cur
        for k in range(1, self.K):
            prev, cur = cur, ((x - al[k]) * cur - math.sqrt(be[k]) * prev) / math.sqrt(be[k + 1])
            total = total + coeffs[k + 1] * cur
        return total

    def quadrature(self, npts: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.exponents
        return gauss_jacobi_01(npts or max(2 * self.K + 2, 160), a, b)

    def sup_norms(self) -> np.ndarray:
        t = np.concatenate([[0.0], chebyshev_open_grid(512), [1.0]])
        return np.max(np.abs(self(t)), axis=1)


def invariant_basis(n: int, ell: int, K: int) -> InvariantBasis:
    if K < 0:
        raise PreconditionError(f"K must be non-negative, got {K}")
    if not 1 <= ell <= n - 1:
        raise PreconditionError(f"need 1 <= ell <= n-1, got ell={ell}, n={n}")
    return InvariantBasis(n, ell, K)


@dataclass
class HarmonicExpansion:
    """Coefficients c_0..c_K of a K_ell-invariant function in the q_k basis."""

    n: int
    ell: int
    coeffs: np.ndarray
    converged: bool = True
    reconstruction_error: float | None = None
    noise: np.ndarray | None = field(default=None, repr=False)

    @property
    def K(self) -> int:
        return len(self.coeffs) - 1

    @property
    def basis(self) -> InvariantBasis:
        return InvariantBasis(self.n, self.ell, self.K)

    def __call__(self, t) -> np.ndarray:
        return self.basis.series(self.coeffs, t)

    def to_chebyshev(self) -> Chebyshev:
        """The same degree-K polynomial in the Chebyshev basis on [0, 1]."""
        return Chebyshev.interpolate(self, self.K, domain=[0.0, 1.0])

    def as_profile(self) -> Profile:
        cheb = self.to_chebyshev()
        return Profile(self, cheb.deriv(), spec={"kind": "harmonic", "n": self.n, "ell": self.ell,
                                                 "coeffs": [float(c) for c in self.coeffs]})

    def tail_bound(self, terms: int = 4) -> float:
        """Truncation error proxy in the sup norm.

        Sup-norm size of the last ``terms`` terms when the series runs up to
        degree K, plus the rounding level of every coefficient (``noise``).
        A series whose tail was chopped is resolved and only the rounding
        part remains.
        """
        norms = self.basis.sup_norms()
        bound = 0.0
        if self.coeffs[-1] != 0.0:
            bound = float(np.sum(np.abs(self.coeffs[-terms:]) * norms[-terms:]))
        if self.noise is not None:
            bound += float(np.sum(np.abs(self.noise) * norms))
        return bound

    def inner(self, other: "HarmonicExpansion") -> float:
        """Weighted L2 inner product int_0^1 w f g dt (Parseval)."""
        k = min(self.K, other.K)
        return float(np.dot(self.coeffs[: k + 1], other.coeffs[: k + 1]))


def expand_invariant(f0, n: int, ell: int, K: int = DEFAULT_K, *, nodes: int | None = None,
                     decay_tol: float = 1e-8) -> HarmonicExpansion:
    """Project ``f0`` onto q_0..q_K by Gauss-Jacobi quadrature.

    Trailing coefficients below ``64 * eps`` times the largest one are set to
    zero.  The expansion is flagged as non-converged (not an error) when the
    last coefficient exceeds ``decay_tol`` times the largest one.
    """
    basis = invariant_basis(n, ell, K)
    t, w = basis.quadrature(nodes)
    fv = np.asarray(f0(t), dtype=float)
    coeffs = basis(t) @ (w * fv)
    cmax = np.max(np.abs(coeffs))
    # trailing coefficients at rounding level are noise; transforms of
    # negative order would amplify them
    above = np.flatnonzero(np.abs(coeffs) > CHOP_TOL * cmax)
    if above.size:
        coeffs[above[-1] + 1:] = 0.0
    converged = bool(abs(coeffs[-1]) <= decay_tol * cmax) if cmax > 0 else True
    exp = HarmonicExpansion(n, ell, coeffs, converged, noise=np.full(K + 1, CHOP_TOL * cmax))
    grid = np.linspace(0.0, 1.0, 256)
    exp.reconstruction_error = float(np.max(np.abs(exp(grid) - np.asarray(f0(grid), dtype=float))))
    return exp


# ---------------------------------------------------------------- direct transform


def gamma_n(n: int, alpha: float) -> float:
    """Normalising factor sigma_{n-1} Gamma((1-alpha)/2) / (2 pi^{(n-1)/2} Gamma(alpha/2))."""
    num = gammaln(0.5 * (1.0 - alpha))
    den = gammaln(0.5 * alpha)
    sgn = gammasgn(0.5 * (1.0 - alpha)) * gammasgn(0.5 * alpha)
    return float(sgn * sphere_area(n - 1) * np.exp(num - den) / (2.0 * math.pi ** (0.5 * (n - 1))))


def cosine_direct(f, u, alpha: float, *, mode: str = "quadrature", degree: int = 24,
                  samples: int = 200_000, seed=None, normalized: bool | None = None) -> float:
    """Generalized cosine transform of ``f`` at ``u`` by direct integration, 0 < alpha < 1.

    Quadrature mode uses coordinates with ``u`` as pole:
    theta = s u + sqrt(1 - s^2) w, w on the unit sphere of u^perp.  Folding
    the even integrand to s in (0, 1) and setting x = s^2 turns
    |s|^{alpha-1} (1-s^2)^{(n-3)/2} ds into a Gauss-Jacobi weight, and the
    w-integral uses the product sphere rule; polynomial ``f`` of degree <=
    ``degree`` is then integrated exactly.

    Parameters
    ----------
    normalized : bool, optional
        Divide by sigma_{n-1} (integrate against the normalised surface
        measure).  Defaults to the convention selected by
        ``measure_convention``.
    """
    if not 0.0 < alpha < 1.0:
        raise PreconditionError(f"direct cosine transform needs 0 < alpha < 1, got {alpha}")
    u = np.asarray(u, dtype=float)
    n = u.size
    u = u / np.linalg.norm(u)
    if normalized is None:
        normalized = measure_convention(n)["normalized"]
    g = gamma_n(n, alpha)
    if mode == "quadrature":
        comp = orthocomplement_frame(u[:, None])
        x, wx = gauss_jacobi_01(degree // 2 + 1, 0.5 * alpha - 1.0, 0.5 * (n - 3))
        w, ww = sphere_rule(n - 1, degree)
        s = np.sqrt(x)
        c = np.sqrt(1.0 - x)
        wc = w @ comp.T
        # one pole height at a time bounds the memory footprint
        inner = np.array([np.asarray(f(si * u[None, :] + ci * wc), dtype=float) @ ww
                          for si, ci in zip(s, c)])
        integral = float(wx @ inner)
    elif mode == "mc":
        theta = uniform_sphere(as_rng(seed), samples, n)
        vals = np.asarray(f(theta), dtype=float) * np.abs(theta @ u) ** (alpha - 1.0)
        integral = sphere_area(n - 1) * float(vals.mean())
    else:
        raise PreconditionError(f"unknown mode {mode!r}")
    val = g * integral
    return val / sphere_area(n - 1) if normalized else val


def _lift(q0, ell: int):
    return lambda th: q0(np.sum(th[:, -ell:] ** 2, axis=1))


def _gamma_ratio(a: float, b: float) -> float:
    """Gamma(a) / Gamma(b) with poles of b giving zero."""
    if b <= 0 and b == round(b):
        return 0.0
    return float(gammasgn(a) * gammasgn(b) * np.exp(gammaln(a) - gammaln(b)))


def _is_pole(alpha: float) -> bool:
    return alpha >= 1 and abs(alpha - round(alpha)) < 1e-14 and int(round(alpha)) % 2 == 1


def _closed_form(n: int, k: int, alpha: float) -> float:
    """Multiplier for the normalised measure: (-1)^k Gamma(k+(1-a)/2) / Gamma(k+(n-1+a)/2)."""
    return (-1.0) ** k * _gamma_ratio(k + 0.5 * (1.0 - alpha), k + 0.5 * (n - 1.0 + alpha))


@lru_cache(maxsize=None)
def measure_convention(n: int) -> dict:
    """Decide how the printed gamma_n pairs with the surface measure.

    The raw transform of f = 1 (printed gamma_n, un-normalised dtheta) is
    computed by quadrature for several alpha in (0, 1) and divided by the
    normalised closed form.  A constant ratio s gives m0(alpha) m0(2-n-alpha)
    = s^2 for the raw transform; s = sigma_{n-1} means the inversion identity
    holds only after dividing by sigma_{n-1}, i.e. integrating against the
    normalised measure.
    """
    one = lambda th: np.ones(th.shape[0])  # noqa: E731
    u = np.zeros(n)
    u[0] = 1.0
    ratios = [cosine_direct(one, u, a, degree=2, normalized=False) / _closed_form(n, 0, a) for a in ORACLE_ALPHAS]
    s = float(np.mean(ratios))
    spread = float(np.max(np.abs(np.array(ratios) - s)) / abs(s))
    area = sphere_area(n - 1)
    if spread > ORACLE_RTOL:
        raise ConvergenceError(f"raw m0 ratio is not constant in alpha (spread {spread:.2e})")
    if abs(s - area) <= ORACLE_RTOL * area:
        normalized = True
    elif abs(s - 1.0) <= ORACLE_RTOL:
        normalized = False
    else:
        raise ConvergenceError(f"unrecognised measure scaling {s!r} for n={n}")
    return {"n": n, "raw_scale": s, "sphere_area": area, "raw_inversion_product": s * s,
            "normalized": normalized, "rescale": 1.0 / area if normalized else 1.0}


@lru_cache(maxsize=None)
def verify_multipliers(n: int, ell: int = 1, kmax: int = ORACLE_KMAX, ktable: int = 40) -> dict:
    """Check the closed multiplier form before it is used.

    1. For k <= ``kmax`` and alpha in (0, 1), compute M^alpha q_k at a test
       direction by direct quadrature and compare with m_{2k}(alpha) q_k.
    2. Check m_{2k}(alpha) m_{2k}(2-n-alpha) = 1 for k <= ``ktable``.

    Raises ConvergenceError with a diagnostic if either check fails.
    """
    conv = measure_convention(n)
    basis = InvariantBasis(n, ell, kmax)
    # a direction with t = 0.3 keeps q_k away from its zeros for small k
    u = np.zeros(n)
    u[0] = math.sqrt(0.7)
    u[-1] = math.sqrt(0.3)
    qk_u = basis(np.array(0.3))
    worst = 0.0
    rows = []
    for k in range(kmax + 1):
        if abs(qk_u[k]) < 1e-3:
            continue
        qk = lambda t, k=k: basis(t)[k]  # noqa: E731
        for a in ORACLE_ALPHAS:
            oracle = cosine_direct(_lift(qk, ell), u, a, degree=2 * kmax + 2) / qk_u[k]
            closed = _closed_form(n, k, a)
            rel = abs(oracle - closed) / abs(closed)
            worst = max(worst, rel)
            rows.append({"k": k, "alpha": a, "oracle": oracle, "closed": closed, "rel": rel})
    if worst > ORACLE_RTOL:
        raise ConvergenceError(f"multiplier closed form disagrees with quadrature (rel {worst:.2e}, n={n})")
    inv_worst = 0.0
    for k in range(ktable + 1):
        for a in (-3.5, -1.2, 0.25, 0.5, 0.75):
            b = 2.0 - n - a
            if _is_pole(a) or _is_pole(b):
                continue
            inv_worst = max(inv_worst, abs(_closed_form(n, k, a) * _closed_form(n, k, b) - 1.0))
    if inv_worst > INVERSION_TOL:
        raise ConvergenceError(f"multiplier inversion identity fails (max deviation {inv_worst:.2e})")
    return {"convention": conv, "oracle_max_rel": worst, "inversion_max_dev": inv_worst,
            "oracle_rows": rows}


def multiplier(n: int, k: int, alpha: float) -> float:
    """Eigenvalue m_{2k}(alpha) of M^alpha on degree-2k harmonics (normalised measure)."""
    if _is_pole(alpha):
        raise PreconditionError(f"alpha = {alpha} is a pole of the cosine transform")
    verify_multipliers(n)
    return _closed_form(n, k, alpha)


@dataclass
class MultiplierTable:
    n: int
    ks: np.ndarray
    alphas: np.ndarray
    values: np.ndarray = field(repr=False)

    def __call__(self, k: int, alpha: float) -> float:
        i = int(np.flatnonzero(self.ks == k)[0])
        j = int(np.flatnonzero(np.isclose(self.alphas, alpha))[0])
        return float(self.values[i, j])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "alpha", "m"])
            for i, k in enumerate(self.ks):
                for j, a in enumerate(self.alphas):
                    w.writerow([int(k), repr(float(a)), repr(float(self.values[i, j]))])


def build_multiplier_table(n: int, K: int, alphas) -> MultiplierTable:
    alphas = np.asarray(alphas, dtype=float)
    ks = np.arange(K + 1)
    values = np.array([[multiplier(n, int(k), float(a)) for a in alphas] for k in ks])
    return MultiplierTable(n, ks, alphas, values)


def cosine_transform(e: HarmonicExpansion, alpha: float) -> HarmonicExpansion:
    """M^alpha on an invariant expansion: coefficient-wise multiplication."""
    m = np.array([multiplier(e.n, k, alpha) for k in range(e.K + 1)])
    noise = None if e.noise is None else e.noise * np.abs(m)
    return HarmonicExpansion(e.n, e.ell, e.coeffs * m, e.converged, noise=noise)


# ---------------------------------------------------------------- intersection bodies


@dataclass
class IntersectionBodyResult:
    is_member: bool
    mu_min: float
    mu_max_abs: float
    truncation_error: float
    t: np.ndarray = field(repr=False)
    mu: np.ndarray = field(repr=False)
    expansion_converged: bool = True

    def to_dict(self) -> dict:
        return {"is_member": self.is_member, "mu_min": self.mu_min, "mu_max_abs": self.mu_max_abs,
                "truncation_error": self.truncation_error,
                "expansion_converged": self.expansion_converged}


def intersection_body_test(p: Profile, n: int, ell: int, k: int, K: int = DEFAULT_K,
                           grid: int = 512, rtol: float = 1e-6) -> IntersectionBodyResult:
    """Is the K_ell-symmetric body with profile ``p`` a k-intersection body?

    Computes mu = M^{1+k-n} rho^k (the inverse of M^{1-k}) and tests mu >= 0
    on an open Chebyshev grid with tolerance ``rtol * max|mu|``.
    """
    if not 1 <= k <= n - 1:
        raise PreconditionError(f"need 1 <= k <= n-1, got k={k}, n={n}")
    exp = expand_invariant(p.power(k), n, ell, K)
    mu_exp = cosine_transform(exp, 1.0 + k - n)
    t = chebyshev_open_grid(grid)
    mu = mu_exp(t)
    mu_max = float(np.max(np.abs(mu)))
    mu_min = float(mu.min())
    return IntersectionBodyResult(
        is_member=bool(mu_min >= -rtol * mu_max),
        mu_min=mu_min,
        mu_max_abs=mu_max,
        truncation_error=mu_exp.tail_bound(),
        t=t,
        mu=mu,
        expansion_converged=exp.converged,
    )


# ---------------------------------------------------------------- Radon intertwining


def complement_spectrum(spectrum, n: int, i: int, ell: int) -> np.ndarray:
    """Spectrum of xi^perp predicted from that of xi.

    sigma' P_{xi^perp} sigma = I - sigma' P_xi sigma, whose eigenvalues are
    1 - lambda_j padded with ones for the ell - i directions of R^ell
    orthogonal to xi when i < ell.
    """
    lam = np.asarray(spectrum, dtype=float)
    full = np.concatenate([lam, np.zeros(max(ell - i, 0))])[:ell]
    comp = np.sort(1.0 - full)[::-1]
    return comp[: min(n - i, ell)]


def verify_intertwining(f0, n: int, ell: int, i: int, *, trials: int = 50, seed=None,
                        K: int = DEFAULT_K) -> dict:
    """Ratios (R_i M^{1-i} f)(xi) / (R_{n-i} f)(xi^perp) over Haar subspaces.

    Both sides use the reduced Radon transform; the spectrum of xi^perp is
    computed from its own frame.
    """
    if not 1 <= i <= n - 1:
        raise PreconditionError(f"need 1 <= i <= n-1, got i={i}, n={n}")
    rng = as_rng(seed)
    lhs_fn = cosine_transform(expand_invariant(f0, n, ell, K), 1.0 - i)
    frames = [haar_sample_frame(n, i, rng) for _ in range(trials)]
    spec = np.array([canonical_lambdas(fr, ell) for fr in frames])
    spec_c = np.array([canonical_lambdas(orthocomplement_frame(fr), ell) for fr in frames])
    lhs = radon_reduced_batch(lhs_fn, spec, Dims(n, i, ell))
    rhs = radon_reduced_batch(f0, spec_c, Dims(n, n - i, ell))
    ratios = lhs / rhs
    mean = float(ratios.mean())
    return {"ratios": ratios.tolist(), "c_hat": mean,
            "cv": float(ratios.std() / abs(mean)) if trials > 1 else 0.0,
            "complement_relation_max_dev": float(np.max(np.abs(
                spec_c - np.array([complement_spectrum(s, n, i, ell) for s in spec])))),
            "n": n, "i": i, "ell": ell, "trials": trials}
