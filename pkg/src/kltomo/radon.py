"""Spherical Radon transform R_i, its dual, and section volumes.

``R_i f`` integrates f over the great subsphere S^{n-1} cap xi with total
mass sigma_{i-1}; ``R_i^*`` averages over subspaces through a point with a
probability measure.  For K_ell-invariant f = f0(|theta''|^2) the transform
depends only on the canonical spectrum of xi, and the reduced formulas below
evaluate it with one- and low-dimensional quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Chebyshev

from .bodies import Profile, StarBody
from .errors import ConvergenceError, PreconditionError
from .grassmann import (
    Dims,
    as_rng,
    canonical_lambdas,
    check_frame,
    haar_sample_frame,
    orthocomplement_frame,
)
from .quadrature import gauss_jacobi_01, sphere_area, sphere_rule, uniform_sphere

__all__ = [
    "RadonResult",
    "radon_direct",
    "radon_reduced",
    "radon_reduced_batch",
    "radon_equal_angle",
    "dual_radon_direct",
    "section_volume",
]

MAX_QUADRATURE_SPHERE_DIM = 5
REDUCED_RTOL = 1e-11


@dataclass(frozen=True)
class RadonResult:
    value: float
    method: str
    error: float = 0.0

    def __post_init__(self) -> None:
        if not self.error >= 0:
            raise ValueError(f"error estimate must be non-negative, got {self.error}")

    def __float__(self) -> float:
        return float(self.value)

    def scaled(self, c: float) -> "RadonResult":
        return RadonResult(c * self.value, self.method, abs(c) * self.error)


def _sphere_quad(fun, d: int, degree: int) -> float:
    nodes, weights = sphere_rule(d, degree)
    return float(np.dot(weights, fun(nodes)))


def radon_direct(f, frame, *, mode: str = "auto", degree: int = 30, samples: int = 100_000,
                 seed=None) -> RadonResult:
    """Integrate ``f`` over the unit sphere of span(frame).

    Parameters
    ----------
    f : callable
        Vectorised even function on S^{n-1}, mapping (N, n) arrays to (N,).
    frame : (n, i) array with orthonormal columns
    mode : {"auto", "quadrature", "mc"}
        Product Gauss quadrature (exact to polynomial degree ``degree``) or
        Monte-Carlo; "auto" uses quadrature for i <= 5.
    """
    frame = check_frame(frame)
    i = frame.shape[1]
    if mode == "auto":
        mode = "quadrature" if i <= MAX_QUADRATURE_SPHERE_DIM else "mc"
    if mode == "quadrature":
        g = lambda eta: f(eta @ frame.T)  # noqa: E731
        val = _sphere_quad(g, i, degree)
        ref = _sphere_quad(g, i, degree + 8)
        return RadonResult(ref, "direct-quadrature", abs(ref - val))
    if mode == "mc":
        eta = uniform_sphere(as_rng(seed), samples, i)
        vals = f(eta @ frame.T)
        area = sphere_area(i - 1)
        return RadonResult(area * float(vals.mean()), "direct-mc",
                           area * float(vals.std(ddof=1)) / math.sqrt(samples))
    raise PreconditionError(f"unknown mode {mode!r}")


def _as_profile_fn(f0):
    return f0 if callable(f0) else (lambda t: np.full_like(t, float(f0)))


def _check_spectra(spectra: np.ndarray, dims: Dims) -> np.ndarray:
    spectra = np.atleast_2d(np.asarray(spectra, dtype=float))
    if spectra.shape[1] != dims.m:
        raise PreconditionError(
            f"spectrum length {spectra.shape[1]} does not match min(i, ell) = {dims.m}"
        )
    if spectra.size and (spectra.min() < 0 or spectra.max() > 1):
        raise PreconditionError("spectrum entries must lie in [0, 1]")
    return spectra


def _reduced_values(f0, spectra, dims, deg_v, n_u, rng, mc_samples, table=None):
    """One evaluation of the reduced formula at fixed node counts.

    ``table``, when given, replaces the inner u-integral as a function of s.
    """
    n, i, ell = dims.n, dims.i, dims.ell
    if i <= ell:
        # F = int_{S^{i-1}} f0(v' Lambda v) dv
        if i <= MAX_QUADRATURE_SPHERE_DIM:
            v, wv = sphere_rule(i, deg_v)
        else:
            v = uniform_sphere(rng, mc_samples, i)
            wv = np.full(mc_samples, sphere_area(i - 1) / mc_samples)
        s = (v * v) @ spectra.T
        return wv @ f0(s)
    # i > ell: F = sigma_{i-ell-1}/2 int_{S^{ell-1}} dv int_0^1 u^{ell/2-1}(1-u)^{(i-ell)/2-1} f0(s u) du
    u, wu = gauss_jacobi_01(n_u, 0.5 * ell - 1.0, 0.5 * (i - ell) - 1.0)
    if ell == 1:
        v, wv = np.array([[1.0]]), np.array([2.0])
    elif ell <= MAX_QUADRATURE_SPHERE_DIM:
        v, wv = sphere_rule(ell, deg_v)
    else:
        v = uniform_sphere(rng, mc_samples, ell)
        wv = np.full(mc_samples, sphere_area(ell - 1) / mc_samples)
    s = (v * v) @ spectra.T  # (Nv, M)
    if table is not None:
        return 0.5 * sphere_area(i - ell - 1) * (wv @ table(s))
    inner = f0(s[:, :, None] * u[None, None, :]) @ wu
    return 0.5 * sphere_area(i - ell - 1) * (wv @ inner)


def _abel_table(f0, dims: Dims, rtol: float, max_degree: int = 512, max_nodes: int = 1024):
    """Chebyshev interpolant of s -> int_0^1 u^{ell/2-1}(1-u)^{(i-ell)/2-1} f0(s u) du.

    Returns None when the interpolant does not settle (non-smooth f0), in
    which case callers integrate directly.
    """
    a, b = 0.5 * dims.ell - 1.0, 0.5 * (dims.i - dims.ell) - 1.0
    check = np.linspace(0.0, 1.0, 97)

    def inner_fn(n_u):
        u, wu = gauss_jacobi_01(n_u, a, b)
        return lambda s: f0(np.asarray(s)[..., None] * u) @ wu

    def settle(fn):
        deg = 32
        while deg <= max_degree:
            cheb = Chebyshev.interpolate(fn, deg, domain=[0.0, 1.0])
            c = np.abs(cheb.coef)
            if np.max(c[-4:]) <= 0.1 * rtol * max(1.0, c.max()):
                return cheb
            deg *= 2
        return None

    n_u = 32
    prev = settle(inner_fn(n_u))
    while prev is not None and n_u < max_nodes:
        n_u *= 2
        cur = settle(inner_fn(n_u))
        if cur is None:
            return None
        if np.max(np.abs(cur(check) - prev(check))) <= rtol * max(1.0, np.max(np.abs(cur(check)))):
            return cur
        prev = cur
    return None


def _uses_mc(dims: Dims) -> bool:
    d = dims.i if dims.i <= dims.ell else dims.ell
    return d > MAX_QUADRATURE_SPHERE_DIM


def radon_reduced_batch(f0, spectra, dims: Dims, *, rtol: float = REDUCED_RTOL,
                        max_degree: int = 256, mc_samples: int = 200_000, seed=None,
                        chunk: int = 512, full_output: bool = False):
    """Reduced Radon transform for many canonical spectra at once.

    Node counts double until the relative change over a probe subset of the
    spectra drops below ``rtol``; the settled rule is then applied to every
    spectrum.  Returns the values, and with ``full_output`` also the per-batch
    error estimate and method tag.
    """
    spectra = _check_spectra(spectra, dims)
    f0 = _as_profile_fn(f0)
    rng = as_rng(seed)
    if _uses_mc(dims):
        vals = _reduced_values(f0, spectra, dims, 0, 64, rng, mc_samples)
        # batch standard error from two independent half-estimates
        half = mc_samples // 2
        a = _reduced_values(f0, spectra, dims, 0, 64, as_rng(rng.integers(2**63)), half)
        b = _reduced_values(f0, spectra, dims, 0, 64, as_rng(rng.integers(2**63)), half)
        err = float(np.max(np.abs(a - b))) / 2.0
        return (vals, err, "reduced-mc") if full_output else vals

    probe_idx = np.unique(np.linspace(0, len(spectra) - 1, min(len(spectra), 32)).astype(int))
    probe = np.concatenate([spectra[probe_idx], np.ones((1, dims.m)), np.zeros((1, dims.m))])
    if dims.i > dims.n - dims.ell:
        probe = probe[:-1]
    # for i > ell the inner integral depends on s = v' Lambda v only; a
    # settled Chebyshev table of it makes large batches cheap
    table = _abel_table(f0, dims, 0.1 * rtol) if dims.i > dims.ell and len(spectra) > 64 else None
    deg_v, n_u = 16, 32
    prev = _reduced_values(f0, probe, dims, deg_v, n_u, rng, mc_samples, table)
    while True:
        deg_v, n_u = 2 * deg_v, 2 * n_u
        cur = _reduced_values(f0, probe, dims, deg_v, n_u, rng, mc_samples, table)
        err = float(np.max(np.abs(cur - prev) / np.maximum(1.0, np.abs(cur))))
        if err <= rtol:
            break
        if deg_v >= max_degree:
            raise ConvergenceError(f"reduced Radon quadrature stalled at relative change {err:.2e}")
        prev = cur
    out = np.empty(len(spectra))
    for start in range(0, len(spectra), chunk):
        sl = slice(start, start + chunk)
        out[sl] = _reduced_values(f0, spectra[sl], dims, deg_v, n_u, rng, mc_samples, table)
    return (out, err * max(1.0, float(np.max(np.abs(out)))), "reduced") if full_output else out


def radon_reduced(f0, spectrum, dims: Dims, **kwargs) -> RadonResult:
    """R_i f(xi) for f = f0(t) from the canonical spectrum of xi alone.

    For i <= ell this is the integral of f0(v' Lambda v) over S^{i-1}.  For
    i > ell the inner Abel-type integral over [0, v' Lambda v] is rescaled to
    [0, 1], which cancels the (v' Lambda v)^{1 - i/2} prefactor exactly and
    keeps the formula regular when the spectrum contains zeros.
    """
    vals, err, tag = radon_reduced_batch(f0, np.asarray(spectrum, dtype=float)[None, :], dims,
                                         full_output=True, **kwargs)
    return RadonResult(float(vals[0]), tag, err)


def _check_equal_angle(lam: float, dims: Dims) -> None:
    if not 0.0 <= lam <= 1.0:
        raise PreconditionError(f"lambda must lie in [0, 1], got {lam}")
    if lam < 1.0 and dims.i > dims.n - dims.ell:
        raise PreconditionError(
            f"equal canonical angles with lambda < 1 need i <= n - ell "
            f"(i={dims.i}, n={dims.n}, ell={dims.ell})"
        )


def _abel_plus(f0, lam, i: int, ell: int, rtol: float = 1e-12, max_nodes: int = 2048):
    """sigma_{i-ell-1} sigma_{ell-1}/2 * int_0^1 u^{ell/2-1}(1-u)^{(i-ell)/2-1} f0(lam u) du."""
    lam = np.asarray(lam, dtype=float)
    c1 = 0.5 * sphere_area(i - ell - 1) * sphere_area(ell - 1)
    a, b = 0.5 * ell - 1.0, 0.5 * (i - ell) - 1.0

    def once(npts):
        u, w = gauss_jacobi_01(npts, a, b)
        return c1 * (f0(lam[..., None] * u) @ w)

    npts = 32
    prev = once(npts)
    while True:
        npts *= 2
        cur = once(npts)
        err = float(np.max(np.abs(cur - prev) / np.maximum(1.0, np.abs(cur))))
        if err <= rtol:
            return cur, err
        if npts >= max_nodes:
            raise ConvergenceError(f"Abel integral did not converge (relative change {err:.2e})")
        prev = cur


def radon_equal_angle(f0, lam: float, dims: Dims) -> RadonResult:
    """R_i f on subspaces whose canonical angles to R^ell all have cos^2 = lam."""
    _check_equal_angle(lam, dims)
    f0 = _as_profile_fn(f0)
    if dims.i <= dims.ell:
        return RadonResult(sphere_area(dims.i - 1) * float(f0(np.array(lam))), "reduced", 0.0)
    val, err = _abel_plus(f0, lam, dims.i, dims.ell)
    return RadonResult(float(val), "reduced", err * max(1.0, abs(float(val))))


def _canonical_point(theta: np.ndarray) -> np.ndarray:
    # theta and -theta lie on the same subspaces; pick one representative
    nz = np.flatnonzero(np.abs(theta) > 0)
    return -theta if theta[nz[0]] < 0 else theta


def dual_radon_direct(phi, theta, i: int, *, samples: int = 10_000, seed=None) -> RadonResult:
    """Monte-Carlo average of ``phi`` over i-dimensional subspaces through ``theta``.

    ``phi`` maps an (n, i) frame to a float; frames are [theta | Haar (i-1)-frame
    of theta^perp].
    """
    theta = np.asarray(theta, dtype=float)
    if abs(np.linalg.norm(theta) - 1.0) > 1e-12:
        raise PreconditionError("theta must be a unit vector")
    n = theta.size
    if not 1 <= i <= n - 1:
        raise PreconditionError(f"need 1 <= i <= n-1, got i={i}, n={n}")
    theta = _canonical_point(theta)
    comp = orthocomplement_frame(theta[:, None])
    rng = as_rng(seed)
    vals = np.empty(samples)
    for k in range(samples):
        a = haar_sample_frame(n - 1, i - 1, rng) if i > 1 else np.zeros((n - 1, 0))
        vals[k] = phi(np.concatenate([theta[:, None], comp @ a], axis=1))
    return RadonResult(float(vals.mean()), "direct-mc", float(vals.std(ddof=1)) / math.sqrt(samples))


def section_volume(body, xi, dims: Dims, **kwargs) -> RadonResult:
    """Volume of the central section of ``body`` by the subspace ``xi``.

    Parameters
    ----------
    body : Profile or StarBody
        Profiles (or bodies carrying one) use the reduced path.
    xi : (n, i) frame, or a canonical spectrum of length min(i, ell) when the
        reduced path applies.
    """
    i = dims.i
    prof = body if isinstance(body, Profile) else getattr(body, "profile", None)
    if isinstance(body, StarBody) and prof is not None and body.ell != dims.ell:
        prof = None
    xi = np.asarray(xi, dtype=float)
    if prof is not None:
        spectrum = canonical_lambdas(xi, dims.ell) if xi.ndim == 2 else xi
        return radon_reduced(prof.power(i), spectrum, dims, **kwargs).scaled(1.0 / i)
    if xi.ndim != 2:
        raise PreconditionError("a general star body needs a frame, not a spectrum")
    return radon_direct(lambda th: body(th) ** i, xi, **kwargs).scaled(1.0 / i)
