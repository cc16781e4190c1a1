"""Origin-symmetric star bodies and K_ell-symmetric radial profiles.

A K_ell-symmetric body is described by its profile ``rho(t)`` on [0, 1]:
the radial function in direction theta is ``rho(|theta''|^2)`` where
theta'' is the component of theta in R^ell (the last ``ell`` coordinates).
General bodies carry a vectorised radial evaluator on S^{n-1}.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.interpolate import CubicSpline

from .errors import ConvergenceError, PreconditionError
from .grassmann import as_rng
from .quadrature import (
    chebyshev_closed_grid,
    gauss_jacobi_01,
    sphere_area,
    uniform_sphere,
)

__all__ = [
    "Profile",
    "StarBody",
    "profile_of_ql_ball",
    "norm_sum_profile",
    "polynomial_profile",
    "grid_profile",
    "body_from_profile",
    "ql_ball",
    "perturbed_body",
    "body_from_spec",
    "body_volume_profile",
    "body_volume_mc",
    "is_convex_profile",
    "convexity_defect",
    "monotone_r_check",
    "kl_symmetrize",
    "save_profile_csv",
    "load_profile_csv",
]

VALIDATION_POINTS = 512
DEFAULT_GRID_NODES = 257
DERIV_DEGREE = 128


class Profile:
    """Positive function on [0, 1] describing a K_ell-invariant radial function.

    Parameters
    ----------
    func : callable
        Vectorised map t -> rho(t).
    deriv : callable, optional
        Exact derivative.  When missing, derivatives come from a Chebyshev
        interpolant of degree 128.
    kind : {"closed", "grid"}
    nodes : int, optional
        Node count for grid-interpolated profiles.
    spec : dict, optional
        JSON-serialisable description used in reports.
    meta : dict, optional
        Free-form diagnostics (e.g. Monte-Carlo errors of a symmetrisation).
    """

    def __init__(self, func, deriv=None, *, kind="closed", nodes=None, spec=None, meta=None):
        self._func = func
        self._deriv = deriv
        self.kind = kind
        self.nodes = nodes
        self.spec = spec if spec is not None else {"kind": "callable"}
        self.meta = dict(meta or {})

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.asarray(self._func(t), dtype=float)

    def __repr__(self) -> str:
        return f"Profile({self.spec!r})"

    @cached_property
    def _cheb(self) -> Chebyshev:
        return Chebyshev.interpolate(self, DERIV_DEGREE, domain=[0.0, 1.0])

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self._deriv is not None:
            return np.asarray(self._deriv(t), dtype=float)
        return self._cheb.deriv()(t)

    @property
    def has_exact_derivative(self) -> bool:
        return self._deriv is not None

    def power(self, p: float) -> "Profile":
        f, df = self, self._deriv
        deriv = None
        if df is not None:
            deriv = lambda t: p * f(t) ** (p - 1) * df(t)  # noqa: E731
        return Profile(lambda t: f(t) ** p, deriv, kind=self.kind, nodes=self.nodes,
                       spec={"kind": "power", "p": p, "base": self.spec})

    def scaled(self, c: float) -> "Profile":
        if c <= 0:
            raise PreconditionError(f"scale factor must be positive, got {c}")
        f, df = self, self._deriv
        deriv = None if df is None else (lambda t: c * df(t))
        return Profile(lambda t: c * f(t), deriv, kind=self.kind, nodes=self.nodes,
                       spec={"kind": "scaled", "c": c, "base": self.spec})

    def validate(self) -> dict:
        """Check positivity on the validation grid; return a Lipschitz estimate."""
        t = np.concatenate([[0.0], np.sort(chebyshev_closed_grid(VALIDATION_POINTS)), [1.0]])
        t = np.unique(t)
        vals = self(t)
        if not np.all(np.isfinite(vals)) or vals.min() <= 0:
            raise PreconditionError(f"profile must be positive and finite on [0, 1] (min {vals.min()})")
        lip = float(np.max(np.abs(np.diff(vals)) / np.diff(t)))
        return {"min": float(vals.min()), "max": float(vals.max()), "lipschitz": lip}

    def to_grid(self, nodes: int = DEFAULT_GRID_NODES) -> "Profile":
        t = chebyshev_closed_grid(nodes)
        return grid_profile(t, self(t))


def grid_profile(t, rho, meta=None) -> Profile:
    """Profile interpolating samples ``rho`` at nodes ``t``.

    Chebyshev-Lobatto node sets are interpolated by the Chebyshev polynomial
    through all nodes; any other node set falls back to a cubic spline.
    """
    t = np.asarray(t, dtype=float)
    rho = np.asarray(rho, dtype=float)
    order = np.argsort(t)
    t, rho = t[order], rho[order]
    if t.size < 4 or t[0] < 0 or t[-1] > 1:
        raise PreconditionError("grid profile needs at least 4 nodes inside [0, 1]")
    if np.allclose(t, chebyshev_closed_grid(t.size), atol=1e-12, rtol=0):
        interp = Chebyshev.fit(t, rho, t.size - 1, domain=[0.0, 1.0])
        deriv = interp.deriv()
    else:
        interp = CubicSpline(t, rho)
        deriv = interp.derivative()
    spec = {"kind": "grid", "t": t.tolist(), "rho": rho.tolist()}
    return Profile(interp, deriv, kind="grid", nodes=int(t.size), spec=spec, meta=meta)


def profile_of_ql_ball(q: float) -> Profile:
    """Profile of the (q, ell)-ball |x'|^q + |x''|^q <= 1.

    With |x''| = r cos(omega), |x'| = r sin(omega) and t = cos^2(omega) the
    boundary radius is ``(t**(q/2) + (1-t)**(q/2))**(-1/q)``.
    """
    if q <= 0:
        raise PreconditionError(f"q must be positive, got {q}")
    h = 0.5 * q

    def func(t):
        return (t ** h + (1.0 - t) ** h) ** (-1.0 / q)

    def deriv(t):
        with np.errstate(divide="ignore"):
            s = t ** h + (1.0 - t) ** h
            return -0.5 * s ** (-1.0 / q - 1.0) * (t ** (h - 1.0) - (1.0 - t) ** (h - 1.0))

    return Profile(func, deriv, spec={"kind": "ql_ball", "q": float(q)})


def norm_sum_profile(terms) -> Profile:
    """Profile of the unit ball of a positive sum of weighted l_q norms.

    Each term ``(w, q, a, b)`` contributes ``w * ((|x'|/a)^q + (|x''|/b)^q)^(1/q)``
    to the Minkowski functional.  With every q >= 1 the result is convex.
    """
    terms = [tuple(float(x) for x in term) for term in terms]
    if not terms:
        raise PreconditionError("need at least one norm term")
    for w, q, a, b in terms:
        if w <= 0 or q <= 0 or a <= 0 or b <= 0:
            raise PreconditionError(f"norm term parameters must be positive: {(w, q, a, b)}")

    def gauge(t):
        tot = 0.0
        dtot = 0.0
        for w, q, a, b in terms:
            h = 0.5 * q
            with np.errstate(divide="ignore", invalid="ignore"):
                s = (1.0 - t) ** h * a ** -q + t ** h * b ** -q
                tot = tot + w * s ** (1.0 / q)
                ds = h * (t ** (h - 1.0) * b ** -q - (1.0 - t) ** (h - 1.0) * a ** -q)
                dtot = dtot + w * s ** (1.0 / q - 1.0) * ds / q
        return tot, dtot

    def func(t):
        return 1.0 / gauge(t)[0]

    def deriv(t):
        g, dg = gauge(t)
        return -dg / g ** 2

    return Profile(func, deriv, spec={"kind": "norm_sum", "terms": [list(x) for x in terms]})


def polynomial_profile(coeffs) -> Profile:
    """Profile given by a polynomial in t (coefficients in increasing degree)."""
    poly = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
    dpoly = poly.deriv()
    return Profile(poly, dpoly, spec={"kind": "polynomial", "coeffs": [float(c) for c in poly.coef]})


# ---------------------------------------------------------------- star bodies


@dataclass(frozen=True)
class StarBody:
    """Origin-symmetric star body in R^n given by its radial function."""

    n: int
    radial: Callable[[np.ndarray], np.ndarray]
    profile: Profile | None = None
    ell: int | None = None
    spec: dict = field(default_factory=lambda: {"kind": "callable"})

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.asarray(self.radial(theta), dtype=float)

    def scaled(self, c: float) -> "StarBody":
        prof = None if self.profile is None else self.profile.scaled(c)
        rad = self.radial
        return StarBody(self.n, lambda th: c * rad(th), prof, self.ell,
                        {"kind": "scaled", "c": c, "base": self.spec})

    def rotated(self, g: np.ndarray) -> "StarBody":
        """Body g B, i.e. radial function theta -> rho(g' theta)."""
        rad = self.radial
        return StarBody(self.n, lambda th: rad(th @ g), None, None,
                        {"kind": "rotated", "g": np.asarray(g).tolist(), "base": self.spec})

    def validate(self, samples: int = 10_000, seed=0) -> None:
        theta = uniform_sphere(as_rng(seed), samples, self.n)
        r_plus, r_minus = self(theta), self(-theta)
        if not np.all(np.isfinite(r_plus)) or r_plus.min() <= 0:
            raise PreconditionError("radial function must be positive")
        if np.max(np.abs(r_plus - r_minus)) > 1e-12 * max(1.0, r_plus.max()):
            raise PreconditionError("radial function must be even")


def _t_of(theta: np.ndarray, ell: int) -> np.ndarray:
    low = theta[..., -ell:]
    return np.clip(np.sum(low * low, axis=-1), 0.0, 1.0)


def body_from_profile(p: Profile, n: int, ell: int) -> StarBody:
    if not 1 <= ell <= n - 1:
        raise PreconditionError(f"need 1 <= ell <= n-1, got ell={ell}, n={n}")
    return StarBody(n, lambda th: p(_t_of(th, ell)), p, ell,
                    {"kind": "profile", "n": n, "ell": ell, "profile": p.spec})


def ql_ball(q: float, n: int, ell: int) -> StarBody:
    body = body_from_profile(profile_of_ql_ball(q), n, ell)
    return StarBody(body.n, body.radial, body.profile, ell,
                    {"kind": "ql_ball", "q": float(q), "n": n, "ell": ell})


def perturbed_body(base: StarBody, Q, power: float = 1.0) -> StarBody:
    """``rho(theta) = rho_base(theta) * (1 + theta' Q theta) ** power``.

    ``Q`` must be symmetric with spectral radius below one so the factor stays
    positive.  The result is even because the quadratic form is.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (base.n, base.n) or not np.allclose(Q, Q.T):
        raise PreconditionError("perturbation matrix must be symmetric n x n")
    if np.max(np.abs(np.linalg.eigvalsh(Q))) >= 1:
        raise PreconditionError("perturbation matrix must have spectral radius < 1")
    rad = base.radial

    def radial(theta):
        quad = np.einsum("...j,jk,...k->...", theta, Q, theta)
        return rad(theta) * (1.0 + quad) ** power

    return StarBody(base.n, radial, None, None,
                    {"kind": "perturbed", "base": base.spec, "Q": Q.tolist(), "power": power})


def body_from_spec(spec: dict) -> StarBody:
    """Build a body from its JSON description.

    Supported kinds: ``ql_ball`` {q, n, ell}; ``profile`` {n, ell, t, rho} or
    {n, ell, csv}; ``perturbed`` {base, Q, power}.
    """
    kind = spec.get("kind")
    if kind == "ql_ball":
        return ql_ball(float(spec["q"]), int(spec["n"]), int(spec["ell"]))
    if kind == "profile":
        if "csv" in spec:
            prof = load_profile_csv(spec["csv"])
        else:
            prof = grid_profile(spec["t"], spec["rho"])
        return body_from_profile(prof, int(spec["n"]), int(spec["ell"]))
    if kind == "perturbed":
        return perturbed_body(body_from_spec(spec["base"]), spec["Q"], float(spec.get("power", 1.0)))
    raise PreconditionError(f"unknown body kind {kind!r}")


# ---------------------------------------------------------------- volumes


def _profile_volume(p: Profile, n: int, ell: int, npts: int) -> float:
    t, w = gauss_jacobi_01(npts, 0.5 * ell - 1.0, 0.5 * (n - ell) - 1.0)
    c2 = sphere_area(ell - 1) * sphere_area(n - ell - 1) / (2.0 * n)
    return float(c2 * np.dot(w, p(t) ** n))


def body_volume_profile(p: Profile, n: int, ell: int, *, nodes: int = 64,
                        max_nodes: int = 8192, rtol: float = 1e-8, full_output: bool = False):
    """Volume of the K_ell-symmetric body with profile ``p``.

    Uses the Jacobi-weighted reduction of the sphere integral; the node count
    doubles until two successive values agree to ``rtol``.

    Returns
    -------
    float, or ``(volume, error_estimate)`` when ``full_output`` is set.
    """
    if not 1 <= ell <= n - 1:
        raise PreconditionError(f"need 1 <= ell <= n-1, got ell={ell}, n={n}")
    prev = _profile_volume(p, n, ell, nodes)
    npts = nodes
    while True:
        npts *= 2
        cur = _profile_volume(p, n, ell, npts)
        err = abs(cur - prev)
        if err <= rtol * abs(cur) or npts >= max_nodes:
            break
        prev = cur
    if err > rtol * abs(cur):
        raise ConvergenceError(f"profile volume did not converge (last change {err:.2e})")
    return (cur, err) if full_output else cur


def body_volume_mc(body: StarBody, samples: int = 100_000, seed=None) -> tuple[float, float]:
    """Monte-Carlo volume ``sigma_{n-1}/n * mean(rho^n)`` with its standard error."""
    if samples < 1000:
        raise PreconditionError(f"need at least 1000 samples, got {samples}")
    theta = uniform_sphere(as_rng(seed), samples, body.n)
    vals = body(theta) ** body.n
    scale = sphere_area(body.n - 1) / body.n
    return float(scale * vals.mean()), float(scale * vals.std(ddof=1) / math.sqrt(samples))


# ---------------------------------------------------------------- convexity


def _profile_polygon(p: Profile, grid: int) -> np.ndarray:
    # graded angles cluster vertices near the axes, where flat points live
    phi = 0.5 * np.pi * chebyshev_closed_grid(grid)
    full = np.concatenate([phi, np.pi - phi[::-1][1:], np.pi + phi[1:], 2 * np.pi - phi[::-1][1:-1]])
    rho = p(np.sin(full) ** 2)
    if not np.all(np.isfinite(rho)) or rho.min() <= 0:
        raise PreconditionError("degenerate profile: radial values must be positive")
    return np.stack([rho * np.cos(full), rho * np.sin(full)], axis=1)


def convexity_defect(p: Profile, grid: int = 512) -> float:
    """Smallest normalised turn (sine of the exterior angle) of the profile polygon.

    The polygon is the planar section {(|x'|, |x''|)} of the body, extended by
    reflection in both axes and traversed counter-clockwise.  A convex body
    gives a non-negative result.
    """
    if grid < 64:
        raise PreconditionError(f"grid must be >= 64, got {grid}")
    pts = _profile_polygon(p, grid)
    e = np.roll(pts, -1, axis=0) - pts
    e_next = np.roll(e, -1, axis=0)
    cross = e[:, 0] * e_next[:, 1] - e[:, 1] * e_next[:, 0]
    norm = np.linalg.norm(e, axis=1) * np.linalg.norm(e_next, axis=1)
    return float(np.min(cross / norm))


def is_convex_profile(p: Profile, grid: int = 512, tol: float = 1e-10) -> bool:
    """True iff the K_ell-symmetric body with profile ``p`` is convex.

    The body is convex exactly when its 2D profile region in the
    (|x'|, |x''|) plane, reflected into all four quadrants, is convex.
    """
    return convexity_defect(p, grid) >= -tol


def monotone_r_check(p: Profile, grid: int = 512, tol: float = 1e-10) -> bool:
    """True iff ``r(s) = sqrt(s) * rho(1 - s)`` is non-decreasing on [0, 1]."""
    if grid < 64:
        raise PreconditionError(f"grid must be >= 64, got {grid}")
    s = chebyshev_closed_grid(grid)
    r = np.sqrt(s) * p(1.0 - s)
    return bool(np.min(np.diff(r)) >= -tol * np.max(np.abs(r)))


# ---------------------------------------------------------------- symmetrisation


def kl_symmetrize(body: StarBody, ell: int, i: int, *, samples: int = 4000, seed=None,
                  nodes: int = DEFAULT_GRID_NODES, tol: float | None = None) -> Profile:
    """K_ell-symmetrisation: orbit average of ``rho^i`` followed by the i-th root.

    Each profile node t averages over theta = (u sqrt(1-t), v sqrt(t)) with u
    uniform on S^{n-ell-1} and v uniform on S^{ell-1}; the same (u, v) draws
    are shared across nodes.  The returned grid profile records the largest
    standard error of the root in ``meta["stderr"]``.

    Raises
    ------
    ConvergenceError
        If ``tol`` is given and the reported standard error exceeds it.
    """
    n = body.n
    if i < 1:
        raise PreconditionError(f"i must be >= 1, got {i}")
    if not 1 <= ell <= n - 1:
        raise PreconditionError(f"need 1 <= ell <= n-1, got ell={ell}, n={n}")
    rng = as_rng(seed)
    u = uniform_sphere(rng, samples, n - ell)
    v = uniform_sphere(rng, samples, ell)
    t = chebyshev_closed_grid(nodes)
    means = np.empty(nodes)
    errs = np.empty(nodes)
    for k, tk in enumerate(t):
        theta = np.concatenate([u * math.sqrt(1.0 - tk), v * math.sqrt(tk)], axis=1)
        vals = body(theta) ** i
        means[k] = vals.mean()
        errs[k] = vals.std(ddof=1) / math.sqrt(samples)
    root = means ** (1.0 / i)
    root_err = errs / (i * means ** (1.0 - 1.0 / i))
    stderr = float(root_err.max())
    if tol is not None and stderr > tol:
        raise ConvergenceError(
            f"symmetrisation standard error {stderr:.2e} exceeds tolerance {tol:.2e}; raise samples"
        )
    return grid_profile(t, root, meta={"stderr": stderr, "node_stderr": root_err.tolist(),
                                       "samples": samples, "i": i})


# ---------------------------------------------------------------- CSV


def save_profile_csv(p: Profile, path, nodes: int = DEFAULT_GRID_NODES, column: str = "rho") -> None:
    """Write ``t,<column>`` rows on the Chebyshev-Lobatto grid."""
    t = chebyshev_closed_grid(nodes)
    vals = p(t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", column])
        for a, b in zip(t, vals):
            w.writerow([repr(float(a)), repr(float(b))])


def load_profile_csv(path) -> Profile:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0][:2]] != ["t", "rho"]:
        raise PreconditionError(f"{path}: expected header 't,rho'")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    return grid_profile(data[:, 0], data[:, 1])
