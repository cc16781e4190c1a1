"""Busemann-Petty experiments for K_ell-symmetric bodies.

Positive direction: when A is K_ell-symmetric and its sections by equal-angle
subspaces are no larger than those of B, the volume of A is no larger than
that of B in the regimes i <= min(ell, n - ell) (mode a) and, for convex A,
i - ell in {1, 2} (mode b).

Negative direction: for ell + 2 < i <= n - 1 the (4, ell)-ball B is not an
(n-i)-intersection body, and a body A with

    rho_A^i = rho_B^i - eps M^{1-i} h,   h >= 0,   (phi, h) < 0,
    phi = M^{1-i} rho_B^{n-i},

has smaller i-sections but larger volume.  h is taken as a non-negative
combination of Beta polynomials t^a (1-t)^b so its expansion, and hence
M^{1-i} h, is exact.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linprog

from ._version import __version__
from .abel import AbelParams, solve_g
from .bodies import (
    Profile,
    StarBody,
    body_from_profile,
    body_volume_mc,
    body_volume_profile,
    convexity_defect,
    is_convex_profile,
    kl_symmetrize,
    norm_sum_profile,
    profile_of_ql_ball,
)
from .cosine import (
    DEFAULT_K,
    HarmonicExpansion,
    cosine_transform,
    expand_invariant,
    multiplier,
)
from .errors import CheckFailure, PreconditionError
from .grassmann import (
    Dims,
    KlRotation,
    apply_kl_rotation,
    canonical_lambdas,
    equal_angle_frame,
    haar_sample_frame,
)
from .quadrature import chebyshev_open_grid, gauss_jacobi_01, sphere_area
from .radon import radon_direct, radon_reduced_batch

__all__ = [
    "BpReport",
    "CounterexampleSpec",
    "SymmetrizationReport",
    "spawn_rngs",
    "equal_angle_sample",
    "haar_spectra",
    "bp_positive_check",
    "tight_comparison_scale",
    "random_convex_profile",
    "random_positive_instance",
    "positive_property_suite",
    "construct_counterexample",
    "counterexample_profile",
    "verify_counterexample",
    "symmetrization_experiment",
    "write_section_csv",
]

SECTION_RTOL = 1e-8
VOLUME_RTOL = 1e-6
MARGIN_FACTOR = 5.0
LAMBDA_NODES = 33
FRAMES_PER_LAMBDA = 8
EPS_BISECTIONS = 40
EPS_SAFETY = 0.9
BUMP_DEGREES = (8, 16, 24, 32, 40, 48)
ENDPOINT_FRACTIONS = (0.1, 0.03, 0.01, 0.003)
FLOOR_RTOL = 1e-9
DEGENERATE_ROW_RTOL = 1e-6


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def spawn_rngs(seed, count: int) -> list[np.random.Generator]:
    """Independent generators keyed by index, so results do not depend on evaluation order."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(count)]


def _child_seeds(seed, count: int) -> list[np.random.SeedSequence]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(count)


# ---------------------------------------------------------------- reports


@dataclass
class BpReport:
    """Outcome of one Busemann-Petty comparison.

    ``fraction`` is the share of sampled subspaces with
    vol_i(A cap xi) <= vol_i(B cap xi) + tol.
    """

    n: int
    i: int
    ell: int
    mode: str
    samples: int
    fraction: float
    vol_a: float
    vol_b: float
    verdict: str
    seeds: dict
    tolerances: dict
    details: dict = field(default_factory=dict)
    environment: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"fraction must lie in [0, 1], got {self.fraction}")
        if not (self.vol_a > 0 and self.vol_b > 0):
            raise ValueError("volumes must be positive")
        self.environment = {"version": __version__, **self.environment}

    @property
    def dims(self) -> Dims:
        return Dims(self.n, self.i, self.ell)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return _dumps(self.to_dict())

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())


def write_section_csv(path, spectra, vol_a, vol_b) -> None:
    """Rows ``lambda1..lambdam,volA,volB``, one per sampled subspace."""
    spectra = np.atleast_2d(np.asarray(spectra, dtype=float))
    m = spectra.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"lambda{j + 1}" for j in range(m)] + ["volA", "volB"])
        for lam, a, b in zip(spectra, vol_a, vol_b):
            w.writerow([repr(float(x)) for x in lam] + [repr(float(a)), repr(float(b))])


# ---------------------------------------------------------------- sampling


def equal_angle_sample(dims: Dims, seed, *, nodes: int = LAMBDA_NODES,
                       frames: int = FRAMES_PER_LAMBDA) -> tuple[np.ndarray, list, np.ndarray]:
    """Equal-angle frames on a Chebyshev lambda grid, ``frames`` rotations per node.

    Returns the nominal lambdas, the frames and their measured spectra.
    """
    lams = np.repeat(chebyshev_open_grid(nodes), frames)
    rngs = spawn_rngs(seed, lams.size)
    fr = [equal_angle_frame(dims, float(lam), rng) for lam, rng in zip(lams, rngs)]
    spectra = np.array([canonical_lambdas(f, dims.ell) for f in fr])
    return lams, fr, spectra


def haar_spectra(dims: Dims, count: int, seed) -> np.ndarray:
    rngs = spawn_rngs(seed, count)
    return np.array([canonical_lambdas(haar_sample_frame(dims.n, dims.i, r), dims.ell) for r in rngs])


def _profile_sections(p: Profile, spectra, dims: Dims, seed=None):
    vals, err, _ = radon_reduced_batch(p.power(dims.i), spectra, dims, full_output=True, seed=seed)
    return vals / dims.i, err / dims.i


def _body_sections(body: StarBody, frames, dims: Dims, seed, degree: int = 30):
    rngs = spawn_rngs(seed, len(frames))
    out = [radon_direct(lambda th: body(th) ** dims.i, f, degree=degree, seed=r) for f, r in zip(frames, rngs)]
    return np.array([o.value for o in out]) / dims.i, max(o.error for o in out) / dims.i


# ---------------------------------------------------------------- positive direction


def _check_positive_mode(mode: str, dims: Dims, A: Profile) -> None:
    n, i, ell = dims.n, dims.i, dims.ell
    if mode == "positive-a":
        if i > min(ell, n - ell):
            raise PreconditionError(f"mode positive-a needs i <= min(ell, n-ell), got i={i}, ell={ell}, n={n}")
    elif mode == "positive-b":
        if i - ell not in (1, 2) or i > n - ell:
            raise PreconditionError(
                f"mode positive-b needs i - ell in {{1, 2}} and i <= n - ell, got i={i}, ell={ell}, n={n}"
            )
        if not is_convex_profile(A):
            raise PreconditionError("mode positive-b needs a convex body A")
    else:
        raise PreconditionError(f"unknown positive mode {mode!r}")


def bp_positive_check(A: Profile, B, dims: Dims, *, mode: str, samples: int = LAMBDA_NODES * FRAMES_PER_LAMBDA,
                      seed=0, sym_samples: int = 4000, mc_samples: int = 200_000,
                      tol: float = SECTION_RTOL) -> BpReport:
    """Check the section hypothesis on equal-angle subspaces and, if it holds, the volume conclusion.

    ``B`` is a StarBody or a Profile (read as K_ell-symmetric).  The chain
    through the symmetrised body B0 is recorded in ``details``: for mode a
    the pointwise bound rho_A <= rho_B0, for mode b the density g >= 0 and the
    mixed volume (1/n) int rho_B0^i rho_A^{n-i}, which sits between vol(A)
    and vol(B0)^{i/n} vol(A)^{(n-i)/n}.
    """
    n, i, ell = dims.n, dims.i, dims.ell
    _check_positive_mode(mode, dims, A)
    if isinstance(B, Profile):
        B = body_from_profile(B, n, ell)
    if B.n != n:
        raise PreconditionError(f"body B lives in R^{B.n}, expected R^{n}")
    invariant = B.profile is not None and B.ell == ell
    s_frames, s_sec, s_sym, s_vol = _child_seeds(seed, 4)

    per = max(1, math.ceil(samples / LAMBDA_NODES))
    lams, frames, spectra = equal_angle_sample(dims, s_frames, frames=per)
    lams, frames, spectra = lams[:samples], frames[:samples], spectra[:samples]
    sec_a, err_a = _profile_sections(A, spectra, dims)
    if invariant:
        sec_b, err_b = _profile_sections(B.profile, spectra, dims)
    else:
        sec_b, err_b = _body_sections(B, frames, dims, s_sec)
    scale = float(np.max(np.abs(sec_b)))
    ok = sec_a <= sec_b + tol * scale
    fraction = float(np.mean(ok))

    vol_a, verr_a = body_volume_profile(A, n, ell, full_output=True)
    if invariant:
        b0 = B.profile
        vol_b, verr_b = body_volume_profile(b0, n, ell, full_output=True)
        vol_note = "profile"
    else:
        b0 = kl_symmetrize(B, ell, i, samples=sym_samples, seed=np.random.default_rng(s_sym))
        vol_b, se = body_volume_mc(B, mc_samples, seed=np.random.default_rng(s_vol))
        verr_b = 4.0 * se
        vol_note = "monte-carlo (4 standard errors)"
    vol_b0 = body_volume_profile(b0, n, ell)

    t = chebyshev_open_grid(512)
    details = {
        "section_max_excess": float(np.max((sec_a - sec_b) / scale)),
        "section_error": float(err_a + err_b),
        "volume_errors": {"a": float(verr_a), "b": float(verr_b), "b_method": vol_note},
        "vol_b0": float(vol_b0),
        "b_invariant": invariant,
        "lambda_nodes": LAMBDA_NODES,
        "frames_per_lambda": per,
    }
    if mode == "positive-a":
        details["radial_max_excess"] = float(np.max(A(t) - b0(t)))
    else:
        g = solve_g(A, AbelParams(n, i, ell))
        tt, w = gauss_jacobi_01(256, 0.5 * ell - 1.0, 0.5 * (n - ell) - 1.0)
        c2 = sphere_area(ell - 1) * sphere_area(n - ell - 1) / (2.0 * n)
        mixed = float(c2 * np.dot(w, b0(tt) ** i * A(tt) ** (n - i)))
        details.update({
            "g_min_relative": g.min / g.max_abs,
            "mixed_volume": mixed,
            "holder_bound": float(vol_b0 ** (i / n) * vol_a ** ((n - i) / n)),
        })

    if fraction < 1.0:
        verdict = "HYPOTHESIS_NOT_MET"
    elif vol_a <= vol_b * (1.0 + VOLUME_RTOL) + verr_b:
        verdict = "CONFIRMED"
    else:
        verdict = "VIOLATION"
    return BpReport(
        n=n, i=i, ell=ell, mode=mode, samples=int(len(spectra)), fraction=fraction,
        vol_a=float(vol_a), vol_b=float(vol_b), verdict=verdict,
        seeds={"seed": _seed_repr(seed)},
        tolerances={"section_rtol": tol, "volume_rtol": VOLUME_RTOL},
        details=details,
        environment={"sym_samples": sym_samples, "mc_samples": mc_samples},
    )


def _seed_repr(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    return seed


def tight_comparison_scale(A: Profile, B: Profile, dims: Dims, *, nodes: int = 257,
                           margin: float = 1e-9) -> float:
    """Smallest c such that cB has equal-angle sections at least those of A.

    The ratio of section volumes is maximised over a dense Chebyshev grid
    that also contains the default sampling grid.
    """
    lam = np.unique(np.concatenate([chebyshev_open_grid(nodes), chebyshev_open_grid(LAMBDA_NODES)]))
    spectra = np.repeat(lam[:, None], dims.m, axis=1)
    ra = radon_reduced_batch(A.power(dims.i), spectra, dims)
    rb = radon_reduced_batch(B.power(dims.i), spectra, dims)
    return float(np.max(ra / rb) ** (1.0 / dims.i) * (1.0 + margin))


def random_convex_profile(rng: np.random.Generator) -> Profile:
    """Sum of one to three weighted l_q norms with even q, so the profile is analytic on [0, 1]."""
    terms = []
    for _ in range(int(rng.integers(1, 4))):
        q = float(rng.choice([2.0, 4.0, 6.0, 8.0]))
        terms.append((rng.uniform(0.3, 1.0), q, rng.uniform(0.6, 1.6), rng.uniform(0.6, 1.6)))
    return norm_sum_profile(terms)


def random_positive_instance(rng: np.random.Generator, mode: str, n_max: int = 8):
    """Random (A, B, dims) for a positive mode, with B scaled so the hypothesis just holds.

    A is a convex sum-of-norms body; B is a K_ell-symmetric (q, ell)-ball or
    sum-of-norms body of random shape.
    """
    while True:
        n = int(rng.integers(3, n_max + 1))
        ell = int(rng.integers(1, n))
        if mode == "positive-a":
            top = min(ell, n - ell)
            if top < 1:
                continue
            i = int(rng.integers(1, top + 1))
        else:
            choices = [ell + d for d in (1, 2) if ell + d <= n - ell]
            if not choices:
                continue
            i = int(rng.choice(choices))
        break
    dims = Dims(n, i, ell)
    A = random_convex_profile(rng)
    shape = (profile_of_ql_ball(float(rng.choice([2.0, 4.0, 6.0, 8.0]))) if rng.random() < 0.5
             else random_convex_profile(rng))
    B = shape.scaled(tight_comparison_scale(A, shape, dims))
    return A, B, dims


def positive_property_suite(count: int = 200, seed=0, *, samples: int = LAMBDA_NODES * 2) -> dict:
    """Run ``count`` random positive-mode instances and count volume violations."""
    rngs = spawn_rngs(seed, count)
    rows = []
    for k, rng in enumerate(rngs):
        mode = "positive-a" if k % 2 == 0 else "positive-b"
        A, B, dims = random_positive_instance(rng, mode)
        rep = bp_positive_check(A, B, dims, mode=mode, samples=samples, seed=k)
        rows.append({"index": k, "mode": mode, "n": dims.n, "i": dims.i, "ell": dims.ell,
                     "verdict": rep.verdict, "vol_a": rep.vol_a, "vol_b": rep.vol_b,
                     "fraction": rep.fraction})
    verdicts = [r["verdict"] for r in rows]
    return {"count": count, "violations": verdicts.count("VIOLATION"),
            "confirmed": verdicts.count("CONFIRMED"),
            "hypothesis_not_met": verdicts.count("HYPOTHESIS_NOT_MET"), "instances": rows}


# ---------------------------------------------------------------- negative direction


@dataclass
class CounterexampleSpec:
    """Everything needed to rebuild the counterexample body A from B = B^n_{4,ell}."""

    n: int
    i: int
    ell: int
    eps: float
    K: int
    q: float = 4.0
    eps_max: float = 1.0
    bump: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.eps < 0:
            raise ValueError(f"eps must be non-negative, got {self.eps}")

    @property
    def dims(self) -> Dims:
        return Dims(self.n, self.i, self.ell)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return _dumps(self.to_dict())

    def perturbation(self) -> HarmonicExpansion:
        """M^{1-i} h as an exact invariant expansion."""
        return _bump_transform(self.n, self.ell, self.i, self.K, self.bump["terms"])


def _beta_expansion(n: int, ell: int, K: int, a: int, b: int) -> HarmonicExpansion:
    return expand_invariant(lambda t: t ** a * (1.0 - t) ** b, n, ell, K)


def _bump_expansion(n, ell, K, terms) -> HarmonicExpansion:
    coeffs = sum(w * _beta_expansion(n, ell, K, a, b).coeffs for a, b, w in terms)
    return HarmonicExpansion(n, ell, np.asarray(coeffs, dtype=float))


def _bump_transform(n, ell, i, K, terms) -> HarmonicExpansion:
    return cosine_transform(_bump_expansion(n, ell, K, terms), 1.0 - i)


def counterexample_profile(B: Profile, P: HarmonicExpansion, eps: float, i: int) -> Profile:
    """Profile with rho^i = rho_B^i - eps P, with its exact derivative."""
    F = B.power(i)
    dP = P.to_chebyshev().deriv()

    def func(t):
        return (F(t) - eps * P(t)) ** (1.0 / i)

    def deriv(t):
        g = F(t) - eps * P(t)
        return g ** (1.0 / i - 1.0) * (F.derivative(t) - eps * dP(t)) / i

    return Profile(func, deriv, spec={"kind": "counterexample", "eps": eps, "base": B.spec})


def _endpoint_rows(P_list, F: Profile):
    # first-order change of the curvature at the flat axis points of B
    r0 = float(F.derivative(0.0) / F(0.0))
    r1 = float(F.derivative(1.0) / F(1.0))
    L0, L1 = [], []
    for P in P_list:
        c = P.to_chebyshev()
        d = c.deriv()
        L0.append(float(d(0.0) - r0 * c(0.0)))
        L1.append(float(-d(1.0) + r1 * c(1.0)))
    return np.array(L0), np.array(L1)


def construct_counterexample(dims: Dims, *, eps_max: float = 1.0, K: int = DEFAULT_K,
                             eps: float | None = None, check_samples: int = 512,
                             seed=0) -> tuple[Profile, CounterexampleSpec]:
    """Build A with smaller i-sections and larger volume than B = B^n_{4,ell}.

    1. phi = M^{1-i} rho_B^{n-i}; Omega = {phi < -delta}, delta = 0.1 |min phi|.
    2. h = sum_j w_j t^{a_j} (1-t)^{b_j}, w >= 0, over Beta bumps peaking in
       Omega.  The weights solve a linear program: (phi, h) = -1, the
       first-order curvature changes at the two flat axis points of B are
       positive, and sum_j w_j max|M^{1-i} b_j| is minimal.  A curvature
       row that vanishes on every bump is dropped.  h is then
       rescaled so that max|M^{1-i} h| = 1.
    3. eps is the largest value in (0, eps_max] (40 bisection steps) keeping
       rho_A positive and convex, times 0.9.  Passing ``eps`` skips the
       search.

    The section inequality is then confirmed by direct reduced-Radon
    comparisons on ``check_samples`` Haar subspaces and the equal-angle grid.
    """
    n, i, ell = dims.n, dims.i, dims.ell
    if not ell + 2 < i <= n - 1:
        raise PreconditionError(f"the counterexample needs ell + 2 < i <= n - 1, got i={i}, ell={ell}, n={n}")
    if eps_max <= 0:
        raise PreconditionError(f"eps_max must be positive, got {eps_max}")
    B = profile_of_ql_ball(4.0)
    F = B.power(i)
    base = expand_invariant(B.power(n - i), n, ell, K)
    phi = cosine_transform(base, 1.0 - i)
    tg = np.linspace(0.0, 1.0, 2001)
    pv = phi(tg)
    phi_min = float(pv.min())
    delta = 0.1 * abs(phi_min)
    omega = tg[pv < -delta]
    if phi_min >= 0 or omega.size == 0:
        raise CheckFailure(
            f"phi = M^(1-i) rho_B^(n-i) has no negative set (min {phi_min:.3e}); "
            "the body would be an (n-i)-intersection body, which points to a multiplier error"
        )

    cols = [(a, D - a) for D in BUMP_DEGREES if D <= K for a in range(D + 1) if a / D >= omega.min()]
    m = np.array([multiplier(n, k, 1.0 - i) for k in range(K + 1)])
    exps = [_beta_expansion(n, ell, K, a, b) for a, b in cols]
    trans = [HarmonicExpansion(n, ell, e.coeffs * m) for e in exps]
    s = np.array([phi.inner(e) for e in exps])
    L0, L1 = _endpoint_rows(trans, F)
    # a row that vanishes on every bump (to rounding) cannot be made
    # positive; convexity there is left to the direct check on A
    scale = max(np.max(np.abs(L0)), np.max(np.abs(L1)))
    active = [k for k, row in enumerate((L0, L1)) if np.max(np.abs(row)) > DEGENERATE_ROW_RTOL * scale]
    rows = np.vstack([(L0, L1)[k] for k in active]) if active else np.zeros((0, len(cols)))
    cost = np.array([np.max(np.abs(P(tg))) for P in trans])
    base_lp = linprog(cost, A_ub=-rows if active else None, b_ub=np.zeros(len(active)) if active else None,
                      A_eq=s[None], b_eq=[-1.0], bounds=(0, None), method="highs")
    if base_lp.status != 0:
        raise CheckFailure(f"no admissible bump: linear program status {base_lp.status} ({base_lp.message})")
    lp, tau = base_lp, 0.0
    for frac in ENDPOINT_FRACTIONS if active else ():
        tau = frac * base_lp.fun
        lp = linprog(cost, A_ub=-rows, b_ub=np.full(len(active), -tau), A_eq=s[None], b_eq=[-1.0],
                     bounds=(0, None), method="highs")
        if lp.status == 0:
            break
    if lp is None or lp.status != 0:
        raise CheckFailure("no bump keeps both flat axis points strictly convex")
    w = np.where(lp.x > 1e-12 * lp.x.max(), lp.x, 0.0)
    terms = [(int(a), int(b), float(wj)) for (a, b), wj in zip(cols, w) if wj > 0]
    P = _bump_transform(n, ell, i, K, terms)
    pscale = float(np.max(np.abs(P(tg))))
    terms = [(a, b, wj / pscale) for a, b, wj in terms]
    P = _bump_transform(n, ell, i, K, terms)
    h = _bump_expansion(n, ell, K, terms)
    phi_h = phi.inner(h)
    if not phi_h < 0:
        raise CheckFailure(f"(phi, h) = {phi_h:.3e} is not negative")
    h_min = float(np.min(h(tg)))
    L0h, L1h = _endpoint_rows([P], F)

    def feasible(e: float) -> bool:
        if np.min(F(tg) - e * P(tg)) <= 0:
            return False
        return is_convex_profile(counterexample_profile(B, P, e, i))

    if eps is None:
        if feasible(eps_max):
            lo = eps_max
        else:
            lo, hi = 0.0, eps_max
            for _ in range(EPS_BISECTIONS):
                mid = 0.5 * (lo + hi)
                lo, hi = (mid, hi) if feasible(mid) else (lo, mid)
            if lo == 0.0:
                raise CheckFailure("no eps in (0, eps_max] keeps A convex")
        eps_found = lo
        eps = EPS_SAFETY * lo
    else:
        if eps < 0:
            raise PreconditionError(f"eps must be non-negative, got {eps}")
        eps_found = None
        if eps > 0 and not feasible(eps):
            raise CheckFailure(f"eps = {eps} makes A non-convex or non-positive")

    A = counterexample_profile(B, P, eps, i)
    defect = convexity_defect(A)

    # section inequality by plain reduced-Radon comparisons
    s_haar, s_eq = _child_seeds(seed, 2)
    spectra = np.concatenate([haar_spectra(dims, check_samples, s_haar), equal_angle_sample(dims, s_eq)[2]])
    sec_a = radon_reduced_batch(A.power(i), spectra, dims)
    sec_b = radon_reduced_batch(F, spectra, dims)
    excess = float(np.max((sec_a - sec_b) / np.max(np.abs(sec_b))))

    spec = CounterexampleSpec(
        n=n, i=i, ell=ell, eps=float(eps), K=K, eps_max=float(eps_max),
        bump={"terms": [list(t) for t in terms], "omega": [float(omega.min()), float(omega.max())],
              "delta": delta, "endpoint_margin_target": float(tau / pscale),
              "constrained_endpoints": [("t=0", "t=1")[k] for k in active]},
        diagnostics={
            "phi_min": phi_min, "phi_h": float(phi_h), "h_min": h_min,
            "endpoint_margins": [float(L0h[0]), float(L1h[0])],
            "eps_bisection": eps_found, "convexity_defect": defect,
            "phi_tail_bound": phi.tail_bound(), "base_expansion_converged": base.converged,
            "check_section_max_excess": excess, "check_samples": int(len(spectra)),
        },
    )
    return A, spec


def verify_counterexample(A: Profile, dims: Dims, *, B: Profile | None = None, samples: int = 10_000,
                          seed=0, tol: float = SECTION_RTOL, csv_path=None) -> BpReport:
    """Sections of A against B on Haar and equal-angle subspaces, then both volumes.

    Verdict TRUE requires every sampled section of A to be at most that of B
    (relative tolerance ``tol``) and vol(A) - vol(B) > 5 times the combined
    volume error estimate.  A positive margin below that bound gives
    INCONCLUSIVE; anything else FALSE.
    """
    n, i, ell = dims.n, dims.i, dims.ell
    B = profile_of_ql_ball(4.0) if B is None else B
    s_haar, s_eq = _child_seeds(seed, 2)
    haar = haar_spectra(dims, samples, s_haar)
    _, _, eq = equal_angle_sample(dims, s_eq)
    spectra = np.concatenate([haar, eq])
    sec_a, err_a = _profile_sections(A, spectra, dims)
    sec_b, err_b = _profile_sections(B, spectra, dims)
    scale = float(np.max(np.abs(sec_b)))
    rel = (sec_a - sec_b) / scale
    smaller = rel <= tol
    fraction = float(np.mean(smaller))

    vol_a, verr_a = body_volume_profile(A, n, ell, full_output=True, rtol=1e-12)
    vol_b, verr_b = body_volume_profile(B, n, ell, full_output=True, rtol=1e-12)
    # floor the quadrature estimates at a few ulps of the volume
    err = max(verr_a, 64 * np.finfo(float).eps * vol_a) + max(verr_b, 64 * np.finfo(float).eps * vol_b)
    margin = vol_a - vol_b
    if fraction < 1.0:
        verdict, why = "FALSE", "some sampled sections of A exceed those of B"
    elif margin <= 0:
        verdict, why = "FALSE", "vol(A) does not exceed vol(B)"
    elif margin <= MARGIN_FACTOR * err:
        verdict, why = "INCONCLUSIVE", "volume margin within 5x its error estimate"
    else:
        verdict, why = "TRUE", "all sampled sections smaller and vol(A) > vol(B)"
    if csv_path is not None:
        write_section_csv(csv_path, spectra, sec_a, sec_b)
    return BpReport(
        n=n, i=i, ell=ell, mode="negative", samples=int(len(spectra)), fraction=fraction,
        vol_a=float(vol_a), vol_b=float(vol_b), verdict=verdict,
        seeds={"seed": _seed_repr(seed)},
        tolerances={"section_rtol": tol, "margin_factor": MARGIN_FACTOR},
        details={
            "diagnostic": why,
            "haar_samples": int(len(haar)), "equal_angle_samples": int(len(eq)),
            "section_max_excess_relative": float(rel.max()),
            "section_min_gap_relative": float(-rel.max()),
            "section_error": float(err_a + err_b),
            "volume_margin": float(margin), "volume_error": float(err),
            "margin_over_error": float(margin / err) if err > 0 else None,
        },
        environment={"lambda_nodes": LAMBDA_NODES, "frames_per_lambda": FRAMES_PER_LAMBDA},
    )


# ---------------------------------------------------------------- symmetrisation


@dataclass
class SymmetrizationReport:
    n: int
    i: int
    ell: int
    vol_b: float
    vol_b_stderr: float
    vol_b0: float
    vol_b0_stderr: float
    contraction_z: float
    section_z: list
    passed: bool
    seeds: dict
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return _dumps({**self.to_dict(), "version": __version__})


def symmetrization_experiment(B: StarBody, ell: int, i: int, *, samples: int = 4000, seed=0,
                              xi_samples: int = 8, rotations: int = 32, mc_samples: int = 200_000,
                              degree: int = 24) -> SymmetrizationReport:
    """Volume contraction of the K_ell-symmetrisation and the section transfer identity.

    For random equal-angle xi the orbit average over K_ell of
    vol_i(B cap gamma xi) (Monte Carlo over ``rotations`` rotations) is
    compared with vol_i(B0 cap xi).  All comparisons are z-scores against the
    Monte-Carlo errors involved; the experiment passes when the contraction
    is not violated by more than 4 standard errors and every |z| <= 4.
    """
    n = B.n
    dims = Dims(n, i, ell)
    s_sym, s_vol, s_xi = _child_seeds(seed, 3)
    b0 = kl_symmetrize(B, ell, i, samples=samples, seed=np.random.default_rng(s_sym))
    stderr0 = float(b0.meta["stderr"])
    tt = chebyshev_open_grid(256)
    rmin = float(np.min(b0(tt)))
    vol_b0 = body_volume_profile(b0, n, ell)
    vol_b0_se = vol_b0 * n * stderr0 / rmin
    if B.profile is not None and B.ell == ell:
        vol_b, vol_b_se = body_volume_profile(B.profile, n, ell), 0.0
    else:
        vol_b, vol_b_se = body_volume_mc(B, mc_samples, seed=np.random.default_rng(s_vol))
    # the floor stands in for quadrature and interpolation error when the
    # Monte-Carlo errors vanish (K_ell-invariant B)
    sig = math.hypot(vol_b_se, vol_b0_se, FLOOR_RTOL * vol_b)
    gap = vol_b - vol_b0
    contraction_z = gap / sig

    xi_seeds = _child_seeds(s_xi, xi_samples)
    zs, rows = [], []
    for ss in xi_seeds:
        rng = np.random.default_rng(ss)
        lam = float(rng.uniform(0.05, 0.95)) if i <= n - ell else 1.0
        frame = equal_angle_frame(dims, lam, rng)
        vals, qerr = [], 0.0
        for _ in range(rotations):
            g = KlRotation.random(n, ell, rng)
            res = radon_direct(lambda th: B(th) ** i, apply_kl_rotation(frame, g),
                               mode="quadrature", degree=degree)
            vals.append(res.value / i)
            qerr = max(qerr, res.error / i)
        vals = np.array(vals)
        orbit, orbit_se = float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(rotations))
        sec0 = float(radon_reduced_batch(b0.power(i), canonical_lambdas(frame, ell)[None], dims)[0] / i)
        sec0_se = sec0 * i * stderr0 / rmin
        s = math.hypot(orbit_se, sec0_se, qerr, FLOOR_RTOL * abs(sec0))
        z = (orbit - sec0) / s
        zs.append(float(z))
        rows.append({"lambda": lam, "orbit_mean": orbit, "orbit_se": orbit_se, "b0_section": sec0})
    passed = contraction_z >= -4.0 and all(abs(z) <= 4.0 for z in zs)
    return SymmetrizationReport(
        n=n, i=i, ell=ell, vol_b=float(vol_b), vol_b_stderr=float(vol_b_se), vol_b0=float(vol_b0),
        vol_b0_stderr=float(vol_b0_se), contraction_z=float(contraction_z), section_z=zs,
        passed=bool(passed), seeds={"seed": _seed_repr(seed)},
        details={"sections": rows, "samples": samples, "rotations": rotations, "stderr_root": stderr0},
    )
