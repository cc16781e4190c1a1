import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import IntegrationWarning, quad
from scipy.special import gamma

from kltomo import (
    AbelParams,
    PreconditionError,
    abel_duality,
    i_minus,
    i_plus,
    is_convex_profile,
    norm_sum_profile,
    polynomial_profile,
    profile_of_ql_ball,
    radon_equal_angle,
    rl_integral,
    solve_g,
)
from kltomo.grassmann import Dims
from kltomo.quadrature import sphere_area

from conftest import admissible_abel_dims, positive_polynomial


def test_params_preconditions():
    with pytest.raises(PreconditionError):
        AbelParams(6, 1, 1)
    with pytest.raises(PreconditionError):
        AbelParams(6, 5, 2)
    p = AbelParams(6, 4, 2)
    assert p.alpha == 1.0
    assert p.c1 == pytest.approx(2 * math.pi**2)


@pytest.mark.parametrize("n, i, ell", [(5, 3, 1), (6, 4, 2), (8, 5, 3)])
def test_i_plus_mass(n, i, ell):
    lam = np.array([0.0, 0.2, 0.9, 1.0])
    np.testing.assert_allclose(i_plus(lambda t: np.ones_like(t), lam, AbelParams(n, i, ell)),
                               sphere_area(i - 1), rtol=1e-12)


@pytest.mark.parametrize("n", [3, 4, 7])
def test_i_plus_linear(n):
    lam = np.linspace(0, 1, 9)
    np.testing.assert_allclose(i_plus(lambda t: t, lam, AbelParams(n, 2, 1)), math.pi * lam, atol=1e-13)


def test_i_plus_is_equal_angle_radon():
    f0 = np.polynomial.Polynomial([0.2, -1.0, 3.0])
    p = AbelParams(7, 4, 2)
    for lam in (0.1, 0.5, 0.95):
        assert i_plus(f0, lam, p) == pytest.approx(radon_equal_angle(f0, lam, Dims(7, 4, 2)).value, rel=1e-13)


def test_i_plus_rejects_lambda_outside():
    with pytest.raises(PreconditionError):
        i_plus(lambda t: t, 1.5, AbelParams(5, 2, 1))


@pytest.mark.parametrize("t", [0.05, 0.3, 0.77])
def test_i_minus_logarithm(t):
    val = i_minus(lambda lam: np.ones_like(lam), t, AbelParams(6, 4, 2))
    assert val == pytest.approx(2 * math.pi**2 * math.log(1 / t), rel=1e-10)


def test_i_minus_positive_kernel():
    psi = lambda lam: np.where(lam >= 0.9, 1.0, 0.0)  # noqa: E731
    assert i_minus(psi, 0.5, AbelParams(7, 4, 2)) > 0
    assert i_minus(psi, 0.5, AbelParams(5, 2, 1)) > 0


def test_i_minus_domain():
    with pytest.raises(PreconditionError):
        i_minus(lambda lam: lam, 1.0, AbelParams(6, 4, 2))


def test_rl_integral_alpha_one():
    for t in (0.0, 0.25, 0.9):
        assert rl_integral(lambda x: 1.0, t, 1.0) == pytest.approx(1 - t, rel=1e-13)


def test_rl_integral_half_order():
    assert rl_integral(lambda x: 1.0, 0.64, 0.5) == pytest.approx(1.2 / math.sqrt(math.pi), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(t=st.floats(0.0, 0.99), alpha=st.floats(0.3, 3.0), k=st.integers(0, 3))
def test_rl_integral_monomials(t, alpha, k):
    # I^alpha (1-x)^k = Gamma(k+1)/Gamma(k+1+alpha) (1-t)^{k+alpha}
    val = rl_integral(lambda x: (1 - x) ** k, t, alpha)
    exact = gamma(k + 1) / gamma(k + 1 + alpha) * (1 - t) ** (k + alpha)
    assert val == pytest.approx(exact, rel=1e-9, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), t=st.floats(0.0, 0.95), alpha=st.sampled_from([0.5, 1.0, 1.5]))
def test_rl_integral_monotone(seed, t, alpha):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0, 1, 4)
    g = np.polynomial.Polynomial(c)
    assert rl_integral(g, t, alpha) >= 0


def test_rl_integral_domain():
    with pytest.raises(PreconditionError):
        rl_integral(lambda x: 1.0, 0.5, 0.0)
    with pytest.raises(PreconditionError):
        rl_integral(lambda x: 1.0, 1.0, 0.5)


@pytest.mark.parametrize("dims", admissible_abel_dims(8), ids=str)
def test_abel_duality(dims):
    rng = np.random.default_rng(dims.n * 100 + dims.i * 10 + dims.ell)
    lhs, rhs = abel_duality(positive_polynomial(rng), positive_polynomial(rng), AbelParams(dims.n, dims.i, dims.ell))
    assert abs(lhs - rhs) <= 1e-8 * abs(lhs)


def rl_oracle(g, t, alpha, endpoint_power):
    # RL integral of g with g ~ (1-x)^endpoint_power handled by the weight
    # in s = 1 - x the weight is s^endpoint_power (1 - t - s)^{alpha-1}
    def fun(s):
        s = max(s, 1e-14)  # keep 1 - s away from the endpoint in floating point
        return float(g(np.array([1.0 - s]))[0]) * s ** (-endpoint_power)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(fun, 0.0, 1.0 - t, weight="alg", wvar=(endpoint_power, alpha - 1),
                      epsabs=0, epsrel=1e-12, limit=200)
    return val / gamma(alpha)


@pytest.mark.parametrize(
    "n, i, ell, q",
    [(6, 4, 2, 4.0), (6, 3, 2, 4.0), (5, 2, 1, 3.0), (7, 4, 3, 6.0), (4, 2, 1, 4.0), (3, 2, 1, 4.0), (8, 3, 1, 2.5)],
)
def test_solve_g_inverts_rl_equation(n, i, ell, q):
    p = AbelParams(n, i, ell)
    prof = profile_of_ql_ball(q)
    g = solve_g(prof, p)
    # g behaves like (1-t)^{(n-i)/2-1} near t = 1
    power = min(0.0, 0.5 * (n - i) - 1)
    for t in (0.1, 0.5, 0.9):
        lhs = (1 - t) ** (0.5 * (n - ell) - 1) * prof(t) ** (n - i)
        assert rl_oracle(g, t, p.alpha, power) == pytest.approx(lhs, rel=1e-8)


@pytest.mark.parametrize("n, ell", [(5, 1), (6, 2), (8, 3)])
def test_solve_g_ball_closed_form(n, ell):
    i = ell + 2
    g = solve_g(polynomial_profile([1.0]), AbelParams(n, i, ell))
    exact = 0.5 * (n - i) * (1 - g.t) ** (0.5 * (n - i) - 1)
    np.testing.assert_allclose(g.g, exact, rtol=1e-12)


def test_solve_g_q4_nonnegative():
    g = solve_g(profile_of_ql_ball(4.0), AbelParams(6, 4, 2))
    assert len(g.t) == 512
    assert g.min >= -1e-8 * g.max_abs
    assert g.is_nonnegative()


@pytest.mark.parametrize("q", [2.0, 3.0, 4.0, 6.0])
@pytest.mark.parametrize("n, i, ell", [(5, 2, 1), (5, 3, 1), (7, 3, 2), (7, 4, 2), (8, 5, 3)])
def test_convex_profiles_give_nonnegative_g(q, n, i, ell):
    assert solve_g(profile_of_ql_ball(q), AbelParams(n, i, ell)).is_nonnegative()


def test_random_convex_profiles_give_nonnegative_g():
    rng = np.random.default_rng(8)
    checked = 0
    while checked < 10:
        terms = [(rng.uniform(0.3, 1.0), q, rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4))
                 for q in rng.choice([2.0, 4.0, 6.0], 2)]
        prof = norm_sum_profile(terms)
        if not is_convex_profile(prof):
            continue
        n = int(rng.integers(4, 9))
        ell = int(rng.integers(1, n // 2))
        i = ell + int(rng.integers(1, 3))
        if i > n - ell:
            continue
        assert solve_g(prof, AbelParams(n, i, ell)).is_nonnegative(), (terms, n, i, ell)
        checked += 1


@pytest.mark.parametrize("i", [2, 3])
def test_negative_control_profile(i):
    g = solve_g(polynomial_profile([1.0, 5.0]), AbelParams(6, i, 1))
    assert g.min < -1e-3 * g.max_abs


def test_solve_g_unsupported_gap():
    with pytest.raises(PreconditionError):
        solve_g(profile_of_ql_ball(4.0), AbelParams(8, 4, 1))


def test_g_csv(tmp_path):
    g = solve_g(profile_of_ql_ball(4.0), AbelParams(6, 4, 2), grid=64)
    path = tmp_path / "g.csv"
    g.save_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,g" and len(lines) == 65
