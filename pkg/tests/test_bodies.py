import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kltomo import (
    KlRotation,
    PreconditionError,
    body_from_profile,
    body_from_spec,
    body_volume_mc,
    body_volume_profile,
    convexity_defect,
    grid_profile,
    is_convex_profile,
    kl_symmetrize,
    load_profile_csv,
    monotone_r_check,
    norm_sum_profile,
    perturbed_body,
    polynomial_profile,
    profile_of_ql_ball,
    ql_ball,
    save_profile_csv,
)
from kltomo.quadrature import sphere_area


def random_profile(rng):
    c = rng.uniform(0.2, 1.0, 4)
    c[0] = 1.0 + rng.uniform(0.0, 1.0)
    return polynomial_profile(c)


def test_euclidean_profile_is_one():
    t = np.linspace(0, 1, 11)
    np.testing.assert_allclose(profile_of_ql_ball(2.0)(t), 1.0, atol=1e-15)


def test_q4_profile_values():
    p = profile_of_ql_ball(4.0)
    np.testing.assert_allclose(p([0.0, 1.0]), 1.0, atol=1e-15)
    r = p(0.5)
    assert r == pytest.approx(0.5 ** -0.25, rel=1e-14)
    x1 = r * math.sqrt(0.5)
    assert 2 * x1**4 == pytest.approx(1.0, rel=1e-13)


@pytest.mark.parametrize("q", [1.5, 3.0, 4.0, 7.0])
def test_ql_ball_boundary_points(q, rng):
    # r theta must satisfy |x'|^q + |x''|^q = 1
    B = ql_ball(q, 6, 2)
    theta = rng.standard_normal((200, 6))
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    x = B(theta)[:, None] * theta
    lhs = np.linalg.norm(x[:, :4], axis=1) ** q + np.linalg.norm(x[:, 4:], axis=1) ** q
    np.testing.assert_allclose(lhs, 1.0, rtol=1e-12)


def test_profile_derivative_matches_finite_difference():
    p = profile_of_ql_ball(4.0)
    t = np.linspace(0.05, 0.95, 19)
    h = 1e-6
    fd = (p(t + h) - p(t - h)) / (2 * h)
    np.testing.assert_allclose(p.derivative(t), fd, rtol=1e-7, atol=1e-9)
    assert p.has_exact_derivative


def test_norm_sum_reduces_to_ql_ball():
    t = np.linspace(0, 1, 33)
    np.testing.assert_allclose(norm_sum_profile([(1.0, 4.0, 1.0, 1.0)])(t), profile_of_ql_ball(4.0)(t), rtol=1e-14)


def test_grid_profile_interpolates_smooth_data():
    p = profile_of_ql_ball(4.0)
    g = p.to_grid(257)
    t = np.linspace(0, 1, 1001)
    np.testing.assert_allclose(g(t), p(t), rtol=1e-9)


def test_profile_validate_rejects_nonpositive():
    with pytest.raises(PreconditionError):
        polynomial_profile([1.0, -2.0]).validate()
    with pytest.raises(PreconditionError):
        profile_of_ql_ball(2.0).scaled(-1.0)


def test_unit_ball_volume_n6():
    assert body_volume_profile(polynomial_profile([1.0]), 6, 1) == pytest.approx(math.pi**3 / 6, rel=1e-12)


def test_scaled_ball_volume_n4():
    assert body_volume_profile(polynomial_profile([2.0]), 4, 2) == pytest.approx(8 * math.pi**2, rel=1e-12)


def test_unit_ball_mc_has_zero_variance():
    est, err = body_volume_mc(body_from_profile(polynomial_profile([1.0]), 5, 2), 10_000, seed=0)
    assert est == pytest.approx(8 * math.pi**2 / 15, rel=1e-14)
    assert err == pytest.approx(0.0, abs=1e-12)


def test_q4_volume_profile_against_mc():
    B = ql_ball(4.0, 6, 1)
    v = body_volume_profile(B.profile, 6, 1)
    est, err = body_volume_mc(B, 1_000_000, seed=1)
    assert abs(est - v) <= 3 * err


def test_mc_scaling_is_exact():
    B = ql_ball(4.0, 6, 1)
    a, _ = body_volume_mc(B, 20_000, seed=4)
    b, _ = body_volume_mc(B.scaled(2.0), 20_000, seed=4)
    assert b == pytest.approx(2.0**6 * a, rel=1e-14)


def test_mc_rejects_tiny_samples():
    with pytest.raises(PreconditionError):
        body_volume_mc(ql_ball(2.0, 3, 1), 10)


def test_profile_volume_matches_mc_for_random_polynomials():
    rng = np.random.default_rng(3)
    for k in range(20):
        p = random_profile(rng)
        v = body_volume_profile(p, 5, 2)
        est, err = body_volume_mc(body_from_profile(p, 5, 2), 200_000, seed=k)
        assert abs(est - v) <= 3 * err, k


@settings(max_examples=30, deadline=None)
@given(c=st.floats(0.1, 10.0), q=st.sampled_from([1.5, 2.0, 3.0, 4.0]), n=st.integers(3, 8))
def test_volume_scaling_law(c, q, n):
    p = profile_of_ql_ball(q)
    v = body_volume_profile(p, n, 1)
    assert body_volume_profile(p.scaled(c), n, 1) == pytest.approx(c**n * v, rel=1e-10)


@pytest.mark.parametrize("q", [1.5, 2.0, 3.0, 4.0, 6.0, 10.0])
def test_ql_balls_convex_for_q_at_least_one(q):
    p = profile_of_ql_ball(q)
    assert is_convex_profile(p)
    assert monotone_r_check(p)


def test_q_half_ball_not_convex():
    p = profile_of_ql_ball(0.5)
    assert not is_convex_profile(p)
    # a concrete violating vertex triple on the profile curve: the middle
    # point lies strictly inside the chord of its neighbours
    def point(t):
        r = p(t)
        return np.array([r * math.sqrt(1 - t), r * math.sqrt(t)])

    a, b, c = point(0.3), point(0.5), point(0.7)
    mid = 0.5 * (a + c)
    assert np.linalg.norm(b) < np.linalg.norm(mid)


def test_growing_profile_is_negative_control():
    p = polynomial_profile([1.0, 5.0])
    assert not is_convex_profile(p)
    assert not monotone_r_check(p)
    assert convexity_defect(p) < -1e-3


def test_constant_profile_monotone():
    assert monotone_r_check(polynomial_profile([1.0]))


@settings(max_examples=30, deadline=None)
@given(c=st.floats(0.01, 100.0), q=st.sampled_from([0.5, 0.8, 1.5, 2.0, 4.0]))
def test_convexity_scale_invariant(c, q):
    p = profile_of_ql_ball(q)
    assert is_convex_profile(p) == is_convex_profile(p.scaled(c))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_convex_implies_monotone_r(seed):
    rng = np.random.default_rng(seed)
    terms = [(rng.uniform(0.3, 1.0), q, rng.uniform(0.7, 1.3), rng.uniform(0.7, 1.3)) for q in rng.choice([1.5, 2.0, 3.0, 4.0, 6.0], 2)]
    p = norm_sum_profile(terms)
    if is_convex_profile(p):
        assert monotone_r_check(p)


def test_symmetrize_invariant_body_recovers_profile():
    B = ql_ball(4.0, 6, 2)
    sym = kl_symmetrize(B, 2, 3, samples=500, seed=0)
    t = np.linspace(0, 1, 101)
    np.testing.assert_allclose(sym(t), B.profile(t), rtol=1e-9)
    assert sym.meta["stderr"] < 1e-12


def test_symmetrize_ellipsoid_contracts_volume():
    base = body_from_profile(polynomial_profile([1.0]), 4, 1)
    Q = np.zeros((4, 4))
    Q[0, 0] = 1.0 - 1e-12
    B = perturbed_body(base, Q, 0.5)
    theta = np.eye(4)
    np.testing.assert_allclose(B(theta), [math.sqrt(2), 1, 1, 1], rtol=1e-6)
    sym = kl_symmetrize(B, 1, 2, samples=20_000, seed=1)
    v0 = body_volume_profile(sym, 4, 1, rtol=1e-6)
    v, err = body_volume_mc(B, 400_000, seed=2)
    assert v0 <= v + 3 * err


def test_symmetrization_contracts_random_perturbed_bodies():
    rng = np.random.default_rng(17)
    for k in range(20):
        n, ell = 5, 2
        base = ql_ball(rng.choice([2.0, 4.0]), n, ell)
        A = rng.standard_normal((n, n))
        Q = 0.4 * (A + A.T) / np.max(np.abs(np.linalg.eigvalsh(A + A.T)))
        B = perturbed_body(base, Q)
        sym = kl_symmetrize(B, ell, 3, samples=4000, seed=k)
        v0 = body_volume_profile(sym, n, ell, rtol=1e-6)
        v, err = body_volume_mc(B, 200_000, seed=100 + k)
        # orbit averaging error enters v0 through a power n/i of the root
        v0_err = n * v0 * sym.meta["stderr"] / sym(np.array([0.5]))[0]
        assert v0 <= v + 3 * math.hypot(err, v0_err), k


def test_rotated_invariant_body_has_same_profile():
    B = ql_ball(4.0, 5, 2)
    g = KlRotation.random(5, 2, 3).matrix()
    theta = np.random.default_rng(0).standard_normal((50, 5))
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    np.testing.assert_allclose(B.rotated(g)(theta), B(theta), rtol=1e-13)


def test_perturbed_body_preconditions():
    base = ql_ball(2.0, 3, 1)
    with pytest.raises(PreconditionError):
        perturbed_body(base, np.eye(3))
    with pytest.raises(PreconditionError):
        perturbed_body(base, np.arange(9.0).reshape(3, 3) / 100)


def test_body_from_spec_roundtrip(tmp_path):
    spec = {"kind": "perturbed", "base": {"kind": "ql_ball", "q": 4, "n": 4, "ell": 1},
            "Q": (0.1 * np.eye(4)).tolist(), "power": 1.0}
    B = body_from_spec(spec)
    theta = np.eye(4)
    np.testing.assert_allclose(B(theta), 1.1, rtol=1e-14)
    path = tmp_path / "p.csv"
    save_profile_csv(profile_of_ql_ball(4.0), path)
    C = body_from_spec({"kind": "profile", "n": 4, "ell": 1, "csv": str(path)})
    np.testing.assert_allclose(C(theta), 1.0, rtol=1e-12)
    with pytest.raises(PreconditionError):
        body_from_spec({"kind": "cube"})


def test_profile_csv_roundtrip(tmp_path):
    p = profile_of_ql_ball(3.0)
    path = tmp_path / "rho.csv"
    save_profile_csv(p, path)
    assert path.read_text().splitlines()[0] == "t,rho"
    q = load_profile_csv(path)
    t = np.linspace(0, 1, 77)
    np.testing.assert_allclose(q(t), p(t), rtol=1e-9)
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n0,1\n")
    with pytest.raises(PreconditionError):
        load_profile_csv(bad)


def test_grid_profile_from_arrays():
    t = np.linspace(0, 1, 50)
    p = grid_profile(t, 1 + t**2)
    assert p.kind == "grid"
    np.testing.assert_allclose(p([0.25, 0.75]), [1.0625, 1.5625], rtol=1e-6)


def test_sphere_area_values():
    assert sphere_area(1) == pytest.approx(2 * math.pi)
    assert sphere_area(2) == pytest.approx(4 * math.pi)
    assert sphere_area(5) == pytest.approx(math.pi**3)
