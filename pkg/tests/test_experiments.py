import csv
import json
import math

import numpy as np
import pytest

from kltomo import (
    BpReport,
    CheckFailure,
    CounterexampleSpec,
    Dims,
    KlRotation,
    PreconditionError,
    body_volume_profile,
    bp_positive_check,
    construct_counterexample,
    is_convex_profile,
    perturbed_body,
    polynomial_profile,
    positive_property_suite,
    profile_of_ql_ball,
    ql_ball,
    symmetrization_experiment,
    verify_counterexample,
)
from kltomo.experiments import (
    counterexample_profile,
    equal_angle_sample,
    random_positive_instance,
    spawn_rngs,
    tight_comparison_scale,
    write_section_csv,
)

DIMS_641 = Dims(6, 4, 1)


@pytest.fixture(scope="module")
def counterexample_641():
    return construct_counterexample(DIMS_641)


def test_spawn_rngs_are_reproducible():
    a = [r.random() for r in spawn_rngs(3, 4)]
    b = [r.random() for r in spawn_rngs(3, 4)]
    assert a == b and len(set(a)) == 4


def test_equal_angle_sample_spectra():
    lams, frames, spectra = equal_angle_sample(Dims(7, 3, 2), 0, nodes=5, frames=2)
    assert len(frames) == 10
    np.testing.assert_allclose(spectra, np.repeat(lams[:, None], 2, axis=1), atol=1e-10)


# ---------------------------------------------------------------- positive direction


def test_identical_bodies_confirmed():
    B = profile_of_ql_ball(4.0)
    rep = bp_positive_check(B, B, Dims(6, 3, 2), mode="positive-b")
    assert rep.fraction == 1.0
    assert rep.verdict == "CONFIRMED"
    assert rep.vol_a == rep.vol_b


def test_scaled_body_volume_ratio():
    B = profile_of_ql_ball(4.0)
    rep = bp_positive_check(B.scaled(0.9), B, Dims(6, 2, 3), mode="positive-a")
    assert rep.verdict == "CONFIRMED"
    assert rep.vol_a / rep.vol_b == pytest.approx(0.9**6, rel=1e-10)


def test_q4_against_tightly_scaled_ball_mode_b():
    dims = Dims(6, 3, 2)
    A = profile_of_ql_ball(4.0)
    ball = polynomial_profile([1.0])
    B = ball.scaled(tight_comparison_scale(A, ball, dims))
    rep = bp_positive_check(A, B, dims, mode="positive-b")
    assert rep.fraction == 1.0
    assert rep.verdict == "CONFIRMED"
    d = rep.details
    assert d["g_min_relative"] >= -1e-8
    assert rep.vol_a * (1 - 1e-10) <= d["mixed_volume"] <= d["holder_bound"] * (1 + 1e-10)


def test_larger_body_fails_hypothesis():
    B = profile_of_ql_ball(4.0)
    rep = bp_positive_check(B.scaled(1.1), B, Dims(6, 2, 3), mode="positive-a")
    assert rep.verdict == "HYPOTHESIS_NOT_MET"
    assert rep.fraction == 0.0


def test_non_invariant_comparison_body_mode_a():
    dims = Dims(5, 2, 2)
    rng = np.random.default_rng(4)
    M = rng.standard_normal((5, 5))
    Q = 0.3 * (M + M.T) / np.max(np.abs(np.linalg.eigvalsh(M + M.T)))
    B = perturbed_body(ql_ball(2.0, 5, 2), Q).scaled(1.5)
    A = profile_of_ql_ball(4.0)
    rep = bp_positive_check(A, B, dims, mode="positive-a", samples=66)
    assert not rep.details["b_invariant"]
    assert rep.verdict == "CONFIRMED"
    assert rep.details["radial_max_excess"] <= 0


@pytest.mark.parametrize(
    "mode, dims",
    [("positive-a", Dims(6, 4, 1)), ("positive-b", Dims(6, 4, 1)), ("positive-b", Dims(6, 5, 3)), ("other", Dims(6, 2, 3))],
)
def test_positive_mode_preconditions(mode, dims):
    with pytest.raises(PreconditionError):
        bp_positive_check(profile_of_ql_ball(2.0), profile_of_ql_ball(2.0), dims, mode=mode)


def test_mode_b_needs_convex_a():
    with pytest.raises(PreconditionError):
        bp_positive_check(profile_of_ql_ball(0.5), profile_of_ql_ball(2.0), Dims(6, 3, 2), mode="positive-b")


def test_random_instances_hold_hypothesis():
    rng = np.random.default_rng(0)
    for mode in ("positive-a", "positive-b", "positive-a", "positive-b"):
        A, B, dims = random_positive_instance(rng, mode)
        assert is_convex_profile(A)
        rep = bp_positive_check(A, B, dims, mode=mode, samples=66)
        assert rep.fraction == 1.0
        assert rep.verdict == "CONFIRMED"


def test_small_property_suite():
    res = positive_property_suite(count=12, seed=1)
    assert res["count"] == 12
    assert res["violations"] == 0
    assert res["confirmed"] + res["hypothesis_not_met"] == 12


# ---------------------------------------------------------------- negative direction


def test_counterexample_rejects_small_i():
    with pytest.raises(PreconditionError):
        construct_counterexample(Dims(6, 3, 1))
    with pytest.raises(PreconditionError):
        construct_counterexample(DIMS_641, eps_max=0.0)


def test_counterexample_eps_zero_is_b():
    A, spec = construct_counterexample(DIMS_641, eps=0.0)
    t = np.linspace(0, 1, 101)
    np.testing.assert_array_equal(A(t), profile_of_ql_ball(4.0)(t))
    assert spec.eps == 0.0


def test_counterexample_frozen_values(counterexample_641):
    A, spec = counterexample_641
    d = spec.diagnostics
    assert d["phi_min"] == pytest.approx(-0.396168, rel=1e-5)
    assert spec.eps == pytest.approx(0.0074456, rel=1e-4)
    assert d["phi_h"] < 0
    assert d["h_min"] >= -1e-10
    assert d["convexity_defect"] >= -1e-10
    assert d["check_section_max_excess"] <= 1e-8
    assert spec.bump["omega"][0] == pytest.approx(0.673, abs=1e-3)
    assert is_convex_profile(A)


def test_counterexample_rebuilds_from_spec(counterexample_641):
    A, spec = counterexample_641
    again = counterexample_profile(profile_of_ql_ball(4.0), spec.perturbation(), spec.eps, spec.i)
    t = np.linspace(0, 1, 257)
    np.testing.assert_allclose(again(t), A(t), rtol=1e-14)
    data = json.loads(spec.to_json())
    assert data["n"] == 6 and data["K"] == 48


def test_counterexample_verdict_true(counterexample_641):
    A, _ = counterexample_641
    rep = verify_counterexample(A, DIMS_641, samples=2000, seed=3)
    assert rep.verdict == "TRUE"
    assert rep.fraction == 1.0
    d = rep.details
    assert d["volume_margin"] == pytest.approx(1.5449e-4, rel=1e-3)
    assert d["volume_margin"] > 5 * d["volume_error"]


def test_verify_identical_bodies_false():
    B = profile_of_ql_ball(4.0)
    rep = verify_counterexample(B, DIMS_641, samples=200)
    assert rep.verdict == "FALSE"
    assert rep.vol_a == rep.vol_b


def test_verify_scaled_body_false():
    A = profile_of_ql_ball(4.0).scaled(1.5)
    rep = verify_counterexample(A, DIMS_641, samples=200)
    assert rep.verdict == "FALSE"
    assert rep.fraction == 0.0
    assert "exceed" in rep.details["diagnostic"]


def test_verify_writes_section_csv(tmp_path, counterexample_641):
    A, _ = counterexample_641
    path = tmp_path / "sections.csv"
    rep = verify_counterexample(A, DIMS_641, samples=100, csv_path=path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["lambda1", "volA", "volB"]
    assert len(rows) == rep.samples + 1
    assert all(float(r[1]) <= float(r[2]) * (1 + 1e-8) for r in rows[1:])


def test_verify_is_deterministic(counterexample_641):
    A, _ = counterexample_641
    a = verify_counterexample(A, DIMS_641, samples=300, seed=11).to_json()
    b = verify_counterexample(A, DIMS_641, samples=300, seed=11).to_json()
    assert a == b


# ---------------------------------------------------------------- symmetrisation


def test_symmetrization_invariant_body():
    B = ql_ball(4.0, 5, 2)
    rep = symmetrization_experiment(B, 2, 3, xi_samples=3, rotations=8)
    assert rep.passed
    assert rep.vol_b0 == pytest.approx(rep.vol_b, rel=1e-9)
    assert all(abs(z) < 0.1 for z in rep.section_z)
    for row in rep.details["sections"]:
        assert row["orbit_mean"] == pytest.approx(row["b0_section"], rel=1e-7)


def perturbed_fixture():
    Q = np.zeros((5, 5))
    Q[0, 0], Q[4, 4], Q[0, 4] = 0.5, -0.3, 0.2
    Q[4, 0] = 0.2
    Q[1, 3] = Q[3, 1] = 0.25
    return perturbed_body(ql_ball(2.0, 5, 2), Q)


def test_symmetrization_perturbed_body_contracts():
    rep = symmetrization_experiment(perturbed_fixture(), 2, 3, xi_samples=4, rotations=32)
    assert rep.passed
    assert rep.contraction_z > 3
    assert rep.vol_b0 < rep.vol_b


def test_symmetrization_rotated_body_agrees():
    B = perturbed_fixture()
    g = KlRotation.random(5, 2, 7).matrix()
    a = symmetrization_experiment(B, 2, 3, xi_samples=2, rotations=16, seed=5)
    b = symmetrization_experiment(B.rotated(g), 2, 3, xi_samples=2, rotations=16, seed=5)
    # orbit averages differ only by Monte-Carlo noise
    se = math.hypot(a.vol_b0_stderr, b.vol_b0_stderr)
    assert abs(a.vol_b0 - b.vol_b0) <= 4 * se
    assert abs(a.vol_b - b.vol_b) <= 4 * math.hypot(a.vol_b_stderr, b.vol_b_stderr)
    assert symmetrization_experiment(B, 2, 3, xi_samples=2, rotations=16, seed=5).to_json() == a.to_json()


# ---------------------------------------------------------------- reports


def test_bp_report_validation_and_json(tmp_path):
    kw = dict(n=6, i=4, ell=1, mode="negative", samples=1, vol_a=1.0, vol_b=1.0, verdict="TRUE",
              seeds={"seed": 0}, tolerances={})
    with pytest.raises(ValueError):
        BpReport(fraction=1.5, **kw)
    with pytest.raises(ValueError):
        BpReport(fraction=1.0, **{**kw, "vol_a": 0.0})
    rep = BpReport(fraction=1.0, details={"x": np.float64(2.5), "k": np.int64(3)}, **kw)
    path = tmp_path / "r.json"
    rep.save_json(path)
    data = json.loads(path.read_text())
    assert data["environment"]["version"]
    assert data["details"] == {"k": 3, "x": 2.5}
    assert rep.dims == Dims(6, 4, 1)


def test_counterexample_spec_validation():
    with pytest.raises(ValueError):
        CounterexampleSpec(6, 4, 1, eps=-1.0, K=48)


def test_write_section_csv(tmp_path):
    path = tmp_path / "s.csv"
    write_section_csv(path, [[0.5, 0.2], [0.1, 0.0]], [1.0, 2.0], [1.5, 2.5])
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["lambda1", "lambda2", "volA", "volB"]
    assert [float(x) for x in rows[2]] == [0.1, 0.0, 2.0, 2.5]


def test_counterexample_volume_exceeds_ball(counterexample_641):
    A, _ = counterexample_641
    assert body_volume_profile(A, 6, 1) > body_volume_profile(profile_of_ql_ball(4.0), 6, 1)


def test_check_failure_is_runtime_error():
    assert issubclass(CheckFailure, RuntimeError)
