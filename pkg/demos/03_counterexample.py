# coding: utf-8

# # Smaller sections, larger volume
#
# For ell + 2 < i <= n - 1 the comparison fails.  Start from the (4, ell)-ball
# B, whose i-th cosine-transform density is negative somewhere.  Perturb
# the radial power of B by a bump paired against that negative part: no
# section grows, yet the volume does.

import numpy as np

from kltomo import Dims, construct_counterexample, intersection_body_test, profile_of_ql_ball, verify_counterexample

dims = Dims(6, 4, 1)

# The density of the 2-intersection body test for B is not non-negative.

res = intersection_body_test(profile_of_ql_ball(4.0), dims.n, dims.ell, dims.n - dims.i)
print(f"member: {res.is_member}, mu_min = {res.mu_min:.6f}, truncation error {res.truncation_error:.1e}")

# Build the perturbed body A.  The bump weights come from a small linear
# program that keeps A convex at both ends of the profile.

A, spec = construct_counterexample(dims)
print(f"eps = {spec.eps:.6g}, phi_min = {spec.diagnostics['phi_min']:.6f}, (phi, h) = {spec.diagnostics['phi_h']:.3e}")

# Check ten thousand random and equal-angle sections and the volume margin.

rep = verify_counterexample(A, dims, samples=10_000, seed=0)
d = rep.details
print(f"verdict {rep.verdict}: fraction of smaller sections {rep.fraction}")
print(f"vol A - vol B = {d['volume_margin']:.3e} against an error estimate of {d['volume_error']:.1e}")

t = np.linspace(0.0, 1.0, 6)
print("rho_A(t) / rho_B(t):", np.round(A(t) / profile_of_ql_ball(4.0)(t), 6))
