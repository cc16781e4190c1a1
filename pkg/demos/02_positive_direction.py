# coding: utf-8

# # Smaller sections, smaller volume
#
# When i - ell is 1 or 2 and A is convex, comparing the i-dimensional central
# sections of two K_ell-symmetric bodies also compares their volumes.  The
# mechanism is an Abel-type inversion whose solution g stays non-negative for
# convex profiles.  Here we look at g and then run a batch of random instances.

import numpy as np

from kltomo import AbelParams, Dims, bp_positive_check, polynomial_profile, positive_property_suite, profile_of_ql_ball, solve_g
from kltomo.experiments import tight_comparison_scale

# g for a few (q, ell)-balls, all convex for q >= 1.

params = AbelParams(7, 3, 2)
for q in (2.0, 3.0, 4.0, 6.0):
    g = solve_g(profile_of_ql_ball(q), params)
    print(f"q = {q}: min g / max |g| = {g.min / g.max_abs:+.3e}")

# A non-convex profile, for contrast, produces a clearly negative g.

g = solve_g(polynomial_profile([1.0, 5.0]), AbelParams(6, 2, 1))
print(f"non-convex control: min g / max |g| = {g.min / g.max_abs:+.3e}")

# Compare the q = 4 ball with the Euclidean ball, scaled so that every section
# of the ball is at least as large as the matching section of A.

dims = Dims(6, 3, 2)
A = profile_of_ql_ball(4.0)
ball = polynomial_profile([1.0])
B = ball.scaled(tight_comparison_scale(A, ball, dims))
rep = bp_positive_check(A, B, dims, mode="positive-b")
print(f"verdict {rep.verdict}: vol A = {rep.vol_a:.6f} <= vol B = {rep.vol_b:.6f}")

# Finally a randomized batch over both positive modes.

res = positive_property_suite(count=40, seed=0)
print(f"{res['count']} instances, {res['violations']} violations, {res['confirmed']} confirmed")
