# coding: utf-8

# # Radon transforms of K_ell-symmetric functions
#
# A function on the sphere that only depends on t = |theta''|^2, the squared
# length of the last ell coordinates, is described by a one-variable profile.
# Its integral over the great subsphere of an i-dimensional subspace xi then
# depends on xi only through the squared cosines of the canonical angles
# between xi and R^ell.  This script checks that reduction numerically.

import numpy as np

from kltomo import Dims, canonical_lambdas, haar_sample_frame, radon_direct, radon_equal_angle, radon_reduced
from kltomo.quadrature import sphere_area

dims = Dims(7, 3, 2)
rng = np.random.default_rng(1)

# A polynomial profile and its lift to the sphere.

f0 = np.polynomial.Polynomial([1.0, 0.5, -0.3, 0.2])


def f(theta):
    return f0(np.sum(theta[:, -dims.ell:] ** 2, axis=1))


# Draw a few Haar-random subspaces and compare the direct sphere quadrature
# with the reduced formula that only sees the canonical spectrum.

for _ in range(5):
    frame = haar_sample_frame(dims.n, dims.i, rng)
    lam = canonical_lambdas(frame, dims.ell)
    direct = radon_direct(f, frame, mode="quadrature").value
    reduced = radon_reduced(f0, lam, dims).value
    print(f"lambda = {np.round(lam, 4)}  direct = {direct:.12f}  reduced = {reduced:.12f}")

# On equal-angle subspaces all cosines coincide and the transform becomes a
# one-dimensional Abel-type integral.

for lam in (0.1, 0.5, 0.9):
    print(f"equal angle lambda = {lam}: {radon_equal_angle(f0, lam, dims).value:.12f}")

# The constant function integrates to the area of the unit (i-1)-sphere.

one = radon_direct(lambda th: np.ones(th.shape[0]), haar_sample_frame(dims.n, dims.i, rng), mode="quadrature")
print(f"R 1 = {one.value:.14f}, sigma_{dims.i - 1} = {sphere_area(dims.i - 1):.14f}")
