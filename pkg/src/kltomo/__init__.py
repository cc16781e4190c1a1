"""Radon transforms, cosine transforms and Busemann-Petty experiments for K_ell-symmetric bodies.

The coordinate split is R^n = R^{n-ell} + R^ell with R^ell spanned by the
last ``ell`` coordinates.  A K_ell-symmetric body is described by a profile
rho(t), t = |theta''|^2 the squared length of the R^ell component.
"""

from ._version import __version__
from .abel import AbelParams, GFunction, abel_duality, i_minus, i_plus, rl_integral, solve_g
from .bodies import (
    Profile,
    StarBody,
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
from .cosine import (
    HarmonicExpansion,
    InvariantBasis,
    MultiplierTable,
    build_multiplier_table,
    complement_spectrum,
    cosine_direct,
    cosine_transform,
    expand_invariant,
    intersection_body_test,
    invariant_basis,
    measure_convention,
    multiplier,
    verify_intertwining,
    verify_multipliers,
)
from .errors import CheckFailure, ConvergenceError, PreconditionError
from .experiments import (
    BpReport,
    CounterexampleSpec,
    bp_positive_check,
    construct_counterexample,
    positive_property_suite,
    symmetrization_experiment,
    verify_counterexample,
)
from .grassmann import (
    Dims,
    KlRotation,
    apply_kl_rotation,
    canonical_lambdas,
    equal_angle_frame,
    haar_sample_frame,
    orthocomplement_frame,
)
from .radon import (
    RadonResult,
    dual_radon_direct,
    radon_direct,
    radon_equal_angle,
    radon_reduced,
    radon_reduced_batch,
    section_volume,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
