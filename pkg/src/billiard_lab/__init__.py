"""Numerical laboratory for smooth strictly convex billiard tables."""

__version__ = "0.1.0"

from .geometry import (  # noqa: E402
    CurvatureJet,
    SupportDomain,
    boundary_point,
    build_domain,
    circle,
    curvature_jet,
    ellipse,
    integrate_boundary,
    support_fourier,
)
from .dynamics import BilliardState, billiard_map, generating_function, iterate, twist_check  # noqa: E402
from .orbits import PeriodicOrbit, SolverOptions, mls, solve_orbit, validate_rotation_number  # noqa: E402
from .spectrum import BetaSample, CausticEstimate, beta_derivative, beta_table, caustic_estimates, convexity_report  # noqa: E402
from .invariants import InvariantVector, compute_invariants  # noqa: E402
from .fitting import ExpansionFit, fit_expansion, ratio_consistency  # noqa: E402
