"""Exact uniform sampling from convex bodies with the proximal sampler.

The restricted Gaussian step is implemented by rejection sampling on top of a
projection oracle, a separation oracle (through an ellipsoid-method solve), or
a membership oracle (the In-and-Out baseline).
"""

from .bodies import Ball, Box, ConvexBody, Ellipsoid, GeometrySummary, Polytope, load_body, validate_geometry
from .cutting_plane import CuttingPlaneResult, EllipsoidState, ellipsoid_step, minimize_quadratic
from .errors import (
    A1Violation,
    BudgetExceeded,
    CapabilityError,
    ConvexSamplerError,
    InAndOutFailure,
    InvalidConfig,
    RejectionBudgetExceeded,
)
from .rgo import (
    PotentialBundle,
    RgoOutcome,
    potentials,
    radial_mode,
    rgo_inandout,
    rgo_projection,
    rgo_separation,
    rgo_separation_many,
    sample_proposal_nu,
    sample_radial,
)
from .sampler import (
    ChainState,
    SamplerConfig,
    SamplerReport,
    asf_step,
    ball_walk_step,
    default_eta,
    default_iterations,
    hit_and_run_step,
    run_chain,
    run_chains,
)

__version__ = "0.1.0"
