"""Monte Carlo estimation of Riesz alpha-capacity for compact sets in R^d.

Hitting locations of isotropic alpha-stable paths launched from infinity
are simulated with the Walk-In-and-Out-of-Balls method (Walk-On-Spheres at
alpha=2); the equilibrium energy integral is then estimated with a
heavy-tail-robust split estimator that also detects the zero-capacity case,
with normal-theory confidence intervals.
"""

__version__ = "0.1.0"

from .ball_kernels import (BallGeometry, ball_capacity, hit_ball_probability,
                           hit_ball_probability_series,
                           regularized_incomplete_beta)
from .estimator import (CapacityEstimate, EnergyEstimate, EstimatorConfig,
                        estimate_capacity, estimate_energy)
from .geometry import (Ball, Box, Cylinder, Union, ball_same_volume,
                       bounding_radius, distance, is_hit, load_shape, volume)
from .rng import RngStream, derive_seed
from .sampling import (StableStepParams, sample_beta, sample_equilibrium_ball,
                       sample_isotropic_stable_step, sample_positive_stable,
                       sample_uniform_sphere)
from .walkers import (HitSet, WalkConfig, WalkOutcome,
                      capacity_from_hit_fraction, collect_hits, run_simple_stable_walk,
                      run_wiob, run_wos)

__all__ = [
    "__version__",
    "BallGeometry", "ball_capacity", "hit_ball_probability",
    "hit_ball_probability_series", "regularized_incomplete_beta",
    "CapacityEstimate", "EnergyEstimate", "EstimatorConfig",
    "estimate_capacity", "estimate_energy",
    "Ball", "Box", "Cylinder", "Union", "ball_same_volume", "bounding_radius",
    "distance", "is_hit", "load_shape", "volume",
    "RngStream", "derive_seed",
    "StableStepParams", "sample_beta", "sample_equilibrium_ball",
    "sample_isotropic_stable_step", "sample_positive_stable",
    "sample_uniform_sphere",
    "HitSet", "WalkConfig", "WalkOutcome", "capacity_from_hit_fraction",
    "collect_hits", "run_simple_stable_walk", "run_wiob", "run_wos",
]
