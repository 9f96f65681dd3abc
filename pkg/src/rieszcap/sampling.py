"""Exact random-variate generation for stable-path simulation.

All samplers are pure functions of (parameters, stream): they draw from a
caller-owned :class:`~rieszcap.rng.RngStream` and have no other state, so
concurrent use is safe as long as each caller owns its stream.

Every draw is built from uniforms by inverse-CDF or exact transforms with a
fixed uniform budget per variate:

* normal              -- ``ndtri(u)``
* Beta(a, b)          -- ``betaincinv(a, b, u)``
* positive stable     -- Chambers--Mallows--Stuck transform of (theta, W)
* uniform sphere      -- normalized Gaussian vector
* equilibrium ball    -- sqrt(B) * uniform sphere, B ~ Beta(d/2, 1 - alpha/2)

The positive-stable scale follows the S(index, 1, scale, 0; 1) convention:
for 0 < index < 1,  E exp(-lam S) = exp(-(scale*lam)^index / cos(pi*index/2)),
so index = 1/2, scale = c is the Levy distribution with scale c.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaincinv, ndtri

from .rng import RngStream

__all__ = [
    "StableStepParams",
    "sample_uniform_sphere",
    "sample_beta",
    "sample_positive_stable",
    "sample_isotropic_stable_step",
    "sample_equilibrium_ball",
    "subordinator_scale",
]


@dataclass(frozen=True)
class StableStepParams:
    """Parameters of one isotropic alpha-stable increment in R^d."""

    alpha: float
    gamma: float
    d: int

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must be in (0, 2], got {self.alpha}")
        if self.gamma <= 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.d < 2:
            raise ValueError(f"d must be >= 2, got {self.d}")


# ---------------------------------------------------------------------------
# pure transforms (uniforms in, variates out); shared with the batch walkers
# ---------------------------------------------------------------------------

def sphere_from_normals(z: np.ndarray) -> np.ndarray:
    """Normalize rows of a Gaussian sample onto the unit sphere."""
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def positive_stable_from_uniforms(index: float, u_theta, u_exp):
    """CMS transform: one-sided stable with E exp(-lam S) = exp(-lam^index).

    theta is uniform on (-pi/2, pi/2) and W is unit-mean exponential.
    """
    b = index
    theta = np.pi * (np.asarray(u_theta) - 0.5)
    w = -np.log(np.asarray(u_exp))
    a = b * (theta + np.pi / 2)
    return (np.sin(a) / np.cos(theta) ** (1.0 / b)) * (
        np.cos(theta - a) / w
    ) ** ((1.0 - b) / b)


def positive_stable_unit_factor(index: float) -> float:
    """Multiplier converting the unit-Laplace transform to unit S(.;1) scale."""
    return 1.0 / np.cos(np.pi * index / 2.0) ** (1.0 / index)


def subordinator_scale(alpha: float, gamma: float) -> float:
    """Scale of the (alpha/2)-stable subordinator giving step scale gamma.

    With S ~ S(alpha/2, 1, s, 0; 1) and Y = sqrt(S) Z, the characteristic
    function of Y is exp(-gamma^alpha |u|^alpha) exactly when
    s = 2 gamma^2 cos(pi alpha / 4)^(2/alpha).
    """
    return 2.0 * gamma**2 * np.cos(np.pi * alpha / 4.0) ** (2.0 / alpha)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def sample_uniform_sphere(d: int, rng: RngStream, size: int | None = None):
    """Uniform point(s) on the unit sphere in R^d."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    n = 1 if size is None else int(size)
    z = ndtri(rng.uniform(n * d)).reshape(n, d)
    y = sphere_from_normals(z)
    return y[0] if size is None else y


def sample_beta(a: float, b: float, rng: RngStream, size: int | None = None):
    """Beta(a, b) variates via the inverse regularized incomplete beta."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"Beta parameters must be positive, got a={a}, b={b}")
    return betaincinv(a, b, rng.uniform(size))


def sample_positive_stable(index: float, scale: float, rng: RngStream,
                           size: int | None = None):
    """Totally skewed positive stable variate(s), zero shift.

    Scale convention S(index, 1, scale, 0; 1):
    E exp(-lam S) = exp(-(scale*lam)^index / cos(pi*index/2)).
    """
    if not 0.0 < index < 1.0:
        raise ValueError(f"stable index must be in (0, 1), got {index}")
    if scale <= 0.0:
        raise ValueError(f"scale must be positive, got {scale}")
    s0 = positive_stable_from_uniforms(index, rng.uniform(size), rng.uniform(size))
    return scale * positive_stable_unit_factor(index) * s0


def sample_isotropic_stable_step(params: StableStepParams, rng: RngStream,
                                 size: int | None = None):
    """Isotropic stable step(s) with char. function exp(-gamma^a |u|^a).

    alpha = 2 is the Gaussian case with i.i.d. N(0, 2 gamma^2) components;
    alpha < 2 subordinates a Gaussian vector by a positive (alpha/2)-stable.
    """
    n = 1 if size is None else int(size)
    d = params.d
    if params.alpha == 2.0:
        y = np.sqrt(2.0) * params.gamma * ndtri(rng.uniform(n * d)).reshape(n, d)
        return y[0] if size is None else y
    s = sample_positive_stable(
        params.alpha / 2.0, subordinator_scale(params.alpha, params.gamma), rng, n
    )
    z = ndtri(rng.uniform(n * d)).reshape(n, d)
    y = np.sqrt(s)[:, None] * z
    return y[0] if size is None else y


def sample_equilibrium_ball(alpha: float, d: int, rng: RngStream,
                            size: int | None = None):
    """Point(s) from the equilibrium distribution of the closed unit ball.

    For alpha < 2 the radial density is proportional to
    r^(d-1) (1 - r^2)^(-alpha/2), realized as sqrt(B) * uniform sphere with
    B ~ Beta(d/2, 1 - alpha/2).  At alpha = 2 the measure degenerates to the
    uniform surface measure.
    """
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must be in (0, 2], got {alpha}")
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if alpha == 2.0:
        return sample_uniform_sphere(d, rng, size)
    n = 1 if size is None else int(size)
    b = betaincinv(d / 2.0, 1.0 - alpha / 2.0, rng.uniform(n))
    z = ndtri(rng.uniform(n * d)).reshape(n, d)
    y = np.sqrt(b)[:, None] * sphere_from_normals(z)
    return y[0] if size is None else y
