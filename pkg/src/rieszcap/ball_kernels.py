"""Closed-form ball probabilities and exact samplers for stable motion.

Everything is reduced to the centered unit ball; shifted and scaled balls
are handled by the ``*_for_ball`` wrappers at the bottom.  Probabilities and
densities follow the classical first-passage results for the isotropic
alpha-stable process:

* probability of ever hitting the unit ball from outside: a regularized
  incomplete beta function of 1/|x|^2, plus a power series form with
  positive, strictly decreasing coefficients (so truncations are lower
  bounds);
* hitting location inside the ball: density proportional to
  (1-|y|^2)^(-a/2) |x-y|^(-d), sampled by rejection from the ball's
  equilibrium distribution;
* exit location from inside the ball: density proportional to
  (|y|^2-1)^(-a/2) |x-y|^(-d), sampled by rejection from the exact
  center-exit law Z/sqrt(B);
* Brownian (alpha=2) re-entry on the sphere: Poisson kernel, sampled by
  rejection from the uniform surface measure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, gammaln

from .rng import RngStream
from .sampling import sample_beta, sample_equilibrium_ball, sample_uniform_sphere

__all__ = [
    "BallGeometry",
    "RotationPlan",
    "regularized_incomplete_beta",
    "hit_ball_probability",
    "hit_ball_probability_series",
    "ball_capacity",
    "bgr_constant",
    "bgr_hit_density",
    "bgr_exit_density",
    "sample_hit_location_in_ball",
    "sample_exit_location_from_ball",
    "sample_brownian_reentry_sphere",
    "make_rotation_to_axis",
    "hit_probability_for_ball",
    "sample_hit_in_ball",
    "sample_exit_from_ball",
    "sample_reentry_on_sphere",
]


@dataclass(frozen=True)
class BallGeometry:
    """A probe ball with arbitrary center and radius."""

    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.radius <= 0.0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)


def regularized_incomplete_beta(u, a: float, b: float):
    """Regularized incomplete beta F(u; a, b), the Beta(a, b) CDF."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"parameters must be positive, got a={a}, b={b}")
    u = np.asarray(u, dtype=float)
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise ValueError("u must lie in [0, 1]")
    out = betainc(a, b, u)
    return float(out) if out.ndim == 0 else out


def _check_transient(alpha: float, d: int) -> bool:
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must be in (0, 2], got {alpha}")
    if d < 1:
        raise ValueError(f"d must be a positive integer, got {d}")
    return d > alpha


def hit_ball_probability(alpha: float, d: int, rho):
    """P(stable motion ever hits the unit ball | started at distance rho).

    Returns 1 in the recurrent regime (d <= alpha); otherwise
    F(1/rho^2; (d-alpha)/2, alpha/2).  ``rho`` may be an array.
    """
    transient = _check_transient(alpha, d)
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr < 1.0):
        raise ValueError("rho must be >= 1 (start point outside the ball)")
    if not transient:
        out = np.ones_like(rho_arr)
    else:
        out = betainc((d - alpha) / 2.0, alpha / 2.0, 1.0 / rho_arr**2)
    return float(out) if out.ndim == 0 else out


def hit_ball_probability_series(alpha: float, d: int, rho: float,
                                n_terms: int) -> float:
    """Truncated series for the transient hitting probability.

    sum_{j < n_terms} c_j rho^-(d-alpha+2j) with
    c_0 = Gamma(d/2) / (Gamma((d-alpha+2)/2) Gamma(alpha/2)) and
    c_j = c_{j-1} (2j-alpha)(d-alpha+2(j-1)) / (2j (d-alpha+2j)).

    All coefficients are positive and strictly decreasing for alpha < 2, so
    the value is nondecreasing in ``n_terms`` and is a lower bound of the
    exact beta-CDF probability.  Terms below 1e-16 of the partial sum are
    dropped (they cannot change the double-precision result).
    """
    if not _check_transient(alpha, d):
        raise ValueError(f"series requires the transient case d > alpha "
                         f"(got alpha={alpha}, d={d})")
    if rho <= 1.0:
        raise ValueError("series requires rho > 1")
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    c = np.exp(gammaln(d / 2.0) - gammaln((d - alpha + 2.0) / 2.0)
               - gammaln(alpha / 2.0))
    inv2 = rho ** -2.0
    term = c * rho ** -(d - alpha)
    total = term
    for j in range(1, n_terms):
        ratio = ((2.0 * j - alpha) * (d - alpha + 2.0 * (j - 1.0))
                 / (2.0 * j * (d - alpha + 2.0 * j)))
        term *= ratio * inv2
        if term <= 1e-16 * total:
            break
        total += term
    return total


def ball_capacity(alpha: float, d: int, radius: float = 1.0) -> float:
    """Exact Riesz alpha-capacity of a ball, r^(d-alpha) Gamma(d/2) /
    (Gamma(alpha/2) Gamma((d-alpha+2)/2))."""
    if not _check_transient(alpha, d):
        raise ValueError(f"capacity undefined in the recurrent case "
                         f"d <= alpha (got alpha={alpha}, d={d})")
    if radius <= 0.0:
        raise ValueError(f"radius must be positive, got {radius}")
    c0 = np.exp(gammaln(d / 2.0) - gammaln(alpha / 2.0)
                - gammaln((d - alpha + 2.0) / 2.0))
    return float(radius ** (d - alpha) * c0)


# ---------------------------------------------------------------------------
# first-passage densities (used directly by the quadrature oracles in tests)
# ---------------------------------------------------------------------------

def bgr_constant(alpha: float, d: int) -> float:
    """Normalizing constant pi^-(d/2+1) Gamma(d/2) sin(pi alpha / 2)."""
    return float(np.pi ** -(d / 2.0 + 1.0) * np.exp(gammaln(d / 2.0))
                 * np.sin(np.pi * alpha / 2.0))


def bgr_hit_density(alpha: float, d: int, x, y):
    """Density of the first hitting location in the unit ball, |y| < 1.

    Defective: it integrates to the hitting probability, not to 1.
    """
    x = np.asarray(x, dtype=float)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    nx2 = float(x @ x)
    ny2 = np.sum(y * y, axis=-1)
    dist = np.linalg.norm(y - x, axis=-1)
    out = (bgr_constant(alpha, d) * (nx2 - 1.0) ** (alpha / 2.0)
           * (1.0 - ny2) ** (-alpha / 2.0) * dist ** (-float(d)))
    return out if out.size > 1 else float(out[0])


def bgr_exit_density(alpha: float, d: int, x, y):
    """Density of the first exit location from the unit ball, |y| > 1."""
    x = np.asarray(x, dtype=float)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    nx2 = float(x @ x)
    ny2 = np.sum(y * y, axis=-1)
    dist = np.linalg.norm(y - x, axis=-1)
    out = (bgr_constant(alpha, d) * (1.0 - nx2) ** (alpha / 2.0)
           * (ny2 - 1.0) ** (-alpha / 2.0) * dist ** (-float(d)))
    return out if out.size > 1 else float(out[0])


# ---------------------------------------------------------------------------
# rejection samplers (unit ball)
# ---------------------------------------------------------------------------

def _rejection(n: int, propose, accept_prob, rng: RngStream,
               max_proposals: int, what: str) -> np.ndarray:
    """Vectorized rejection loop; proposals are drawn per pending slot."""
    first = propose(n)
    out = np.empty_like(first)
    pending = np.arange(n)
    y = first
    rounds = 0
    while True:
        acc = accept_prob(y)
        # the envelope bound must hold pointwise before any accept draw
        if np.any(acc > 1.0 + 1e-12):
            raise AssertionError(f"{what}: acceptance probability above 1")
        keep = rng.uniform(pending.size) < acc
        out[pending[keep]] = y[keep]
        pending = pending[~keep]
        if pending.size == 0:
            return out
        rounds += 1
        if rounds >= max_proposals:
            raise RuntimeError(
                f"{what}: no acceptance after {max_proposals} proposals; "
                f"start point is too close to the sphere for plain rejection")
        y = propose(pending.size)


def sample_hit_location_in_ball(alpha: float, d: int, start, rng: RngStream,
                                size: int | None = None,
                                max_proposals: int = 10**6):
    """First-hitting location(s) in the open unit ball from an outside start.

    Rejection sampling: proposals follow the equilibrium-shaped density
    (1-|y|^2)^(-alpha/2); a proposal y is accepted with probability
    ((|x|-1)/|x-y|)^d, which is at most 1 because |x-y| >= |x|-1.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError("alpha must be in (0, 2); use the Poisson-kernel "
                         "sampler for alpha = 2")
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    x = np.asarray(start, dtype=float)
    nx = np.linalg.norm(x)
    if nx <= 1.0:
        raise ValueError(f"start must be outside the unit ball, |x|={nx}")
    n = 1 if size is None else int(size)

    def propose(k):
        return np.atleast_2d(sample_equilibrium_ball(alpha, d, rng, k))

    def accept_prob(y):
        return ((nx - 1.0) / np.linalg.norm(y - x, axis=1)) ** d

    out = _rejection(n, propose, accept_prob, rng, max_proposals,
                     "hit-location sampler")
    return out[0] if size is None else out


def sample_exit_location_from_ball(alpha: float, d: int, start, rng: RngStream,
                                   size: int | None = None,
                                   max_proposals: int = 10**6):
    """First-exit location(s) from the unit ball, |output| > 1 a.s.

    From the center the exit law is exact: Z/sqrt(B) with Z uniform on the
    sphere and B ~ Beta(alpha/2, 1-alpha/2).  From an off-center start the
    exit density (|y|^2-1)^(-alpha/2) |x-y|^(-d) is sampled by rejection
    with the center law as proposal; acceptance ((1-|x|)|y|/|x-y|)^d <= 1
    since |x-y| >= |y| - |x| >= |y|(1-|x|) for |y| >= 1.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"exit law requires 0 < alpha < 2, got {alpha}")
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    x = np.asarray(start, dtype=float)
    nx = np.linalg.norm(x)
    if nx >= 1.0:
        raise ValueError(f"start must be inside the unit ball, |x|={nx}")
    n = 1 if size is None else int(size)

    def propose(k):
        b = np.atleast_1d(sample_beta(alpha / 2.0, 1.0 - alpha / 2.0, rng, k))
        z = np.atleast_2d(sample_uniform_sphere(d, rng, k))
        return z / np.sqrt(b)[:, None]

    if nx == 0.0:
        out = propose(n)
        return out[0] if size is None else out

    def accept_prob(y):
        ny = np.linalg.norm(y, axis=1)
        return ((1.0 - nx) * ny / np.linalg.norm(y - x, axis=1)) ** d

    out = _rejection(n, propose, accept_prob, rng, max_proposals,
                     "exit-location sampler")
    return out[0] if size is None else out


def sample_brownian_reentry_sphere(d: int, start, rng: RngStream,
                                   size: int | None = None,
                                   max_proposals: int = 10**6):
    """Brownian first-hitting location on the unit sphere from outside.

    The hitting density on the sphere is the Poisson kernel
    (|x|^2-1)/|x-y|^d; rejection from the uniform surface measure accepts
    with probability ((|x|-1)/|x-y|)^d.
    """
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    x = np.asarray(start, dtype=float)
    nx = np.linalg.norm(x)
    if nx <= 1.0:
        raise ValueError(f"start must be outside the unit ball, |x|={nx}")
    n = 1 if size is None else int(size)

    def propose(k):
        return np.atleast_2d(sample_uniform_sphere(d, rng, k))

    def accept_prob(y):
        return ((nx - 1.0) / np.linalg.norm(y - x, axis=1)) ** d

    out = _rejection(n, propose, accept_prob, rng, max_proposals,
                     "Poisson-kernel sampler")
    return out[0] if size is None else out


# ---------------------------------------------------------------------------
# Givens rotations onto the first axis
# ---------------------------------------------------------------------------

@dataclass
class RotationPlan:
    """Sequence of Givens rotations mapping a source vector to (|x|, 0, ..., 0).

    Construction and application are O(d): one rotation per zeroed
    component.
    """

    rotations: list = field(default_factory=list)  # (i, j, cos, sin) tuples

    def apply(self, v) -> np.ndarray:
        out = np.array(v, dtype=float)
        for i, j, c, s in self.rotations:
            vi, vj = out[i], out[j]
            out[i] = c * vi + s * vj
            out[j] = -s * vi + c * vj
        return out

    def apply_inverse(self, v) -> np.ndarray:
        out = np.array(v, dtype=float)
        for i, j, c, s in reversed(self.rotations):
            vi, vj = out[i], out[j]
            out[i] = c * vi - s * vj
            out[j] = s * vi + c * vj
        return out


def make_rotation_to_axis(x) -> RotationPlan:
    """Plan of Givens rotations taking x to (|x|, 0, ..., 0)."""
    v = np.array(x, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValueError("x must be a vector of dimension >= 2")
    if not np.any(v != 0.0):
        raise ValueError("cannot build a rotation for the zero vector")
    plan = RotationPlan()
    for j in range(v.size - 1, 0, -1):
        if v[j] == 0.0:
            continue
        a, b = v[j - 1], v[j]
        r = float(np.hypot(a, b))
        plan.rotations.append((j - 1, j, a / r, b / r))
        v[j - 1] = r
        v[j] = 0.0
    if v[0] < 0.0:
        # half-turn in the (0, 1) plane fixes the sign; component 1 is 0 here
        plan.rotations.append((0, 1, -1.0, 0.0))
    return plan


# ---------------------------------------------------------------------------
# shifted and scaled balls
# ---------------------------------------------------------------------------

def hit_probability_for_ball(alpha: float, d: int, ball: BallGeometry, x):
    """Hitting probability of an arbitrary ball from an exterior point."""
    rho = np.linalg.norm(np.asarray(x, float) - ball.center_array) / ball.radius
    return hit_ball_probability(alpha, d, rho)


def sample_hit_in_ball(alpha: float, d: int, ball: BallGeometry, x,
                       rng: RngStream, size: int | None = None):
    local = (np.asarray(x, float) - ball.center_array) / ball.radius
    y = sample_hit_location_in_ball(alpha, d, local, rng, size)
    return ball.center_array + ball.radius * y


def sample_exit_from_ball(alpha: float, d: int, ball: BallGeometry, x,
                          rng: RngStream, size: int | None = None):
    local = (np.asarray(x, float) - ball.center_array) / ball.radius
    y = sample_exit_location_from_ball(alpha, d, local, rng, size)
    return ball.center_array + ball.radius * y


def sample_reentry_on_sphere(d: int, ball: BallGeometry, x, rng: RngStream,
                             size: int | None = None):
    local = (np.asarray(x, float) - ball.center_array) / ball.radius
    y = sample_brownian_reentry_sphere(d, local, rng, size)
    return ball.center_array + ball.radius * y
