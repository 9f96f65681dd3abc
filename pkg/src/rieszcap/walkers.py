"""Path generation: simple stable walk, Walk-On-Spheres, Walk-In-and-Out-of-Balls.

All three walkers share one batched engine.  Paths are mutually independent
and path index ``i`` always consumes RNG stream ``i`` of the run seed, so a
path's trajectory is a pure function of (seed, path index): results are
bit-identical for any batch size or worker count, and ``run_*`` on a single
:class:`~rieszcap.rng.RngStream` reproduces exactly what the batch driver
computes for that path index.

Loop structure (equivalent to the textbook step orderings of all three
algorithms): at the top of each iteration the current position is tested
for a hit, so launch points and re-entry points are tested before being
stepped from; after the advance, positions beyond the escape radius either
terminate (escape to infinity) or re-enter the launch ball through the
exact ball-hitting law.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import betaincinv, ndtri

from . import geometry
from .ball_kernels import hit_ball_probability
from .rng import RngLanes, RngStream
from .sampling import (positive_stable_from_uniforms,
                       positive_stable_unit_factor, sphere_from_normals,
                       subordinator_scale)

__all__ = [
    "WalkConfig", "WalkOutcome", "HitSet", "HitFractionEstimate",
    "launch_point", "escape_or_reenter",
    "run_simple_stable_walk", "run_wos", "run_wiob",
    "collect_hits", "capacity_from_hit_fraction",
]

_RUNNING, _HIT, _ESCAPED, _CAP = 0, 1, 2, 3
_KIND = {_HIT: "hit", _ESCAPED: "escaped", _CAP: "cap_exceeded"}


@dataclass(frozen=True)
class WalkConfig:
    """Simulation parameters shared by all walkers.

    ``gamma`` is the step scale of the simple stable walk only.  The
    recurrent pair alpha=2, d=2 is allowed for hitting-distribution studies
    (escape probability is 1, so paths always re-enter); every other
    configuration must be transient, i.e. d > alpha.
    """

    alpha: float
    d: int
    r_launch: float
    r_escape: float
    gamma: float = 0.05
    epsilon: float = 1e-6
    max_steps: int = 10**6
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must be in (0, 2], got {self.alpha}")
        if self.d < 2:
            raise ValueError(f"d must be >= 2, got {self.d}")
        if self.alpha == 2.0 and self.d == 2:
            warnings.warn("alpha=2, d=2 is recurrent: paths never escape and "
                          "capacity from hit fractions is undefined")
        elif self.d <= self.alpha:
            raise ValueError(f"recurrent regime d <= alpha (d={self.d}, "
                             f"alpha={self.alpha}); capacity requires transience")
        if self.gamma <= 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0.0 < self.r_launch < self.r_escape:
            raise ValueError(f"need 0 < r_launch < r_escape, got "
                             f"{self.r_launch}, {self.r_escape}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    @property
    def recurrent(self) -> bool:
        return self.d <= self.alpha

    @staticmethod
    def for_shape(shape, alpha: float, *, launch_factor: float = 1.2,
                  escape_factor: float = 2.0, **kwargs) -> "WalkConfig":
        """Config with default radii: r_launch = 1.2 * bounding radius and
        r_escape = 2 * r_launch."""
        r = geometry.bounding_radius(shape) * launch_factor
        return WalkConfig(alpha=alpha, d=shape.dimension, r_launch=r,
                          r_escape=escape_factor * r, **kwargs)


@dataclass
class WalkOutcome:
    kind: str                               # "hit" | "escaped" | "cap_exceeded"
    steps: int
    location: Optional[np.ndarray] = None   # hit location, hits only
    path: Optional[np.ndarray] = None       # (k, d) visited positions if recorded


@dataclass
class HitSet:
    """Hitting locations plus bookkeeping from a batch of paths."""

    hits: np.ndarray            # (n, d)
    paths_run: int
    escapes: int
    cap_exceeded: int
    step_total: int
    step_max: int

    def __post_init__(self):
        if len(self.hits) + self.escapes + self.cap_exceeded != self.paths_run:
            raise ValueError("hits + escapes + cap_exceeded must equal paths_run")

    @property
    def n_hits(self) -> int:
        return len(self.hits)

    @property
    def hit_fraction(self) -> float:
        return len(self.hits) / self.paths_run

    @property
    def step_mean(self) -> float:
        return self.step_total / self.paths_run


def _check_shape_fits(config: WalkConfig, shape) -> None:
    if shape.dimension != config.d:
        raise ValueError(f"shape dimension {shape.dimension} != config d={config.d}")
    rb = geometry.bounding_radius(shape)
    if rb > config.r_launch * (1.0 + 1e-12):
        raise ValueError(f"shape bounding radius {rb:.6g} exceeds launch "
                         f"radius {config.r_launch:.6g}")


def _escape_probability(config: WalkConfig, norms: np.ndarray) -> np.ndarray:
    """P(return to the launch ball) for positions at the given norms."""
    if config.recurrent:
        return np.ones_like(norms)
    return np.asarray(hit_ball_probability(config.alpha, config.d,
                                           norms / config.r_launch))


# ---------------------------------------------------------------------------
# lane-based draws (per-lane counters; one lane = one path)
# ---------------------------------------------------------------------------

def _lanes_sphere(lanes: RngLanes, idx, d: int) -> np.ndarray:
    return sphere_from_normals(lanes.normal_block(idx, d))


def _lanes_equilibrium(lanes: RngLanes, idx, alpha: float, d: int) -> np.ndarray:
    if alpha == 2.0:
        return _lanes_sphere(lanes, idx, d)
    b = betaincinv(d / 2.0, 1.0 - alpha / 2.0, lanes.uniform(idx))
    return np.sqrt(b)[:, None] * _lanes_sphere(lanes, idx, d)


def _lanes_exit_center(lanes: RngLanes, idx, alpha: float, d: int) -> np.ndarray:
    """Exit point from the unit ball's center: Z/sqrt(B), B ~ Beta(a/2, 1-a/2)."""
    b = betaincinv(alpha / 2.0, 1.0 - alpha / 2.0, lanes.uniform(idx))
    return _lanes_sphere(lanes, idx, d) / np.sqrt(b)[:, None]


def _lanes_stable_step(lanes: RngLanes, idx, config: WalkConfig) -> np.ndarray:
    d = config.d
    if config.alpha == 2.0:
        return np.sqrt(2.0) * config.gamma * lanes.normal_block(idx, d)
    u = lanes.uniform_block(idx, 2)
    s0 = positive_stable_from_uniforms(config.alpha / 2.0, u[:, 0], u[:, 1])
    scale = (subordinator_scale(config.alpha, config.gamma)
             * positive_stable_unit_factor(config.alpha / 2.0))
    return np.sqrt(scale * s0)[:, None] * lanes.normal_block(idx, d)


def _lanes_reenter(lanes: RngLanes, idx, positions, config: WalkConfig,
                   max_rounds: int = 10**6) -> np.ndarray:
    """Re-entry locations in the launch ball for paths at ``positions``.

    alpha < 2: rejection from the equilibrium shape against the hitting
    density; alpha = 2: rejection from the uniform sphere against the
    Poisson kernel.  Acceptance is ((|x|-1)/|x-y|)^d <= 1 in both cases.
    """
    x = positions / config.r_launch
    nx = np.linalg.norm(x, axis=1)
    out = np.empty_like(x)
    pending = np.arange(len(idx))
    for _ in range(max_rounds):
        sub = idx[pending]
        y = _lanes_equilibrium(lanes, sub, config.alpha, config.d)
        acc = ((nx[pending] - 1.0)
               / np.linalg.norm(y - x[pending], axis=1)) ** config.d
        if np.any(acc > 1.0 + 1e-12):
            raise AssertionError("re-entry sampler: acceptance above 1")
        keep = lanes.uniform(sub) < acc
        out[pending[keep]] = y[keep]
        pending = pending[~keep]
        if pending.size == 0:
            return config.r_launch * out
    raise RuntimeError(f"re-entry rejection failed after {max_rounds} rounds")


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------

def _run_paths(config: WalkConfig, shape, walker: str, path_indices=None,
               record_paths: bool = False, lanes: RngLanes | None = None):
    """Run one batch of paths to completion.

    The batch is a pure function of (config.seed, path_indices) when
    ``lanes`` is None; tests and the single-path wrappers may inject a
    pre-positioned lane state instead.

    Returns (codes, steps, locations, path_rows): hit positions are stored
    in ``locations`` (NaN elsewhere); ``path_rows`` is a list of
    (path_ids, step_indices, positions) triples when recording is on.
    """
    if lanes is None:
        lanes = RngLanes(config.seed, np.asarray(path_indices, dtype=np.uint64))
    path_ids = lanes.streams
    m = len(lanes)
    d = config.d
    all_idx = np.arange(m)

    if config.alpha == 2.0:
        X = config.r_launch * _lanes_sphere(lanes, all_idx, d)
    else:
        X = config.r_launch * _lanes_equilibrium(lanes, all_idx, config.alpha, d)

    codes = np.full(m, _RUNNING, dtype=np.int8)
    steps = np.zeros(m, dtype=np.int64)
    locations = np.full((m, d), np.nan)
    rows = []

    active = all_idx
    while active.size:
        if record_paths:
            rows.append((path_ids[active].copy(), steps[active].copy(),
                         X[active].copy()))
        dist = geometry.distance(shape, X[active])
        hit = dist <= config.epsilon
        if np.any(hit):
            hit_lanes = active[hit]
            codes[hit_lanes] = _HIT
            locations[hit_lanes] = X[hit_lanes]
            active = active[~hit]
            dist = dist[~hit]
            if active.size == 0:
                break
        capped = steps[active] >= config.max_steps
        if np.any(capped):
            codes[active[capped]] = _CAP
            active = active[~capped]
            dist = dist[~capped]
            if active.size == 0:
                break

        if walker == "wiob":
            y = X[active] + dist[:, None] * _lanes_exit_center(
                lanes, active, config.alpha, d)
        elif walker == "wos":
            y = X[active] + dist[:, None] * _lanes_sphere(lanes, active, d)
        else:
            y = X[active] + _lanes_stable_step(lanes, active, config)
        steps[active] += 1

        norms = np.linalg.norm(y, axis=1)
        far = np.flatnonzero(norms > config.r_escape)
        if far.size:
            far_lanes = active[far]
            p = _escape_probability(config, norms[far])
            reenter = lanes.uniform(far_lanes) < p
            if np.any(reenter):
                y[far[reenter]] = _lanes_reenter(
                    lanes, far_lanes[reenter], y[far[reenter]], config)
            codes[far_lanes[~reenter]] = _ESCAPED
        X[active] = y
        if far.size:
            active = active[codes[active] == _RUNNING]

    return codes, steps, locations, rows


_WALKERS = ("simple", "wos", "wiob")


def _validate_walker(config: WalkConfig, walker: str) -> None:
    if walker not in _WALKERS:
        raise ValueError(f"walker must be one of {_WALKERS}, got {walker!r}")
    if walker == "wos" and config.alpha != 2.0:
        raise ValueError("Walk-On-Spheres requires alpha = 2; use walker='wiob'")
    if walker == "wos" and config.epsilon <= 0.0:
        raise ValueError("Walk-On-Spheres needs epsilon > 0 to terminate")
    if walker == "wiob" and config.alpha == 2.0:
        raise ValueError("Walk-In-and-Out-of-Balls requires alpha < 2; "
                         "use walker='wos'")
    if walker == "simple" and not (config.epsilon < config.gamma < config.r_launch):
        warnings.warn("recommended scale ordering epsilon << gamma << r_launch "
                      "does not hold; hit detection may be unreliable")


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def launch_point(config: WalkConfig, rng: RngStream) -> np.ndarray:
    """Starting point: uniform on the launch sphere (alpha=2) or drawn from
    the launch ball's equilibrium distribution (alpha<2)."""
    from .sampling import sample_equilibrium_ball, sample_uniform_sphere

    if config.alpha == 2.0:
        return config.r_launch * sample_uniform_sphere(config.d, rng)
    return config.r_launch * sample_equilibrium_ball(config.alpha, config.d, rng)


def escape_or_reenter(config: WalkConfig, x, rng: RngStream):
    """Resolve a position beyond the escape radius.

    Returns None when the path escapes to infinity (probability 1 - p, with
    p the launch-ball hitting probability from x), otherwise the re-entry
    point inside (alpha<2) or on (alpha=2) the launch sphere.
    """
    x = np.asarray(x, dtype=float)
    nx = np.linalg.norm(x)
    if nx <= config.r_escape:
        raise ValueError(f"|x| = {nx:.6g} is not beyond r_escape = "
                         f"{config.r_escape:.6g}")
    p = float(_escape_probability(config, np.array([nx]))[0])
    if rng.uniform() >= p:
        return None
    from .ball_kernels import (sample_brownian_reentry_sphere,
                               sample_hit_location_in_ball)

    local = x / config.r_launch
    if config.alpha == 2.0:
        y = sample_brownian_reentry_sphere(config.d, local, rng)
    else:
        y = sample_hit_location_in_ball(config.alpha, config.d, local, rng)
    return config.r_launch * y


def _run_single(config: WalkConfig, shape, walker: str, rng: RngStream,
                record_path: bool) -> WalkOutcome:
    _validate_walker(config, walker)
    _check_shape_fits(config, shape)
    lanes = RngLanes(rng.seed, np.array([rng.stream], dtype=np.uint64))
    lanes.counters[0] = rng.counter
    codes, steps, locations, rows = _run_paths(
        config, shape, walker, record_paths=record_path, lanes=lanes)
    rng.counter = int(lanes.counters[0])
    kind = _KIND[int(codes[0])]
    path = np.vstack([r[2] for r in rows]) if record_path and rows else None
    loc = locations[0] if kind == "hit" else None
    return WalkOutcome(kind=kind, steps=int(steps[0]), location=loc, path=path)


def run_simple_stable_walk(config: WalkConfig, shape, rng: RngStream,
                           record_path: bool = False) -> WalkOutcome:
    """One path of the simple stable random walk (steps of scale gamma)."""
    return _run_single(config, shape, "simple", rng, record_path)


def run_wos(config: WalkConfig, shape, rng: RngStream,
            record_path: bool = False) -> WalkOutcome:
    """One Walk-On-Spheres path (alpha = 2)."""
    return _run_single(config, shape, "wos", rng, record_path)


def run_wiob(config: WalkConfig, shape, rng: RngStream,
             record_path: bool = False) -> WalkOutcome:
    """One Walk-In-and-Out-of-Balls path (alpha < 2)."""
    return _run_single(config, shape, "wiob", rng, record_path)


def collect_hits(config: WalkConfig, shape, n: int, walker: str = "wiob",
                 workers: int = 1, batch_size: int = 4096,
                 path_sink=None, max_consecutive_escapes: int = 10**5) -> HitSet:
    """Run paths in path-index order until ``n`` hits are recorded.

    The resulting HitSet is identical for any ``workers`` or ``batch_size``
    because path ``i`` always consumes RNG stream ``i``.  Paths after the
    one producing the n-th hit are discarded, so ``paths_run`` is exactly
    the index of that path plus one.  Aborts with a diagnostic after
    ``max_consecutive_escapes`` escapes in a row (projected hit probability
    below ~1e-5 at the default threshold).

    ``path_sink``: optional writable text file; every visited position is
    appended as ``path,step,x1,...,xd`` CSV rows.
    """
    if n < 2:
        raise ValueError(f"need at least 2 hits, got n={n}")
    _validate_walker(config, walker)
    _check_shape_fits(config, shape)

    record = path_sink is not None
    if record:
        path_sink.write("path,step," + ",".join(
            f"x{i+1}" for i in range(config.d)) + "\n")

    hits: list[np.ndarray] = []
    paths_run = 0
    escapes = 0
    capped = 0
    step_total = 0
    step_max = 0
    esc_run = 0

    from concurrent.futures import ThreadPoolExecutor

    def run_batch(lo: int):
        return _run_paths(config, shape, walker,
                          np.arange(lo, lo + batch_size, dtype=np.uint64),
                          record_paths=record)

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    inflight: dict[int, object] = {}
    next_submit = 0
    consume = 0
    try:
        while True:
            if pool is not None:
                while len(inflight) < workers:
                    inflight[next_submit] = pool.submit(run_batch, next_submit)
                    next_submit += batch_size
                codes, steps, locations, rows = inflight.pop(consume).result()
            else:
                codes, steps, locations, rows = run_batch(consume)
            consume += batch_size

            if record:
                for ids, stepno, pos in rows:
                    for pid, sno, xy in zip(ids, stepno, pos):
                        path_sink.write(f"{int(pid)},{int(sno)},"
                                        + ",".join(repr(float(v)) for v in xy)
                                        + "\n")

            hit_mask = codes == _HIT
            need = n - len(hits)
            hit_positions = np.flatnonzero(hit_mask)
            if hit_positions.size >= need:
                cutoff = int(hit_positions[need - 1])   # n-th hit, batch-local
                codes = codes[:cutoff + 1]
                steps = steps[:cutoff + 1]
                locations = locations[:cutoff + 1]
                hit_mask = hit_mask[:cutoff + 1]

            hits.extend(locations[hit_mask])
            paths_run += codes.size
            escapes += int(np.count_nonzero(codes == _ESCAPED))
            capped += int(np.count_nonzero(codes == _CAP))
            step_total += int(steps.sum())
            step_max = max(step_max, int(steps.max(initial=0)))

            # longest run of consecutive escapes, carried across batches
            non_esc = np.flatnonzero(codes != _ESCAPED)
            if non_esc.size == 0:
                esc_run += codes.size
            else:
                lead = esc_run + int(non_esc[0])
                inner = int(np.max(np.diff(non_esc), initial=1)) - 1
                esc_run = codes.size - 1 - int(non_esc[-1])
                if max(lead, inner) >= max_consecutive_escapes:
                    esc_run = max_consecutive_escapes
            if esc_run >= max_consecutive_escapes:
                raise RuntimeError(
                    f"{max_consecutive_escapes} consecutive escapes: projected "
                    f"hit probability below 1e-5; check that the shape is "
                    f"reachable from the launch ball")

            if len(hits) >= n:
                break
    finally:
        if pool is not None:
            pool.shutdown(wait=False, cancel_futures=True)

    return HitSet(hits=np.asarray(hits[:n]), paths_run=paths_run,
                  escapes=escapes, cap_exceeded=capped,
                  step_total=step_total, step_max=step_max)


@dataclass
class HitFractionEstimate:
    value: float
    se: float
    ci_low: float
    ci_high: float


def capacity_from_hit_fraction(hitset: HitSet, config: WalkConfig,
                               delta: float = 0.05,
                               include_capped: bool = False) -> HitFractionEstimate:
    """Capacity estimate r_launch^(d-2) * hit fraction, alpha = 2 only.

    Step-capped paths are excluded from the denominator by default (they
    are neither hits nor escapes); pass include_capped=True to count them
    as misses.  The confidence interval is the Wald binomial interval.
    """
    if config.alpha != 2.0:
        raise ValueError("hit-fraction capacity requires alpha = 2")
    if config.d < 3:
        raise ValueError("hit-fraction capacity requires the transient case d >= 3")
    m = hitset.paths_run - (0 if include_capped else hitset.cap_exceeded)
    if m <= 0:
        raise ValueError("no usable paths in hit set")
    f = hitset.n_hits / m
    scale = config.r_launch ** (config.d - 2)
    z = float(-ndtri(delta / 2.0))
    se = scale * np.sqrt(f * (1.0 - f) / m)
    return HitFractionEstimate(value=scale * f, se=se,
                               ci_low=scale * f - z * se,
                               ci_high=scale * f + z * se)
