"""Capacity estimation from hitting locations.

The energy integral of the empirical hitting measure is estimated by a
split-sample scheme built for the heavy-tailed pair kernel
w_ij = |x_i - x_j|^(alpha-d):

* group 1 (first n1 points) estimates the truncated part
  I1 = E min(W, tau) with a U-statistic of the tau-capped kernel and Sen's
  nonnegative variance estimator;
* group 2 (remaining points) estimates the tail part
  I2 = E max(0, W - tau) by fitting a Pareto exponent (Hill estimator) to
  index-disjoint exceedances over tau, which detects the infinite-energy
  case (tail exponent <= 1) that a finite sum can never reveal.

The threshold tau is an upper quantile computed from group-1 pairs only, so
the tail sample stays independent of it.  The two halves are independent,
so their variances add; capacity 1/I and its confidence interval follow by
the delta method.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import ndtri

__all__ = [
    "EstimatorConfig", "EnergyEstimate", "CapacityEstimate",
    "pairwise_kernel", "choose_threshold", "estimate_I1",
    "select_tail_sample", "hill_estimator", "estimate_I2",
    "naive_energy_estimate", "estimate_energy", "capacity_with_ci",
    "estimate_capacity", "load_points_csv", "save_points_csv",
]

_BLOCK = 1024          # row-block size for streaming pair scans
_MATERIALIZE_MAX = 6000  # largest n1 for which the full group-1 matrix is kept


@dataclass(frozen=True)
class EstimatorConfig:
    """Split-estimator parameters.

    ``n1`` defaults to n//2 at estimation time.  ``literal_row_variance``
    switches v1 to the form sum((xbar_j^2 - I1)^2)/(n1-1) for comparison;
    the default is the sample variance of the row means.
    """

    n1: Optional[int] = None
    p_tau: float = 0.995
    delta: float = 0.05
    literal_row_variance: bool = False

    def __post_init__(self):
        if self.n1 is not None and self.n1 < 2:
            raise ValueError(f"n1 must be >= 2, got {self.n1}")
        if not 0.0 < self.p_tau < 1.0:
            raise ValueError(f"p_tau must be in (0, 1), got {self.p_tau}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")


@dataclass
class EnergyEstimate:
    I1_hat: float
    v1: float
    sigma1_sq: float
    tau: float
    nu_hat: float          # +inf when no exceedances were observed
    n3: int
    I2_hat: float          # +inf iff nu_hat <= 1
    I_hat: float
    sigma_I_sq: float      # NaN when I_hat is infinite
    n: int = 0
    n1: int = 0
    p_tau: float = float("nan")
    coincident_pairs: int = 0

    @property
    def infinite(self) -> bool:
        return not np.isfinite(self.I_hat)


@dataclass
class CapacityEstimate:
    value: float                       # 0 when the energy is infinite
    sigma_cap: float
    ci_low: Optional[float] = None     # undefined when energy is infinite
    ci_high: Optional[float] = None
    infinite_energy: bool = False


# ---------------------------------------------------------------------------
# kernel and matrix-based operations
# ---------------------------------------------------------------------------

def _kernel_exponent(alpha: float, d: int) -> float:
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must be in (0, 2], got {alpha}")
    if alpha > d:
        raise ValueError(f"kernel requires alpha <= d, got alpha={alpha}, d={d}")
    # alpha == d degenerates to the constant kernel 1 (the only reachable
    # case is alpha=2, d=2, where every probability measure has energy 1)
    return alpha - float(d)


def pairwise_kernel(points, alpha: float, d: int) -> np.ndarray:
    """Symmetric matrix w_ij = |x_i - x_j|^(alpha-d); diagonal is NaN.

    Coincident pairs produce +inf entries and a warning; downstream sums
    exclude them with a counter.
    """
    expo = _kernel_exponent(alpha, d)
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("need at least 2 points")
    dist = cdist(pts, pts)
    with np.errstate(divide="ignore"):
        w = dist**expo
    np.fill_diagonal(w, np.nan)
    off = ~np.eye(len(pts), dtype=bool)
    if expo < 0 and np.isinf(w[off]).any():
        warnings.warn("coincident points produced infinite kernel entries")
    return w


def choose_threshold(values, p_tau: float) -> float:
    """Empirical p_tau quantile (linear interpolation) of pair kernel values."""
    vals = np.asarray(values, dtype=float)
    vals = vals[np.isfinite(vals)]
    if vals.size < 10:
        raise ValueError(f"need at least 10 finite pair values, got {vals.size}")
    if np.all(vals == vals[0]):
        warnings.warn("all pair values equal; threshold is degenerate")
        return float(vals[0])
    return float(np.quantile(vals, p_tau))


def estimate_I1(w: np.ndarray, tau: float, literal_row_variance: bool = False):
    """Truncated U-statistic on a group-1 kernel matrix.

    Returns (I1_hat, v1, sigma1_sq): the mean of the off-diagonal row means
    of min(w, tau), their sample variance v1, and Sen's variance estimator
    sigma1^2 = 4 v1 / n1 (nonnegative by construction).  Non-finite entries
    (coincident pairs) are excluded from the row sums.
    """
    return _i1_from_matrix(w, tau, literal=literal_row_variance)


def _i1_from_matrix(w: np.ndarray, tau: float, literal: bool):
    n1 = w.shape[0]
    if w.shape != (n1, n1) or n1 < 2:
        raise ValueError("w must be a square matrix of size >= 2")
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    finite = np.isfinite(w)
    counts = finite.sum(axis=1)
    if np.any(counts == 0):
        raise ValueError("a row has no finite off-diagonal entries")
    capped = np.where(finite, np.minimum(w, tau), 0.0)
    row_means = capped.sum(axis=1) / counts
    return _i1_from_row_means(row_means, literal)


def _i1_from_row_means(row_means: np.ndarray, literal: bool):
    n1 = row_means.size
    i1 = float(row_means.mean())
    dev = row_means**2 - i1 if literal else row_means - i1
    v1 = float((dev**2).sum() / (n1 - 1))
    return i1, v1, 4.0 * v1 / n1


def select_tail_sample(w2: np.ndarray, tau: float) -> np.ndarray:
    """Index-disjoint exceedances over tau from a group-2 kernel matrix.

    Pairs (i, j), i < j, are scanned in lexicographic order; a pair is
    selected only if w_ij > tau and neither index has been used by an
    earlier selection, which makes the selected values mutually
    independent.
    """
    n2 = w2.shape[0]
    iu, ju = np.triu_indices(n2, k=1)
    vals = w2[iu, ju]
    mask = np.isfinite(vals) & (vals > tau)
    return _greedy_disjoint(iu[mask], ju[mask], vals[mask], n2)


def _greedy_disjoint(ii, jj, vals, n2: int) -> np.ndarray:
    used = np.zeros(n2, dtype=bool)
    out = []
    for i, j, v in zip(ii, jj, vals):
        if not used[i] and not used[j]:
            used[i] = used[j] = True
            out.append(v)
    return np.asarray(out, dtype=float)


def hill_estimator(z, tau: float) -> float:
    """Hill estimate of the Pareto tail exponent from exceedances over tau:
    1 / (mean(log z) - log tau)."""
    z = np.asarray(z, dtype=float)
    if z.size < 1:
        raise ValueError("need at least one exceedance")
    if np.any(z <= tau):
        raise ValueError("all tail values must exceed tau")
    return float(1.0 / np.mean(np.log(z / tau)))


def estimate_I2(nu_hat: float, tau: float, p_tau: float, n3: int):
    """Tail-part estimate (1-p_tau) tau / (nu_hat - 1) and its variance.

    nu_hat <= 1 flags an infinite energy integral: returns (+inf, NaN).
    The variance follows the delta method with nu_hat ~ N(nu, nu^2/n3).
    """
    if tau <= 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    if nu_hat <= 1.0:
        return float("inf"), float("nan")
    i2 = (1.0 - p_tau) * tau / (nu_hat - 1.0)
    if n3 <= 0:
        return float(i2), float("nan")
    gprime = -(1.0 - p_tau) * tau / (nu_hat - 1.0) ** 2
    return float(i2), float(gprime**2 * nu_hat**2 / n3)


def naive_energy_estimate(points, alpha: float, d: int) -> float:
    """Plain U-statistic mean(|x_i - x_j|^(alpha-d), i < j).

    Numerically unreliable at scale (near-coincident pairs dominate); kept
    for comparison and as a small-instance cross-check of the split
    estimator.
    """
    expo = _kernel_exponent(alpha, d)
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("need at least 2 points")
    iu, ju = np.triu_indices(len(pts), k=1)
    dist = np.linalg.norm(pts[iu] - pts[ju], axis=1)
    with np.errstate(divide="ignore"):
        w = dist**expo
    return float(w.mean())


# ---------------------------------------------------------------------------
# streaming pipeline
# ---------------------------------------------------------------------------

def _pair_blocks(pts_rows, pts_cols, expo, row_offset):
    """Yield (row_start, w_block) with w for rows against all columns."""
    for lo in range(0, len(pts_rows), _BLOCK):
        hi = min(lo + _BLOCK, len(pts_rows))
        dist = cdist(pts_rows[lo:hi], pts_cols)
        with np.errstate(divide="ignore"):
            w = dist**expo
        yield lo + row_offset, w


def _group1_stats(g1, expo, p_tau):
    """tau, row means, and coincident count for group 1 (streaming)."""
    n1 = len(g1)
    tri_vals = []
    coincident = 0
    for lo, w in _pair_blocks(g1, g1, expo, 0):
        b = w.shape[0]
        rows = np.arange(lo, lo + b)
        w[np.arange(b), rows] = np.nan      # diagonal
        for k in range(b):
            upper = w[k, rows[k] + 1:]
            tri_vals.append(upper[np.isfinite(upper)])
            coincident += int(np.isinf(upper).sum())
    vals = np.concatenate(tri_vals)
    tau = choose_threshold(vals, p_tau)

    sums = np.zeros(n1)
    counts = np.zeros(n1, dtype=np.int64)
    for lo, w in _pair_blocks(g1, g1, expo, 0):
        b = w.shape[0]
        w[np.arange(b), np.arange(lo, lo + b)] = np.nan
        finite = np.isfinite(w)
        capped = np.where(finite, np.minimum(w, tau), 0.0)
        sums[lo:lo + b] = capped.sum(axis=1)
        counts[lo:lo + b] = finite.sum(axis=1)
    if np.any(counts == 0):
        raise ValueError("a group-1 row has no finite off-diagonal entries")
    row_means = sums / counts
    return tau, row_means, coincident


def _group2_tail(g2, expo, tau):
    """Exceedance values over tau, lexicographic greedy, index-disjoint."""
    n2 = len(g2)
    ii, jj, vals = [], [], []
    skipped_inf = 0
    for lo, w in _pair_blocks(g2, g2, expo, 0):
        b = w.shape[0]
        rows = np.arange(lo, lo + b)
        cols = np.arange(n2)
        upper = cols[None, :] > rows[:, None]
        hit = upper & np.isfinite(w) & (w > tau)
        skipped_inf += int((upper & np.isinf(w)).sum())
        r, c = np.nonzero(hit)
        ii.append(rows[r])
        jj.append(c)
        vals.append(w[r, c])
    if skipped_inf:
        warnings.warn(f"{skipped_inf} coincident group-2 pairs excluded "
                      f"from the tail sample")
    if not ii:
        return np.empty(0)
    return _greedy_disjoint(np.concatenate(ii), np.concatenate(jj),
                            np.concatenate(vals), n2)


def estimate_energy(points, alpha: float, d: int,
                    config: EstimatorConfig | None = None) -> EnergyEstimate:
    """Split-sample energy estimate from hitting locations.

    Group sizes come from ``config.n1`` (default n//2).  Uses the full
    group-1 matrix when it fits comfortably in memory and a streaming
    row-block scan otherwise; both paths produce identical results.
    """
    config = config or EstimatorConfig()
    expo = _kernel_exponent(alpha, d)
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-d array")
    n = len(pts)
    if pts.shape[1] != d:
        raise ValueError(f"points are {pts.shape[1]}-dimensional, expected d={d}")
    n1 = config.n1 if config.n1 is not None else n // 2
    if not 2 <= n1 <= n - 2:
        raise ValueError(f"need 2 <= n1 <= n-2, got n1={n1}, n={n}")
    g1, g2 = pts[:n1], pts[n1:]

    if n1 <= _MATERIALIZE_MAX:
        w1 = pairwise_kernel(g1, alpha, d)
        finite = np.isfinite(w1)
        iu, ju = np.triu_indices(n1, k=1)
        tri = w1[iu, ju]
        coincident = int(np.isinf(tri).sum())
        tau = choose_threshold(tri, config.p_tau)
        capped = np.where(finite, np.minimum(w1, tau), 0.0)
        row_means = capped.sum(axis=1) / finite.sum(axis=1)
    else:
        tau, row_means, coincident = _group1_stats(g1, expo, config.p_tau)
    if coincident:
        warnings.warn(f"{coincident} coincident group-1 pairs excluded")
    i1, v1, sigma1_sq = _i1_from_row_means(row_means,
                                           config.literal_row_variance)

    z = _group2_tail(g2, expo, tau)
    n3 = int(z.size)
    if n3 == 0:
        warnings.warn("no group-2 exceedances above tau; tail part set to 0")
        nu_hat = float("inf")
        i2, sigma2_sq = 0.0, 0.0
    else:
        nu_hat = hill_estimator(z, tau)
        i2, sigma2_sq = estimate_I2(nu_hat, tau, config.p_tau, n3)

    i_hat = i1 + i2
    sigma_i_sq = sigma1_sq + sigma2_sq if np.isfinite(i2) else float("nan")
    return EnergyEstimate(I1_hat=i1, v1=v1, sigma1_sq=sigma1_sq, tau=tau,
                          nu_hat=nu_hat, n3=n3, I2_hat=i2, I_hat=i_hat,
                          sigma_I_sq=sigma_i_sq, n=n, n1=n1,
                          p_tau=config.p_tau, coincident_pairs=coincident)


def capacity_with_ci(energy: EnergyEstimate, delta: float = 0.05) -> CapacityEstimate:
    """Capacity 1/I with a delta-method normal confidence interval.

    Infinite energy gives capacity 0 with an undefined interval.
    """
    if energy.infinite:
        return CapacityEstimate(value=0.0, sigma_cap=float("nan"),
                                infinite_energy=True)
    cap = 1.0 / energy.I_hat
    sigma_cap = float(np.sqrt(energy.sigma_I_sq) / energy.I_hat**2)
    z = float(-ndtri(delta / 2.0))
    return CapacityEstimate(value=cap, sigma_cap=sigma_cap,
                            ci_low=cap - z * sigma_cap,
                            ci_high=cap + z * sigma_cap)


def estimate_capacity(points, alpha: float, d: int,
                      config: EstimatorConfig | None = None):
    """End-to-end estimate; returns (EnergyEstimate, CapacityEstimate)."""
    config = config or EstimatorConfig()
    energy = estimate_energy(points, alpha, d, config)
    return energy, capacity_with_ci(energy, config.delta)


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

def load_points_csv(path) -> np.ndarray:
    """Read hitting locations from CSV (optional x1,...,xd header row)."""
    with open(path) as fh:
        first = fh.readline()
    skip = 1 if any(c.isalpha() for c in first) else 0
    pts = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    return pts


def save_points_csv(path, points) -> None:
    pts = np.asarray(points, dtype=float)
    header = ",".join(f"x{i+1}" for i in range(pts.shape[1]))
    np.savetxt(path, pts, delimiter=",", header=header, comments="")
