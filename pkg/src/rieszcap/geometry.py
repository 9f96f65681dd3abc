"""Target-set geometry: primitives, unions, and the queries walkers need.

A shape is a tree of solid primitives (balls, boxes, flat-capped cylinders)
combined by union.  Shapes are immutable after construction; all queries are
read-only and accept point arrays of shape (..., d), broadcasting over the
leading axes.

Distances are exact Euclidean distances to the solid set (0 inside).  Thin
sets such as coins are represented as cylinders with a small half-thickness,
never as measure-zero disks.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .ball_kernels import BallGeometry

__all__ = [
    "Ball", "Box", "Cylinder", "Union", "ShapeFormatError",
    "distance", "is_hit", "contains", "bounding_radius", "volume",
    "volume_monte_carlo", "ball_same_volume", "unit_ball_volume",
    "load_shape", "parse_shape", "shape_to_dict",
]


class ShapeFormatError(ValueError):
    """Raised when a shape description file is malformed."""


def unit_ball_volume(d: int, radius: float = 1.0) -> float:
    """Volume of a d-ball: pi^(d/2) r^d / Gamma(d/2 + 1)."""
    return float(np.pi ** (d / 2.0) * radius**d / np.exp(gammaln(d / 2.0 + 1.0)))


@dataclass
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.radius = float(self.radius)
        if self.center.ndim != 1:
            raise ValueError("ball center must be a vector")
        if self.radius <= 0.0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    @property
    def dimension(self) -> int:
        return self.center.size

    def distance(self, x) -> np.ndarray:
        r = np.linalg.norm(np.asarray(x, float) - self.center, axis=-1)
        return np.maximum(r - self.radius, 0.0)

    def contains(self, x) -> np.ndarray:
        r = np.linalg.norm(np.asarray(x, float) - self.center, axis=-1)
        return r <= self.radius

    def bounding_radius(self) -> float:
        return float(np.linalg.norm(self.center) + self.radius)

    def volume(self) -> float:
        return unit_ball_volume(self.dimension, self.radius)

    def aabb(self):
        return self.center - self.radius, self.center + self.radius


@dataclass
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ValueError("box corners must be vectors of equal dimension")
        if not np.all(self.lo < self.hi):
            raise ValueError("box requires min < max componentwise")

    @property
    def dimension(self) -> int:
        return self.lo.size

    def distance(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        q = np.maximum(np.maximum(self.lo - x, x - self.hi), 0.0)
        return np.linalg.norm(q, axis=-1)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)

    def bounding_radius(self) -> float:
        corner = np.maximum(np.abs(self.lo), np.abs(self.hi))
        return float(np.linalg.norm(corner))

    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def aabb(self):
        return self.lo.copy(), self.hi.copy()


@dataclass
class Cylinder:
    """Solid flat-capped cylinder: axis segment p0 -> p1, circular radius."""

    p0: np.ndarray
    p1: np.ndarray
    radius: float

    def __post_init__(self):
        self.p0 = np.asarray(self.p0, dtype=float)
        self.p1 = np.asarray(self.p1, dtype=float)
        self.radius = float(self.radius)
        if self.p0.shape != self.p1.shape or self.p0.ndim != 1:
            raise ValueError("cylinder endpoints must be vectors of equal dimension")
        self._length = float(np.linalg.norm(self.p1 - self.p0))
        if self._length <= 0.0:
            raise ValueError("cylinder axis must have positive length")
        if self.radius <= 0.0:
            raise ValueError(f"cylinder radius must be positive, got {self.radius}")
        self._axis = (self.p1 - self.p0) / self._length

    @property
    def dimension(self) -> int:
        return self.p0.size

    def _axial_radial(self, x):
        rel = np.asarray(x, float) - self.p0
        h = rel @ self._axis
        radial = np.linalg.norm(rel - h[..., None] * self._axis, axis=-1)
        return h, radial

    def distance(self, x) -> np.ndarray:
        h, radial = self._axial_radial(x)
        dz = np.maximum(np.maximum(-h, h - self._length), 0.0)
        dr = np.maximum(radial - self.radius, 0.0)
        return np.hypot(dr, dz)

    def contains(self, x) -> np.ndarray:
        h, radial = self._axial_radial(x)
        return (h >= 0.0) & (h <= self._length) & (radial <= self.radius)

    def bounding_radius(self) -> float:
        best = 0.0
        for p in (self.p0, self.p1):
            perp = p - (p @ self._axis) * self._axis
            best = max(best, float(np.sqrt(
                p @ p + 2.0 * self.radius * np.linalg.norm(perp) + self.radius**2)))
        return best

    def volume(self) -> float:
        return self._length * unit_ball_volume(self.dimension - 1, self.radius)

    def aabb(self):
        # rim extent of a cap along axis i is radius * sqrt(1 - axis_i^2)
        w = self.radius * np.sqrt(np.maximum(1.0 - self._axis**2, 0.0))
        return np.minimum(self.p0, self.p1) - w, np.maximum(self.p0, self.p1) + w


@dataclass
class Union:
    children: list

    def __post_init__(self):
        if not self.children:
            raise ValueError("union requires at least one child")
        dims = {c.dimension for c in self.children}
        if len(dims) != 1:
            raise ValueError(f"union mixes dimensions {sorted(dims)}")

    @property
    def dimension(self) -> int:
        return self.children[0].dimension

    def distance(self, x) -> np.ndarray:
        return np.minimum.reduce([c.distance(x) for c in self.children])

    def contains(self, x) -> np.ndarray:
        return np.logical_or.reduce([c.contains(x) for c in self.children])

    def bounding_radius(self) -> float:
        return max(c.bounding_radius() for c in self.children)

    def aabb(self):
        boxes = [c.aabb() for c in self.children]
        return (np.minimum.reduce([b[0] for b in boxes]),
                np.maximum.reduce([b[1] for b in boxes]))

    def volume(self) -> float:
        leaves = _leaves(self)
        if _pairwise_disjoint(leaves):
            return sum(c.volume() for c in leaves)
        vol, rel = volume_monte_carlo(self)
        warnings.warn(f"union members overlap; Monte Carlo volume used "
                      f"(relative error ~{rel:.1e})")
        return vol


def _leaves(shape) -> list:
    if isinstance(shape, Union):
        out = []
        for c in shape.children:
            out.extend(_leaves(c))
        return out
    return [shape]


def _pairwise_disjoint(leaves) -> bool:
    """Conservative test: bounding boxes may touch but not overlap interiors."""
    boxes = [leaf.aabb() for leaf in leaves]
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            lo = np.maximum(boxes[i][0], boxes[j][0])
            hi = np.minimum(boxes[i][1], boxes[j][1])
            if np.all(lo < hi):
                return False
    return True


# ---------------------------------------------------------------------------
# module-level queries
# ---------------------------------------------------------------------------

def distance(shape, x) -> np.ndarray:
    """Euclidean distance from point(s) x to the solid set (0 inside)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != shape.dimension:
        raise ValueError(f"point dimension {x.shape[-1]} does not match "
                         f"shape dimension {shape.dimension}")
    return shape.distance(x)


def is_hit(shape, x, epsilon: float):
    """Whether distance(shape, x) <= epsilon."""
    if epsilon < 0.0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    return distance(shape, x) <= epsilon


def contains(shape, x):
    x = np.asarray(x, dtype=float)
    return shape.contains(x)


def bounding_radius(shape) -> float:
    """Radius of an origin-centered ball containing the shape."""
    return shape.bounding_radius()


def volume(shape) -> float:
    return shape.volume()


def volume_monte_carlo(shape, n: int = 10**7, seed: int = 0):
    """Monte Carlo volume over the shape's bounding box; returns (volume, rel_err)."""
    lo, hi = shape.aabb()
    box_vol = float(np.prod(hi - lo))
    rng = np.random.default_rng(seed)
    inside = 0
    chunk = 10**6
    remaining = n
    while remaining > 0:
        k = min(chunk, remaining)
        pts = lo + (hi - lo) * rng.random((k, shape.dimension))
        inside += int(np.count_nonzero(shape.contains(pts)))
        remaining -= k
    p = inside / n
    vol = box_vol * p
    rel = float(np.sqrt(max(p * (1.0 - p), 1e-300) / n) / max(p, 1e-300))
    return vol, rel


def ball_same_volume(shape, d: int | None = None) -> BallGeometry:
    """Origin-centered ball with the same volume as the shape."""
    d = shape.dimension if d is None else d
    v = volume(shape)
    if v <= 0.0:
        raise ValueError("shape has zero volume; no equal-volume ball exists")
    radius = (v / unit_ball_volume(d)) ** (1.0 / d)
    return BallGeometry(center=(0.0,) * d, radius=radius)


# ---------------------------------------------------------------------------
# shape description files
# ---------------------------------------------------------------------------

def _require(mapping, key, where):
    if key not in mapping:
        raise ShapeFormatError(f"{where}: missing field '{key}'")
    return mapping[key]


def _parse_primitive(node, d, where):
    if not isinstance(node, dict):
        raise ShapeFormatError(f"{where}: primitive must be an object")
    kind = _require(node, "type", where)
    try:
        if kind == "ball":
            return Ball(_require(node, "center", where), _require(node, "radius", where))
        if kind == "box":
            return Box(_require(node, "min", where), _require(node, "max", where))
        if kind == "cylinder":
            return Cylinder(_require(node, "p0", where), _require(node, "p1", where),
                            _require(node, "radius", where))
        if kind == "union":
            kids = _require(node, "children", where)
            return Union([_parse_primitive(c, d, f"{where}.children[{i}]")
                          for i, c in enumerate(kids)])
    except ShapeFormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise ShapeFormatError(f"{where}: {exc}") from exc
    raise ShapeFormatError(f"{where}: unknown primitive type '{kind}'")


def parse_shape(doc: dict):
    """Build a shape from a parsed description document."""
    if not isinstance(doc, dict):
        raise ShapeFormatError("shape document must be an object")
    d = _require(doc, "dimension", "document")
    if not isinstance(d, int) or d < 2:
        raise ShapeFormatError(f"document: dimension must be an integer >= 2, got {d!r}")
    prims = _require(doc, "primitives", "document")
    if not isinstance(prims, list) or not prims:
        raise ShapeFormatError("document: 'primitives' must be a non-empty list")
    parsed = [_parse_primitive(p, d, f"primitives[{i}]") for i, p in enumerate(prims)]
    shape = parsed[0] if len(parsed) == 1 else Union(parsed)
    if shape.dimension != d:
        raise ShapeFormatError(f"document: primitives are {shape.dimension}-dimensional "
                               f"but dimension={d}")
    return shape


def load_shape(path):
    """Load a shape from a JSON description file."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ShapeFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_shape(doc)


def shape_to_dict(shape) -> dict:
    """Inverse of parse_shape, for manifests and round-trips."""
    def node(s):
        if isinstance(s, Ball):
            return {"type": "ball", "center": s.center.tolist(), "radius": s.radius}
        if isinstance(s, Box):
            return {"type": "box", "min": s.lo.tolist(), "max": s.hi.tolist()}
        if isinstance(s, Cylinder):
            return {"type": "cylinder", "p0": s.p0.tolist(), "p1": s.p1.tolist(),
                    "radius": s.radius}
        if isinstance(s, Union):
            return {"type": "union", "children": [node(c) for c in s.children]}
        raise TypeError(f"unknown shape node {type(s)!r}")
    root = node(shape)
    prims = root["children"] if root["type"] == "union" else [root]
    return {"dimension": shape.dimension, "primitives": prims}
