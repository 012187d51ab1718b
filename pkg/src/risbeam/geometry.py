"""
Scene primitives: points, directions, rectangles, trajectories.

Frame convention: right-handed, z up, azimuth measured counter-clockwise
from the +x axis in the horizontal plane, elevation positive towards +z.
Points are plain ``numpy`` arrays of shape (3,).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

_EPS = 1e-12

MATERIALS = ("absorber", "metal", "wood", "glass", "ris", "scatterer")


class GeometryError(ValueError):
    """Degenerate or inconsistent geometry."""


def vec3(x, y=None, z=None) -> np.ndarray:
    """Build a finite float point from three scalars or a length-3 sequence."""
    if y is None and z is None:
        v = np.asarray(x, dtype=float).reshape(3)
    else:
        v = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(v)):
        raise GeometryError(f"non-finite point {v}")
    return v


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < _EPS:
        raise GeometryError("cannot normalise a zero-length vector")
    return v / n


class Direction(NamedTuple):
    """Azimuth in [0, 2pi) and elevation in [-pi/2, pi/2], radians."""

    azimuth: float
    elevation: float

    def unit_vector(self) -> np.ndarray:
        return direction_vector(self.azimuth, self.elevation)

    def degrees(self) -> tuple[float, float]:
        return float(np.degrees(self.azimuth)), float(np.degrees(self.elevation))


def direction_vector(azimuth, elevation=0.0) -> np.ndarray:
    """Unit vector(s) for the given angles; broadcasts, last axis is xyz."""
    az = np.asarray(azimuth, dtype=float)
    el = np.asarray(elevation, dtype=float)
    ce = np.cos(el)
    return np.stack(np.broadcast_arrays(ce * np.cos(az), ce * np.sin(az), np.sin(el)), axis=-1)


def canonical_azimuth(az: float) -> float:
    a = float(np.mod(az, 2 * np.pi))
    # np.mod can return 2pi for tiny negative inputs
    return 0.0 if a >= 2 * np.pi else a


def direction_of(v) -> Direction:
    """Direction of a (non-zero) vector. Zenith/nadir get azimuth 0."""
    u = unit(v)
    el = float(np.arcsin(np.clip(u[2], -1.0, 1.0)))
    if np.hypot(u[0], u[1]) < 1e-12:
        return Direction(0.0, el)
    return Direction(canonical_azimuth(np.arctan2(u[1], u[0])), el)


def direction_between(src, dst) -> Direction:
    """Direction of the unit vector pointing from `src` to `dst`.

    Raises
    ------
    GeometryError
        If the points coincide.
    """
    d = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    if np.linalg.norm(d) < _EPS:
        raise GeometryError("direction between coincident points is undefined")
    return direction_of(d)


def plane_axes(normal, orientation: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """In-plane (width, height) unit axes of a surface with the given normal.

    The width axis is horizontal (normal x z_up) before being rotated by
    `orientation` radians about the normal.  For a horizontal surface the
    width axis starts from +x.
    """
    n = unit(normal)
    w = np.cross(n, [0.0, 0.0, 1.0])
    if np.linalg.norm(w) < 1e-9:
        w = np.array([1.0, 0.0, 0.0]) - n[0] * n
    w = unit(w)
    h = np.cross(w, n)
    if orientation:
        c, s = np.cos(orientation), np.sin(orientation)
        w, h = c * w + s * h, -s * w + c * h
    return w, h


@dataclass(frozen=True, eq=False)
class RectSurface:
    """Bounded planar rectangle with a material tag."""

    center: np.ndarray
    normal: np.ndarray
    width: float
    height: float
    orientation: float = 0.0
    material: str = "metal"
    name: str = ""
    loss_db: Optional[float] = None  # overrides the material default

    def __eq__(self, other):
        if not isinstance(other, RectSurface):
            return NotImplemented
        return (np.array_equal(self.center, other.center)
                and np.array_equal(self.normal, other.normal)
                and (self.width, self.height, self.orientation, self.material, self.name,
                     self.loss_db)
                == (other.width, other.height, other.orientation, other.material, other.name,
                    other.loss_db))

    __hash__ = None

    def __post_init__(self):
        object.__setattr__(self, "center", vec3(self.center))
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise GeometryError(f"surface {self.name!r}: normal must be unit length")
        object.__setattr__(self, "normal", vec3(n))
        if not (self.width > 0 and self.height > 0):
            raise GeometryError(f"surface {self.name!r}: width and height must be > 0")
        if self.material not in MATERIALS:
            raise GeometryError(f"surface {self.name!r}: unknown material {self.material!r}")

    @property
    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return plane_axes(self.normal, self.orientation)

    def corners(self) -> np.ndarray:
        w, h = self.axes
        hw, hh = self.width / 2, self.height / 2
        return np.array([self.center + sw * hw * w + sh * hh * h
                         for sw, sh in ((-1, -1), (1, -1), (1, 1), (-1, 1))])

    def contains(self, point, tol: float = 0.0) -> bool:
        """True if `point` (assumed on the plane) lies inside the bounds."""
        w, h = self.axes
        d = np.asarray(point, dtype=float) - self.center
        return (abs(d @ w) <= self.width / 2 + tol) and (abs(d @ h) <= self.height / 2 + tol)

    def signed_distance(self, point) -> float:
        return float((np.asarray(point, dtype=float) - self.center) @ self.normal)


def ray_hits_rect(origin, direction, rect: RectSurface) -> Optional[np.ndarray]:
    """Intersection of a ray with a bounded rectangle.

    Returns the hit point if the ray crosses the rectangle at strictly
    positive range, otherwise ``None``.  A ray parallel to the plane never
    hits.
    """
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    denom = d @ rect.normal
    if abs(denom) < 1e-12:
        return None
    t = ((rect.center - o) @ rect.normal) / denom
    if t <= _EPS:
        return None
    p = o + t * d
    return p if rect.contains(p) else None


def segment_hits_rect(a, b, rect: RectSurface, clearance: float = 1e-9) -> bool:
    """True if the open segment a-b crosses `rect` (endpoints excluded)."""
    a = np.asarray(a, dtype=float)
    v = np.asarray(b, dtype=float) - a
    length = np.linalg.norm(v)
    if length < _EPS:
        return False
    p = ray_hits_rect(a, v / length, rect)
    if p is None:
        return False
    return clearance < np.linalg.norm(p - a) < length - clearance


def specular_image(source, rect: RectSurface) -> np.ndarray:
    """Mirror image of `source` across the plane of `rect`."""
    dist = rect.signed_distance(source)
    if abs(dist) < _EPS:
        raise GeometryError(f"source lies on the plane of surface {rect.name!r}")
    return np.asarray(source, dtype=float) - 2.0 * dist * rect.normal


@dataclass(frozen=True)
class Trajectory:
    """Straight RX trajectory with static measurements padded at both ends."""

    start: np.ndarray
    end: np.ndarray
    n_positions: int = 128
    n_static_head: int = 14
    n_static_tail: int = 14
    speed: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "start", vec3(self.start))
        object.__setattr__(self, "end", vec3(self.end))
        if self.n_static_head < 0 or self.n_static_tail < 0:
            raise GeometryError("static pad counts must be non-negative")
        if self.n_static_head + self.n_static_tail >= self.n_positions:
            raise GeometryError("static pads must leave at least one moving position")
        if self.speed < 0:
            raise GeometryError("speed must be non-negative")

    @property
    def n_moving(self) -> int:
        return self.n_positions - self.n_static_head - self.n_static_tail

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    @property
    def heading(self) -> np.ndarray:
        return unit(self.end - self.start)

    def is_moving(self, index: int) -> bool:
        return self.n_static_head <= index < self.n_positions - self.n_static_tail

    def velocity(self, index: int) -> np.ndarray:
        if not self.is_moving(index) or self.length < _EPS:
            return np.zeros(3)
        return self.speed * self.heading


def trajectory_positions(t: Trajectory) -> np.ndarray:
    """All `n_positions` RX positions, shape (n_positions, 3).

    Head pads sit on `start`, tail pads on `end`, and the moving positions
    are uniformly spaced from `start` to `end` inclusive.
    """
    n_mov = t.n_moving
    if t.length < _EPS and n_mov > 1:
        raise GeometryError("zero-length trajectory with moving positions")
    if n_mov == 1:
        frac = np.array([0.0])
    else:
        frac = np.linspace(0.0, 1.0, n_mov)
    moving = t.start + frac[:, None] * (t.end - t.start)
    head = np.repeat(t.start[None], t.n_static_head, axis=0)
    tail = np.repeat(t.end[None], t.n_static_tail, axis=0)
    return np.concatenate([head, moving, tail], axis=0)


@dataclass
class SceneLayout:
    """TX pose, RX trajectory, RIS panel and the reflecting surfaces."""

    tx: np.ndarray
    trajectory: Trajectory
    ris_panel: object  # risbeam.ris.RisPanel, kept untyped to avoid a cycle
    surfaces: list = field(default_factory=list)
    blocker: Optional[RectSurface] = None

    def __post_init__(self):
        self.tx = vec3(self.tx)
        pts = [self.tx, self.trajectory.start, self.trajectory.end]
        for s in self.surfaces:
            for p in pts:
                if abs(s.signed_distance(p)) < 1e-9 and s.contains(p):
                    raise GeometryError(f"surface {s.name!r} overlaps a TX/RX position")

    def rx_positions(self) -> np.ndarray:
        return trajectory_positions(self.trajectory)
