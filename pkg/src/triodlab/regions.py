"""Convex planar regions used for energy bookkeeping.

Each region answers point membership (vectorized, boundary inclusive) and
clips a half-line to a parameter interval.  Every region here is convex,
so the clip of a ray is a single interval; rays lying exactly on a
boundary line count as inside, which fixes the measure-zero convention
for segments along a region edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Disk", "HalfPlane", "Rect", "Triangle", "Intersection"]

_EPS = 1e-12


@dataclass(frozen=True)
class HalfPlane:
    """{z : normal . z <= offset}."""

    normal: tuple[float, float]
    offset: float

    def contains(self, x, y):
        nx, ny = self.normal
        return nx * np.asarray(x) + ny * np.asarray(y) <= self.offset + _EPS

    def ray_interval(self, origin, direction, tmax):
        nx, ny = self.normal
        nd = nx * direction[0] + ny * direction[1]
        c = self.offset - (nx * origin[0] + ny * origin[1])
        if abs(nd) < _EPS:
            return (0.0, tmax) if c >= -_EPS else None
        t = c / nd
        if nd > 0:
            return (0.0, min(t, tmax)) if t >= 0 else None
        return (min(t, tmax), tmax) if t <= tmax else (0.0, tmax)


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0

    def contains(self, x, y):
        dx = np.asarray(x) - self.center[0]
        dy = np.asarray(y) - self.center[1]
        return dx * dx + dy * dy <= self.radius**2 + _EPS

    def ray_interval(self, origin, direction, tmax):
        ox = origin[0] - self.center[0]
        oy = origin[1] - self.center[1]
        b = ox * direction[0] + oy * direction[1]
        c = ox * ox + oy * oy - self.radius**2
        disc = b * b - c  # direction is unit
        if disc < 0:
            return None
        root = np.sqrt(disc)
        t0, t1 = -b - root, -b + root
        t0, t1 = max(t0, 0.0), min(t1, tmax)
        return (t0, t1) if t1 > t0 else None


def _halfplane_interval(hp: HalfPlane, origin, direction, tmax):
    return hp.ray_interval(origin, direction, tmax)


@dataclass(frozen=True)
class Intersection:
    """Intersection of convex constraints (each with contains/ray_interval)."""

    parts: tuple

    def contains(self, x, y):
        out = None
        for part in self.parts:
            m = part.contains(x, y)
            out = m if out is None else (out & m)
        return out

    def ray_interval(self, origin, direction, tmax):
        lo, hi = 0.0, tmax
        for part in self.parts:
            iv = part.ray_interval(origin, direction, tmax)
            if iv is None:
                return None
            lo, hi = max(lo, iv[0]), min(hi, iv[1])
            if hi <= lo:
                return None
        return (lo, hi)


def Rect(x0: float, x1: float, y0: float, y1: float) -> Intersection:
    """Axis-aligned rectangle [x0, x1] x [y0, y1]."""
    if x1 < x0 or y1 < y0:
        raise ValueError("rectangle bounds out of order")
    return Intersection((
        HalfPlane((-1.0, 0.0), -x0),
        HalfPlane((1.0, 0.0), x1),
        HalfPlane((0.0, -1.0), -y0),
        HalfPlane((0.0, 1.0), y1),
    ))


def Triangle(v1, v2, v3) -> Intersection:
    """Triangle given by vertices in any orientation."""
    verts = [np.asarray(v, dtype=float) for v in (v1, v2, v3)]
    # ensure counterclockwise
    area2 = np.cross(verts[1] - verts[0], verts[2] - verts[0])
    if area2 == 0:
        raise ValueError("degenerate triangle")
    if area2 < 0:
        verts = [verts[0], verts[2], verts[1]]
    planes = []
    for k in range(3):
        a, b = verts[k], verts[(k + 1) % 3]
        edge = b - a
        # inward normal is the ccw rotation of the edge; outward is cw
        nrm = np.array([edge[1], -edge[0]])
        nrm /= np.linalg.norm(nrm)
        planes.append(HalfPlane((float(nrm[0]), float(nrm[1])),
                                float(nrm @ a)))
    return Intersection(tuple(planes))
