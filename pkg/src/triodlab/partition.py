"""Sharp-interface geometry: sector partitions, triods, partition energy.

The plane splits into three 120-degree sectors D_1, D_2, D_3 around a
center; sector i covers polar angles in (2(i-1)pi/3, 2i pi/3) measured
from the tilt direction.  The three boundary rays form a triod.  The
sharp-interface energy of the partition over a window K is the surface
tension times the triod length inside K.

Conventions (fixed, measure zero but must be deterministic):
  * points exactly on a ray classify to the sector counterclockwise of
    the ray, and the center goes to sector 1;
  * triod segments lying exactly on the boundary of K count with their
    full length (see regions.py).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .potential import WellTriple

__all__ = [
    "ON_INTERFACE",
    "SectorPartition",
    "TriodGeometry",
    "classify",
    "triple_junction_map",
    "triod_length_in_disk",
    "triod_length_in_region",
    "partition_energy",
]

ON_INTERFACE = 0
_TWO_THIRDS_PI = 2.0 * np.pi / 3.0
ANGULAR_TOL = 1e-12


@dataclass(frozen=True)
class SectorPartition:
    """Three 120-degree sectors around `center`, tilted by `theta`."""

    center: tuple[float, float] = (0.0, 0.0)
    theta: float = 0.0


@dataclass(frozen=True)
class TriodGeometry:
    """Three rays from `center` at mutual 120-degree angles.

    `theta` is the tilt of the ray separating sectors 1 and 3 (the "13"
    ray) from the positive x-axis.  Ray k (k = 0, 1, 2) points at angle
    theta + 2 pi k / 3 and separates sector k+1 (counterclockwise side)
    from its clockwise neighbour.
    """

    center: tuple[float, float] = (0.0, 0.0)
    theta: float = 0.0

    def ray_angles(self) -> np.ndarray:
        return self.theta + _TWO_THIRDS_PI * np.arange(3)

    def ray_directions(self) -> np.ndarray:
        a = self.ray_angles()
        return np.stack([np.cos(a), np.sin(a)], axis=1)

    def ray_wells(self, k: int) -> tuple[int, int]:
        """(clockwise, counterclockwise) 1-based sector indices of ray k."""
        return ((3, 1), (1, 2), (2, 3))[k]

    def distance_to_rays(self, x, y):
        """Distance from points to each ray half-line; shape (3, ...)."""
        zx = np.asarray(x, dtype=float) - self.center[0]
        zy = np.asarray(y, dtype=float) - self.center[1]
        r = np.hypot(zx, zy)
        out = []
        for d in self.ray_directions():
            along = zx * d[0] + zy * d[1]
            perp = np.abs(-zx * d[1] + zy * d[0])
            out.append(np.where(along >= 0.0, perp, r))
        return np.stack(out)

    def distance(self, x, y):
        """Distance from points to the triod."""
        return np.min(self.distance_to_rays(x, y), axis=0)

    def signed_ray_distance(self, x, y, k: int):
        """Signed distance to the line of ray k, positive counterclockwise."""
        a = self.ray_angles()[k]
        zx = np.asarray(x, dtype=float) - self.center[0]
        zy = np.asarray(y, dtype=float) - self.center[1]
        return -zx * np.sin(a) + zy * np.cos(a)


def _relative_angle(part: SectorPartition, x, y):
    zx = np.asarray(x, dtype=float) - part.center[0]
    zy = np.asarray(y, dtype=float) - part.center[1]
    ang = np.arctan2(zy, zx) - part.theta
    return np.mod(ang, 2.0 * np.pi), np.hypot(zx, zy)


def classify(part: SectorPartition, x, y=None):
    """Sector index of a point, or ON_INTERFACE on a boundary ray.

    Accepts a single point (pair or 2-array) or separate coordinate
    arrays; returns an int or an int array.
    """
    if y is None:
        x, y = np.asarray(x, dtype=float)[..., 0], np.asarray(x, dtype=float)[..., 1]
    ang, r = _relative_angle(part, x, y)
    sector = np.minimum(np.floor(ang / _TWO_THIRDS_PI).astype(int), 2) + 1
    dray = np.minimum(np.mod(ang, _TWO_THIRDS_PI),
                      _TWO_THIRDS_PI - np.mod(ang, _TWO_THIRDS_PI))
    on_ray = (dray <= ANGULAR_TOL) | (r <= ANGULAR_TOL)
    out = np.where(on_ray, ON_INTERFACE, sector)
    return int(out) if out.ndim == 0 else out


def triple_junction_map(part: SectorPartition, wells: WellTriple, x, y=None):
    """Piecewise constant map sending sector i to well a_i.

    On-ray points take the value of the sector counterclockwise of the
    ray (the half-open angular interval convention); the center maps to
    a_1.
    """
    if y is None:
        x, y = np.asarray(x, dtype=float)[..., 0], np.asarray(x, dtype=float)[..., 1]
    ang, _ = _relative_angle(part, x, y)
    sector = np.minimum(np.floor(ang / _TWO_THIRDS_PI).astype(int), 2)
    return wells.as_array()[sector]


def triod_length_in_region(t: TriodGeometry, region, tmax: float = 1e12) -> float:
    """Total length of the three rays clipped to a convex region."""
    total = 0.0
    for d in t.ray_directions():
        iv = region.ray_interval(t.center, (float(d[0]), float(d[1])), tmax)
        if iv is not None:
            total += max(0.0, iv[1] - iv[0])
    return total


def triod_length_in_disk(t: TriodGeometry, radius: float) -> float:
    """Length of the triod inside the origin-centered disk of given radius."""
    from .regions import Disk

    if radius <= 0:
        raise ValueError("radius must be positive")
    return triod_length_in_region(t, Disk((0.0, 0.0), radius))


def partition_energy(t: TriodGeometry, sigma: float, region) -> float:
    """Sharp-interface energy sigma * H^1(triod within region)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return sigma * triod_length_in_region(t, region)
