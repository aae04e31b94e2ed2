"""Triple-well potentials on the plane of order parameters.

The model potential is

    W(u) = scale * |u - a_1|^2 |u - a_2|^2 |u - a_3|^2,

a smooth nonnegative function vanishing exactly at the three wells
a_1, a_2, a_3.  With the default equilateral wells (vertices of an
equilateral triangle inscribed in the unit circle) the potential is
invariant under the order-3 rotation of the u-plane that permutes the
wells, which forces the three surface tensions of the connecting 1D
profiles to coincide without any tuning.

Value, gradient and Hessian are available in closed form and are
vectorized over arbitrary batches of points.  `check_hypotheses`
verifies the structural assumptions (zeros only at the wells, well
Hessian bounds, outer coercivity, quadratic comparability near wells)
by dense sampling and reports violations instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "WellTriple",
    "Potential",
    "HypothesisCheck",
    "HypothesisReport",
    "make_triple_well",
    "evaluate",
    "check_hypotheses",
]


@dataclass(frozen=True)
class WellTriple:
    """The three zeros of the potential, as points in the u-plane."""

    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray

    @staticmethod
    def equilateral() -> "WellTriple":
        """Default wells: an equilateral triangle on the unit circle."""
        s = np.sqrt(3.0) / 2.0
        return WellTriple(
            a1=np.array([1.0, 0.0]),
            a2=np.array([-0.5, s]),
            a3=np.array([-0.5, -s]),
        )

    def as_array(self) -> np.ndarray:
        """Stack the wells into a (3, 2) array, row i = a_{i+1}."""
        return np.stack([np.asarray(self.a1, dtype=float),
                         np.asarray(self.a2, dtype=float),
                         np.asarray(self.a3, dtype=float)])

    def get(self, index: int) -> np.ndarray:
        """Well by 1-based index (matching the usual labelling a_1..a_3)."""
        return self.as_array()[index - 1]

    def min_separation(self) -> float:
        a = self.as_array()
        d = [np.linalg.norm(a[i] - a[j]) for i in range(3) for j in range(i + 1, 3)]
        return float(min(d))


@dataclass(frozen=True)
class Potential:
    """Product-form triple-well potential with cached hypothesis metadata.

    Attributes:
        wells: the three zeros.
        scale: positive multiplier on the product form.
        c1, c2: lower/upper bounds on the well Hessian eigenvalues.
        coercivity_radius: radius M beyond which W_u(u).u > 0 is required.
        comparability_radius: radius delta_W below which W is comparable
            to the squared distance to the nearest well.
    """

    wells: WellTriple
    scale: float = 1.0
    c1: float = field(default=0.0)
    c2: float = field(default=0.0)
    coercivity_radius: float = 2.0
    comparability_radius: float = 0.1

    # -- evaluation ---------------------------------------------------

    def value(self, u) -> np.ndarray | float:
        """W(u); vectorized over leading axes of u (..., 2)."""
        u = np.asarray(u, dtype=float)
        a = self.wells.as_array()
        out = np.full(u.shape[:-1], self.scale, dtype=float)
        for i in range(3):
            d0 = u[..., 0] - a[i, 0]
            d1 = u[..., 1] - a[i, 1]
            out *= d0 * d0 + d1 * d1
        return out if out.ndim else float(out)

    def gradient(self, u) -> np.ndarray:
        """W_u(u); same batch shape as u."""
        u = np.asarray(u, dtype=float)
        a = self.wells.as_array()
        d = [(u[..., 0] - a[i, 0], u[..., 1] - a[i, 1]) for i in range(3)]
        f = [d0 * d0 + d1 * d1 for (d0, d1) in d]
        out = np.zeros_like(u)
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            fjk = f[j] * f[k]
            out[..., 0] += 2.0 * d[i][0] * fjk
            out[..., 1] += 2.0 * d[i][1] * fjk
        return self.scale * out

    def hessian(self, u) -> np.ndarray:
        """W_uu(u) as (..., 2, 2) symmetric matrices."""
        u = np.asarray(u, dtype=float)
        a = self.wells.as_array()
        d = u[..., None, :] - a          # (..., 3, 2)
        f = np.sum(d * d, axis=-1)       # (..., 3)
        eye = np.eye(2)
        out = np.zeros(u.shape[:-1] + (2, 2))
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            out += 2.0 * (f[..., j] * f[..., k])[..., None, None] * eye
        for i, j, k in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
            gij = 4.0 * (d[..., i, :, None] * d[..., j, None, :])
            out += f[..., k, None, None] * (gij + np.swapaxes(gij, -1, -2))
        return self.scale * out

    def min_well_distance(self, u) -> np.ndarray:
        """min_i |u - a_i|, vectorized."""
        u = np.asarray(u, dtype=float)
        a = self.wells.as_array()
        d = u[..., None, :] - a
        return np.sqrt(np.min(np.sum(d * d, axis=-1), axis=-1))


def make_triple_well(wells: WellTriple | None = None, scale: float = 1.0) -> Potential:
    """Construct the product-form potential and cache its well data.

    The Hessian at a well a_i is 2*scale*|a_i-a_j|^2|a_i-a_k|^2 * Id (the
    cross terms vanish because the gradient factor at the well is zero),
    so c1 and c2 are the min/max of those isotropic values over the wells.

    Raises ValueError on coincident wells or nonpositive scale.
    """
    if wells is None:
        wells = WellTriple.equilateral()
    a = wells.as_array()
    if not np.all(np.isfinite(a)):
        raise ValueError("wells must be finite points")
    for i in range(3):
        for j in range(i + 1, 3):
            if np.linalg.norm(a[i] - a[j]) < 1e-12:
                raise ValueError(f"wells a_{i+1} and a_{j+1} coincide")
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    curv = []
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        fj = float(np.sum((a[i] - a[j]) ** 2))
        fk = float(np.sum((a[i] - a[k]) ** 2))
        curv.append(2.0 * scale * fj * fk)
    outer = 2.0 * float(np.max(np.linalg.norm(a, axis=1)))
    return Potential(
        wells=wells,
        scale=float(scale),
        c1=min(curv),
        c2=max(curv),
        coercivity_radius=outer,
        comparability_radius=0.1,
    )


def evaluate(p: Potential, u) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian of W at a single point."""
    u = np.asarray(u, dtype=float)
    return float(p.value(u)), p.gradient(u), p.hessian(u)


def interface_width(p: Potential) -> float:
    """Length scale of the diffuse transition layer, 4/sqrt(c1)."""
    return 4.0 / np.sqrt(p.c1)


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    detail: str
    witness: np.ndarray | None = None


@dataclass(frozen=True)
class HypothesisReport:
    """Outcome of the sampled structural checks on a potential.

    `comparability_lower` / `comparability_upper` are the estimated
    constants c and C with  c/2 * delta^2 <= W <= C/2 * delta^2  on small
    circles |u - a_i| = delta.
    """

    checks: tuple[HypothesisCheck, ...]
    comparability_lower: float
    comparability_upper: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> HypothesisCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def check_hypotheses(p: Potential, sample_count: int = 20000,
                     seed: int = 0,
                     comparability_delta: float | None = None) -> HypothesisReport:
    """Verify the structural hypotheses on W by dense sampling.

    Checks performed:
      * zeros_only_at_wells: min of W over samples away from the wells
        is strictly positive;
      * well_comparability: on circles |u - a_i| = delta for a range of
        delta below the comparability radius (or the single radius
        `comparability_delta` when given), W stays within quadratic
        envelopes; the observed constants are reported;
      * outer_coercivity: W_u(u).u > 0 on the annulus
        coercivity_radius < |u| <= 2*coercivity_radius.

    Violations are reported with a witnessing sample point, not raised.
    """
    if sample_count < 1000:
        raise ValueError("sample_count must be at least 1000")
    rng = np.random.default_rng(seed)
    a = p.wells.as_array()
    checks: list[HypothesisCheck] = []

    # (i) zeros only at the wells
    box = 1.5 * p.coercivity_radius
    pts = rng.uniform(-box, box, size=(sample_count, 2))
    far = p.min_well_distance(pts) >= 0.05 * p.wells.min_separation()
    wvals = p.value(pts[far])
    if wvals.size and np.min(wvals) > 0:
        checks.append(HypothesisCheck(
            "zeros_only_at_wells", True,
            f"min W away from wells = {np.min(wvals):.3e} over {far.sum()} samples"))
    else:
        k = int(np.argmin(wvals))
        checks.append(HypothesisCheck(
            "zeros_only_at_wells", False,
            f"W = {wvals[k]:.3e} at a point {p.min_well_distance(pts[far][k]):.3f} "
            "away from every well",
            witness=pts[far][k]))

    # (ii) quadratic comparability near the wells
    n_ang = max(64, sample_count // 100)
    angles = np.linspace(0.0, 2.0 * np.pi, n_ang, endpoint=False)
    ring = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if comparability_delta is not None:
        deltas = (comparability_delta / p.comparability_radius,)
    else:
        deltas = (0.25, 0.5, 1.0)
    ratios = []
    for delta in deltas:
        d = delta * p.comparability_radius
        for i in range(3):
            w_ring = p.value(a[i] + d * ring)
            ratios.append(2.0 * w_ring / d**2)
    ratios = np.concatenate(ratios)
    c_lo, c_hi = float(np.min(ratios)), float(np.max(ratios))
    checks.append(HypothesisCheck(
        "well_comparability", c_lo > 0,
        f"estimated c = {c_lo:.4f}, C = {c_hi:.4f} on sampled circles"))

    # (iii) outer coercivity W_u(u).u > 0 on the annulus (M, 2M]
    M = p.coercivity_radius
    rr = rng.uniform(M, 2.0 * M, size=sample_count)
    th = rng.uniform(0.0, 2.0 * np.pi, size=sample_count)
    ann = np.stack([rr * np.cos(th), rr * np.sin(th)], axis=1)
    dots = np.sum(p.gradient(ann) * ann, axis=-1)
    if np.all(dots > 0):
        checks.append(HypothesisCheck(
            "outer_coercivity", True,
            f"min W_u.u = {np.min(dots):.3e} on the sampled annulus"))
    else:
        k = int(np.argmin(dots))
        checks.append(HypothesisCheck(
            "outer_coercivity", False,
            f"W_u.u = {dots[k]:.3e} at |u| = {rr[k]:.3f}",
            witness=ann[k]))

    return HypothesisReport(checks=tuple(checks),
                            comparability_lower=c_lo,
                            comparability_upper=c_hi)
