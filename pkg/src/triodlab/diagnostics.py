"""Quantitative diagnostics on relaxed triple-junction fields.

Everything here is read-only on a field snapshot.  The diagnostics
measure, at finite scale, the sharp energy growth of disks and
triangles, energy equipartition between gradient and potential parts,
the two slice-integral conservation laws, the localization of the
diffuse interface around a fitted triod, the distance of vertical
slices to the 1D connection family, the optimal translation h(x) and
its derivative identity, exponential decay rates into the phase
sectors, and a maximum-principle bound on rectangles.

All region-restricted quantities are confined to the inner region
|z| <= 3 Lx / 4 (and shapes must keep two interface widths clear of the
boundary) to suppress the influence of the Dirichlet ring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .field2d import Field2D, Section1D, energy, slice_field
from .hetero1d import Profile1D, sample_profile
from .partition import TriodGeometry
from .potential import Potential, WellTriple, interface_width
from .regions import Disk, HalfPlane, Intersection, Rect, Triangle

__all__ = [
    "GrowthRow",
    "EquipartitionRow",
    "GlobalDeformation",
    "HamiltonianRow",
    "LocalizationReport",
    "SliceRow",
    "SliceSummary",
    "HPrimeCheck",
    "DecayFit",
    "MaxPrincipleResult",
    "SectorRegion",
    "inner_radius",
    "triangle_window",
    "energy_growth",
    "equipartition_report",
    "global_deformation",
    "hamiltonian_profile",
    "interface_report",
    "fit_triod",
    "slice_analysis",
    "h_prime_check",
    "decay_fit",
    "max_principle_check",
]


def inner_radius(f: Field2D) -> float:
    """Radius of the region where diagnostics are trusted."""
    return 0.75 * f.grid.halfwidth


def _inner_disk(f: Field2D) -> Disk:
    return Disk((0.0, 0.0), inner_radius(f))


# ---------------------------------------------------------------------------
# energy growth

@dataclass(frozen=True)
class GrowthRow:
    shape: str      # "disk" or "triangle"
    R: float
    E: float
    excess: float   # E - 3 sigma R


def triangle_window(R: float, triod: TriodGeometry) -> Intersection:
    """Equilateral window with a vertical side at x = R in the triod frame.

    In the frame of the triod (center at its junction, x-axis along the
    ray toward sector boundary 1|3) the vertices sit at (R, +-sqrt(3) R)
    and (-2R, 0); the side length is 2 sqrt(3) R and the centroid is the
    junction.
    """
    c, s = math.cos(triod.theta), math.sin(triod.theta)
    rot = np.array([[c, -s], [s, c]])
    verts = np.array([[R, math.sqrt(3.0) * R],
                      [R, -math.sqrt(3.0) * R],
                      [-2.0 * R, 0.0]])
    verts = verts @ rot.T + np.asarray(triod.center)
    return Triangle(verts[0], verts[1], verts[2])


def _check_window_margin(f: Field2D, p: Potential, pts: np.ndarray):
    lim = f.grid.halfwidth - 2.0 * interface_width(p)
    if np.any(np.abs(pts) > lim):
        raise ValueError(
            "diagnostic window reaches within two interface widths of the "
            "domain boundary")


def energy_growth(f: Field2D, p: Potential, shapes, sigma: float,
                  triod: TriodGeometry | None = None) -> list[GrowthRow]:
    """Energy of disks B_R / triangles S_R against the sharp line 3 sigma R.

    `shapes` is an iterable of ("disk", R) or ("triangle", R); triangles
    are oriented by the fitted triod (required when present).
    """
    rows = []
    for kind, R in shapes:
        if kind == "disk":
            if R > inner_radius(f):
                raise ValueError(f"disk radius {R} outside the inner region")
            region = Disk((0.0, 0.0), R)
        elif kind == "triangle":
            if triod is None:
                raise ValueError("triangle shapes need the fitted triod")
            region = triangle_window(R, triod)
            verts = np.array([[R, math.sqrt(3.0) * R],
                              [R, -math.sqrt(3.0) * R],
                              [-2.0 * R, 0.0]])
            c, s = math.cos(triod.theta), math.sin(triod.theta)
            rot = np.array([[c, -s], [s, c]])
            _check_window_margin(f, p, verts @ rot.T + np.asarray(triod.center))
        else:
            raise ValueError(f"unknown shape kind {kind!r}")
        br = energy(f, p, region)
        rows.append(GrowthRow(shape=kind, R=float(R), E=br.total,
                              excess=br.total - 3.0 * sigma * R))
    return rows


# ---------------------------------------------------------------------------
# equipartition

@dataclass(frozen=True)
class EquipartitionRow:
    R: float
    pot_over_R: float          # (1/R) int_{B_R} W
    grad_over_2R: float        # (1/2R) int_{B_R} |grad u|^2
    tang_over_2R: float        # (1/2R) int_{B_R} |tangential du|^2
    dev_pot: float             # relative deviation from 3 sigma / 2
    dev_grad: float
    ann_radial_over_R: float   # (1/R) int_{B_2R \ B_R} |radial du|^2
    ann_equi_mass_over_R: float  # (1/R) int |W - 1/2 |grad u|^2|
    ann_radial_fraction: float


def equipartition_report(f: Field2D, p: Potential, radii,
                         sigma: float) -> list[EquipartitionRow]:
    """Normalized disk energies and annulus defect measures per radius."""
    target = 1.5 * sigma
    rows = []
    from .field2d import _cell_fields  # shared cell-centered stencils
    Xc, Yc = f.grid.cell_centers()
    rr = np.hypot(Xc, Yc)
    dx, dy, um = _cell_fields(f)
    dx2 = np.sum(dx * dx, axis=-1)
    dy2 = np.sum(dy * dy, axis=-1)
    wvals = p.value(um)
    area = f.grid.hx ** 2
    rmax = inner_radius(f)
    for R in radii:
        if 2.0 * R > rmax:
            raise ValueError(f"annulus outer radius {2*R} beyond inner region")
        br = energy(f, p, Disk((0.0, 0.0), R))
        pot_over_R = br.potential / R
        grad_over_2R = br.dirichlet / R
        tang_over_2R = br.tangential / R
        ann = (rr > R) & (rr <= 2.0 * R)
        ex, ey = Xc / np.maximum(rr, 1e-30), Yc / np.maximum(rr, 1e-30)
        dr = dx * ex[..., None] + dy * ey[..., None]
        dr2 = np.sum(dr * dr, axis=-1)
        ann_rad = float(np.sum(dr2[ann])) * area
        ann_grad = float(np.sum((dx2 + dy2)[ann])) * area
        ann_mass = float(np.sum(np.abs(wvals - 0.5 * (dx2 + dy2))[ann])) * area
        rows.append(EquipartitionRow(
            R=float(R),
            pot_over_R=pot_over_R,
            grad_over_2R=grad_over_2R,
            tang_over_2R=tang_over_2R,
            dev_pot=pot_over_R / target - 1.0,
            dev_grad=grad_over_2R / target - 1.0,
            ann_radial_over_R=ann_rad / R,
            ann_equi_mass_over_R=ann_mass / R,
            ann_radial_fraction=ann_rad / ann_grad if ann_grad > 0 else 0.0,
        ))
    return rows


# ---------------------------------------------------------------------------
# global deformation

@dataclass(frozen=True)
class GlobalDeformation:
    radial_total: float        # int over inner region of |radial du|^2
    horizontal_total: float    # int over {x > 0} inner of |du/dx|^2
    strip_rows: tuple          # (R, E, E - sigma R) over strips {0 < x < R}


def global_deformation(f: Field2D, p: Potential, sigma: float,
                       strip_radii=(10.0, 15.0, 20.0, 25.0),
                       triod: TriodGeometry | None = None) -> GlobalDeformation:
    """Radial and horizontal deformation masses plus strip energies.

    The horizontal bound is meaningful when the junction's 1|3 ray runs
    near the positive x-axis, so a fitted triod with a large tilt is
    rejected.
    """
    if triod is not None and abs(triod.theta) > np.pi / 12:
        raise ValueError("fitted triod tilt too large for horizontal diagnostics")
    inner = _inner_disk(f)
    br_inner = energy(f, p, inner)
    radial_total = 2.0 * br_inner.radial
    half = Intersection((inner, HalfPlane((-1.0, 0.0), 0.0)))
    horizontal_total = energy(f, p, half).horizontal
    Lx = f.grid.halfwidth
    rows = []
    for R in strip_radii:
        if R > inner.radius:
            continue
        strip = Rect(0.0, R, -Lx, Lx)
        E = energy(f, p, strip).total
        rows.append((float(R), E, E - sigma * R))
    return GlobalDeformation(radial_total, horizontal_total, tuple(rows))


# ---------------------------------------------------------------------------
# slice integrals

@dataclass(frozen=True)
class HamiltonianRow:
    x: float
    G: float
    H: float


def _section_derivatives(f: Field2D, x: float):
    """Section at x plus its y- and x-derivatives (central stencils)."""
    hx = f.grid.hx
    sec = slice_field(f, x)
    lo = max(x - hx, -f.grid.halfwidth)
    hi = min(x + hx, f.grid.halfwidth)
    left = slice_field(f, lo)
    right = slice_field(f, hi)
    dxu = (right.values - left.values) / (hi - lo)
    dyu = np.gradient(sec.values, hx, axis=0, edge_order=2)
    return sec, dyu, dxu


def hamiltonian_profile(f: Field2D, p: Potential, xs) -> list[HamiltonianRow]:
    """The two slice integrals that are conserved for entire solutions.

    G(x) integrates 1/2(|du/dy|^2 - |du/dx|^2) + W(u) over the vertical
    slice and matches the 1D surface tension; H(x) integrates
    du/dx . du/dy and matches zero.
    """
    rows = []
    for x in xs:
        if x <= 0:
            raise ValueError("slice integrals are taken at positive x")
        if x > inner_radius(f):
            raise ValueError(f"x = {x} outside the inner region")
        sec, dyu, dxu = _section_derivatives(f, x)
        gint = (0.5 * (np.sum(dyu * dyu, axis=1) - np.sum(dxu * dxu, axis=1))
                + p.value(sec.values))
        hint = np.sum(dxu * dyu, axis=1)
        rows.append(HamiltonianRow(
            x=float(x),
            G=float(np.trapezoid(gint, sec.y)),
            H=float(np.trapezoid(hint, sec.y)),
        ))
    return rows


# ---------------------------------------------------------------------------
# diffuse interface localization

@dataclass(frozen=True)
class LocalizationReport:
    delta: float
    triod: TriodGeometry
    max_dist: float
    cell_count: int
    width_by_x: np.ndarray   # rows (x, width, ymin, ymax)
    theta_by_R: np.ndarray   # rows (R, theta)
    fit_rms: float


def _triod_fit_cost(pts: np.ndarray, t: TriodGeometry) -> float:
    return float(np.sum(t.distance(pts[:, 0], pts[:, 1]) ** 2))


def _center_update(pts: np.ndarray, t: TriodGeometry) -> TriodGeometry:
    """Closed-form least-squares center given ray assignment."""
    dmat = t.distance_to_rays(pts[:, 0], pts[:, 1])
    assign = np.argmin(dmat, axis=0)
    angs = t.ray_angles()
    A = np.zeros((2, 2))
    b = np.zeros(2)
    for k in range(3):
        sel = pts[assign == k]
        if len(sel) == 0:
            continue
        nrm = np.array([-np.sin(angs[k]), np.cos(angs[k])])
        nn = np.outer(nrm, nrm)
        A += len(sel) * nn
        b += nn @ np.sum(sel, axis=0)
    if np.linalg.det(A) < 1e-12:
        return t
    center = np.linalg.solve(A, b)
    return TriodGeometry((float(center[0]), float(center[1])), t.theta)


def fit_triod(pts: np.ndarray, theta_scan: int = 61,
              center0=(0.0, 0.0)) -> tuple[TriodGeometry, float]:
    """Least-squares triod through a point cloud.

    Coordinate descent: for each tilt in a scan over the fundamental
    interval [-pi/3, pi/3) the center is updated in closed form a few
    times; the best tilt is then refined by golden-section search.
    Returns the fitted triod and the rms point distance.
    """
    def cost_for_theta(theta: float) -> tuple[float, TriodGeometry]:
        t = TriodGeometry(tuple(center0), float(theta))
        for _ in range(6):
            t = _center_update(pts, t)
        return _triod_fit_cost(pts, t), t

    best = (np.inf, None)
    thetas = np.linspace(-np.pi / 3, np.pi / 3, theta_scan, endpoint=False)
    for th in thetas:
        c, t = cost_for_theta(th)
        if c < best[0]:
            best = (c, t)
    step = thetas[1] - thetas[0]
    a = best[1].theta - step
    b = best[1].theta + step
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    c1m = b - gr * (b - a)
    c2m = a + gr * (b - a)
    f1, t1 = cost_for_theta(c1m)
    f2, t2 = cost_for_theta(c2m)
    for _ in range(40):
        if f1 < f2:
            b, c2m, f2, t2 = c2m, c1m, f1, t1
            c1m = b - gr * (b - a)
            f1, t1 = cost_for_theta(c1m)
        else:
            a, c1m, f1, t1 = c1m, c2m, f2, t2
            c2m = a + gr * (b - a)
            f2, t2 = cost_for_theta(c2m)
    cost, t = (f1, t1) if f1 < f2 else (f2, t2)
    return t, float(np.sqrt(cost / max(len(pts), 1)))


def interface_report(f: Field2D, wells: WellTriple, delta: float,
                     theta_radii=()) -> LocalizationReport:
    """Extract the diffuse interface and measure its triod geometry.

    The diffuse interface is the set of grid nodes (within the inner
    region) at distance at least delta from every well.  A triod is
    fitted by least squares; the report carries the maximum distance of
    interface cells to the fitted triod, per-column vertical widths, and
    refitted tilts on subdisks B_R for the requested radii.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    X, Y = f.grid.mesh()
    mind = f.min_well_distance(wells)
    inner = np.hypot(X, Y) <= inner_radius(f)
    mask = (mind >= delta) & inner
    if not np.any(mask):
        raise ValueError(f"diffuse interface is empty at delta = {delta}")
    pts = np.stack([X[mask], Y[mask]], axis=1)
    triod, rms = fit_triod(pts)
    dists = triod.distance(pts[:, 0], pts[:, 1])
    ax = f.grid.axis
    rows = []
    colmask = np.any(mask, axis=1)
    for i in np.nonzero(colmask)[0]:
        ys = Y[i][mask[i]]
        rows.append((ax[i], float(ys.max() - ys.min()),
                     float(ys.min()), float(ys.max())))
    theta_rows = []
    for R in theta_radii:
        sub = pts[np.hypot(pts[:, 0], pts[:, 1]) <= R]
        if len(sub) < 10:
            continue
        tR, _ = fit_triod(sub)
        theta_rows.append((float(R), tR.theta))
    return LocalizationReport(
        delta=float(delta), triod=triod, max_dist=float(np.max(dists)),
        cell_count=int(mask.sum()),
        width_by_x=np.asarray(rows, dtype=float),
        theta_by_R=np.asarray(theta_rows, dtype=float).reshape(-1, 2),
        fit_rms=rms)


# ---------------------------------------------------------------------------
# slice-to-connection comparison

@dataclass(frozen=True)
class SliceRow:
    x: float
    J: float                # slice line energy
    excess: float           # J - sigma_grid (same-grid reference)
    d0: float               # L2 distance to the translated connection
    h: float                # optimal translation
    orth_residual: float    # first-order optimality of h
    G: float
    H: float
    sup_dev: float
    d1_proxy: float         # H1 distance evaluated at the L2-optimal shift
    in_bad_set: bool
    bracket_ok: bool


@dataclass(frozen=True)
class SliceSummary:
    sigma_ref: float            # line energy of the connection on this grid
    badset_measure: float
    h_total_variation: float
    h_limit: float
    alpha_hat: float            # fitted coercivity constant, nan if no data
    eligible_rows: int


class _ShiftFitter:
    """L2-optimal translation of a reference connection against sections."""

    def __init__(self, prof: Profile1D, y: np.ndarray):
        self.y = y
        self.prof = prof
        g = prof.grid
        self.pgrid = g
        self.psamples = prof.samples
        self.pderiv = np.gradient(prof.samples, prof.dy, axis=0, edge_order=2)
        self.pderiv2 = np.gradient(self.pderiv, prof.dy, axis=0, edge_order=2)
        self.unorm2 = float(np.trapezoid(np.sum(self.pderiv ** 2, axis=1),
                                         g))

    def _interp(self, arr: np.ndarray, yq: np.ndarray) -> np.ndarray:
        out = np.empty(yq.shape + (2,))
        for c in range(2):
            out[..., c] = np.interp(yq, self.pgrid, arr[:, c])
        return out

    def shifted(self, h: float) -> np.ndarray:
        return self._interp(self.psamples, self.y - h)

    def shifted_deriv(self, h: float) -> np.ndarray:
        return self._interp(self.pderiv, self.y - h)

    def shifted_deriv2(self, h: float) -> np.ndarray:
        return self._interp(self.pderiv2, self.y - h)

    def dist2(self, values: np.ndarray, h: float) -> float:
        d = values - self.shifted(h)
        return float(np.trapezoid(np.sum(d * d, axis=1), self.y))

    def orth(self, values: np.ndarray, h: float) -> float:
        d = values - self.shifted(h)
        return float(np.trapezoid(np.sum(d * self.shifted_deriv(h), axis=1),
                                  self.y))

    def fit(self, values: np.ndarray, bracket: float) -> tuple[float, bool]:
        """Golden-section over [-bracket, bracket] plus one Newton polish."""
        coarse = np.linspace(-bracket, bracket, 65)
        vals = [self.dist2(values, h) for h in coarse]
        k = int(np.argmin(vals))
        if k == 0 or k == len(coarse) - 1:
            return float(coarse[k]), False
        a, b = coarse[k - 1], coarse[k + 1]
        gr = (np.sqrt(5.0) - 1.0) / 2.0
        c1 = b - gr * (b - a)
        c2 = a + gr * (b - a)
        f1 = self.dist2(values, c1)
        f2 = self.dist2(values, c2)
        for _ in range(60):
            if f1 < f2:
                b, c2, f2 = c2, c1, f1
                c1 = b - gr * (b - a)
                f1 = self.dist2(values, c1)
            else:
                a, c1, f1 = c1, c2, f2
                c2 = a + gr * (b - a)
                f2 = self.dist2(values, c2)
        h = 0.5 * (a + b)
        # Newton polish on the orthogonality residual
        for _ in range(3):
            g = self.orth(values, h)
            up = self.shifted_deriv(h)
            upp = self.shifted_deriv2(h)
            d = values - self.shifted(h)
            gp = float(np.trapezoid(
                np.sum(up * up - d * upp, axis=1), self.y))
            if abs(gp) < 1e-14:
                break
            h_new = h - g / gp
            if abs(h_new - h) > 2.0 * abs(b - a) + 1e-3:
                break
            h = h_new
        return float(h), True


def _line_energy(values: np.ndarray, y: np.ndarray, p: Potential) -> float:
    """Edge-form line energy matching the 1D solver's discretization."""
    dy = y[1] - y[0]
    dv = np.diff(values, axis=0)
    kin = 0.5 * float(np.sum(dv * dv)) / dy
    w = p.value(values)
    pot = dy * (float(np.sum(w)) - 0.5 * (w[0] + w[-1]))
    return kin + pot


def slice_analysis(f: Field2D, p: Potential, prof: Profile1D, xs,
                   eps: float, sigma_ref: float | None = None
                   ) -> tuple[list[SliceRow], SliceSummary]:
    """Compare vertical slices to the translated connection family.

    Per slice: the L2-optimal translation h(x) (golden-section bracketed
    by half the domain, polished by Newton on the orthogonality residual),
    the distance d0 at the optimum, the slice line energy J against a
    same-grid reference sigma_ref, the slice integrals G and H, the sup
    deviation, and membership of the bad set where the H1-at-h proxy
    distance exceeds eps.

    sigma_ref defaults to the line energy of the reference connection
    resampled on the slice grid; pass the grid-level connection energy
    for a sharper floor.  The summary carries the bad-set measure, total
    variation and tail mean of h, and the coercivity ratio
    alpha_hat = min (J - sigma_ref) / d0^2 over eligible rows.
    """
    xs = np.asarray(list(xs), dtype=float)
    if np.any(np.diff(xs) <= 0):
        raise ValueError("xs must be strictly increasing")
    if np.any(xs > inner_radius(f)) or np.any(xs < -inner_radius(f)):
        raise ValueError("xs outside the inner region")
    y = f.grid.axis
    fitter = _ShiftFitter(prof, y)
    if sigma_ref is None:
        sigma_ref = _line_energy(fitter.shifted(0.0), y, p)
    bracket = 0.5 * f.grid.halfwidth
    rows: list[SliceRow] = []
    for x in xs:
        sec, dyu, dxu = _section_derivatives(f, x)
        vals = sec.values
        h, ok = fitter.fit(vals, bracket)
        d = vals - fitter.shifted(h)
        d0 = float(np.sqrt(np.trapezoid(np.sum(d * d, axis=1), y)))
        orth = fitter.orth(vals, h)
        J = _line_energy(vals, y, p)
        dd = dyu - fitter.shifted_deriv(h)
        d1sq = d0 ** 2 + float(np.trapezoid(np.sum(dd * dd, axis=1), y))
        d1 = float(np.sqrt(d1sq))
        gint = (0.5 * (np.sum(dyu * dyu, axis=1) - np.sum(dxu * dxu, axis=1))
                + p.value(vals))
        G = float(np.trapezoid(gint, y))
        H = float(np.trapezoid(np.sum(dxu * dyu, axis=1), y))
        sup = float(np.max(np.linalg.norm(d, axis=1)))
        rows.append(SliceRow(
            x=float(x), J=J, excess=J - sigma_ref, d0=d0, h=h,
            orth_residual=orth, G=G, H=H, sup_dev=sup, d1_proxy=d1,
            in_bad_set=bool(d1 >= eps or not ok), bracket_ok=ok))

    # measure of the bad set: trapezoid weights over the xs samples
    w = np.zeros(len(xs))
    if len(xs) > 1:
        w[1:-1] = 0.5 * (xs[2:] - xs[:-2])
        w[0] = 0.5 * (xs[1] - xs[0])
        w[-1] = 0.5 * (xs[-1] - xs[-2])
    bad = np.array([r.in_bad_set for r in rows])
    badset_measure = float(np.sum(w[bad]))
    good = [r for r in rows if r.bracket_ok]
    hs = np.array([r.h for r in good])
    h_tv = float(np.sum(np.abs(np.diff(hs)))) if len(hs) > 1 else 0.0
    tail = hs[3 * len(hs) // 4:] if len(hs) else np.array([np.nan])
    ratios = [r.excess / r.d0 ** 2 for r in rows
              if not r.in_bad_set and r.d0 > 0]
    alpha_hat = float(min(ratios)) if ratios else float("nan")
    summary = SliceSummary(
        sigma_ref=float(sigma_ref),
        badset_measure=badset_measure,
        h_total_variation=h_tv,
        h_limit=float(np.mean(tail)),
        alpha_hat=alpha_hat,
        eligible_rows=len(ratios))
    return rows, summary


@dataclass(frozen=True)
class HPrimeCheck:
    x: float
    dx: float
    fd: float        # centered difference of h across x +- dx
    formula: float   # slice-integral expression for h'(x)
    abs_diff: float
    denominator: float
    flagged: bool    # denominator left its trusted regime


def h_prime_check(f: Field2D, p: Potential, prof: Profile1D,
                  x: float, dx: float) -> HPrimeCheck:
    """Check the derivative identity for the optimal translation.

    The translation derivative h'(x) of the L2-optimal shift satisfies

        h'(x) = - int du/dx . U'(y - h) dy
                / int ( |U'(y-h)|^2 + U''(y-h) . (u - U(y-h)) ) dy,

    obtained by differentiating the orthogonality identity in x (the
    denominator keeps the second-order remainder term).  The finite
    difference side uses the fitted shifts at x +- dx.
    """
    y = f.grid.axis
    fitter = _ShiftFitter(prof, y)
    bracket = 0.5 * f.grid.halfwidth
    hm, okm = fitter.fit(slice_field(f, x - dx).values, bracket)
    hp, okp = fitter.fit(slice_field(f, x + dx).values, bracket)
    fd = (hp - hm) / (2.0 * dx)
    sec, _, dxu = _section_derivatives(f, x)
    h0, ok0 = fitter.fit(sec.values, bracket)
    up = fitter.shifted_deriv(h0)
    upp = fitter.shifted_deriv2(h0)
    dvals = sec.values - fitter.shifted(h0)
    num = -float(np.trapezoid(np.sum(dxu * up, axis=1), y))
    den = float(np.trapezoid(
        np.sum(up * up + upp * dvals, axis=1), y))
    flagged = (den < 0.5 * fitter.unorm2) or not (okm and okp and ok0)
    formula = num / den if den != 0 else float("nan")
    return HPrimeCheck(x=float(x), dx=float(dx), fd=fd, formula=formula,
                       abs_diff=abs(fd - formula), denominator=den,
                       flagged=bool(flagged))


# ---------------------------------------------------------------------------
# exponential decay into the sectors

@dataclass(frozen=True)
class SectorRegion:
    """Angular window about the triod center: angle within +-halfwidth
    of `bearing` (radians), radius within [rmin, rmax]."""

    bearing: float
    halfwidth: float = np.pi / 12
    rmin: float = 0.0
    rmax: float = np.inf


@dataclass(frozen=True)
class DecayFit:
    K: float
    k: float
    rms_log_residual: float
    n_points: int
    region: str


def decay_fit(f: Field2D, wells: WellTriple, region: SectorRegion,
              triod: TriodGeometry, delta: float = 0.3) -> DecayFit:
    """Exponential decay rate of the well distance away from the triod.

    Least-squares line through (dist(z, triod), log min_i |u - a_i|) over
    grid nodes in the angular window, keeping the linearized band
    min distance in [1e-6, delta].  Needs at least 20 usable points.
    """
    X, Y = f.grid.mesh()
    mind = f.min_well_distance(wells)
    zx, zy = X - triod.center[0], Y - triod.center[1]
    r = np.hypot(zx, zy)
    ang = np.arctan2(zy, zx)
    dphi = np.abs(np.angle(np.exp(1j * (ang - region.bearing))))
    sel = ((dphi <= region.halfwidth) & (r >= region.rmin)
           & (r <= min(region.rmax, inner_radius(f)))
           & (np.hypot(X, Y) <= inner_radius(f)))
    band = (mind >= 1e-6) & (mind <= delta)
    use = sel & band
    if use.sum() < 20:
        raise ValueError(
            f"only {int(use.sum())} usable points in the decay window")
    d = triod.distance(X[use], Y[use])
    logm = np.log(mind[use])
    coef = np.polyfit(d, logm, 1)
    fitvals = np.polyval(coef, d)
    rms = float(np.sqrt(np.mean((fitvals - logm) ** 2)))
    return DecayFit(K=float(np.exp(coef[1])), k=float(-coef[0]),
                    rms_log_residual=rms, n_points=int(use.sum()),
                    region=f"sector(bearing={region.bearing:.3f}, "
                           f"hw={region.halfwidth:.3f})")


# ---------------------------------------------------------------------------
# variational maximum principle check

@dataclass(frozen=True)
class MaxPrincipleResult:
    holds: bool
    hypothesis_met: bool
    max_boundary_deviation: float
    max_interior_deviation: float


def max_principle_check(f: Field2D, wells: WellTriple, rect, i: int,
                        r: float) -> MaxPrincipleResult:
    """If |u - a_i| <= r on the boundary of the rectangle, it must hold inside.

    `rect` is (x0, x1, y0, y1) in domain coordinates; the check runs on
    the grid nodes it contains.
    """
    x0, x1, y0, y1 = rect
    ax = f.grid.axis
    isel = np.nonzero((ax >= x0) & (ax <= x1))[0]
    jsel = np.nonzero((ax >= y0) & (ax <= y1))[0]
    if len(isel) < 3 or len(jsel) < 3:
        raise ValueError("rectangle too small for the grid")
    if max(abs(x0), abs(x1), abs(y0), abs(y1)) > inner_radius(f):
        raise ValueError("rectangle outside the inner region")
    a = wells.get(i)
    block = f.values[np.ix_(isel, jsel)]
    dev = np.linalg.norm(block - a, axis=-1)
    boundary = np.zeros(dev.shape, dtype=bool)
    boundary[0, :] = boundary[-1, :] = True
    boundary[:, 0] = boundary[:, -1] = True
    max_bdry = float(np.max(dev[boundary]))
    max_int = float(np.max(dev[~boundary]))
    hypothesis = max_bdry <= r
    return MaxPrincipleResult(
        holds=bool(hypothesis and max_int <= r),
        hypothesis_met=bool(hypothesis),
        max_boundary_deviation=max_bdry,
        max_interior_deviation=max_int)
