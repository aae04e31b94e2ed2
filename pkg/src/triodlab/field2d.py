"""Vector fields on a square grid: construction, energy, relaxation.

The domain is [-Lx, Lx]^2 sampled on an n x n grid; values[i, j] is the
field at (x_i, y_j) with x varying along the first axis.  Two discrete
energies coexist on purpose:

  * the relaxation objective sums squared differences over grid edges
    plus a trapezoid-weighted potential term, so its gradient at an
    interior node is exactly hx^2 * (-Lap5 u + W_u(u)) with the 5-point
    Laplacian; the solver's convergence measure is therefore the PDE
    residual itself;
  * region energies for diagnostics use the midpoint rule over grid
    cells (cell-centered derivatives and the potential at the averaged
    corner value), which restricts cleanly to disks, triangles and other
    windows.

Relaxation is preconditioned nonlinear conjugate gradient on the free
nodes; the preconditioner inverts (-Lap5 + (c1+c2)/2) on the interior
via fast sine transforms.  Frozen nodes never change, bit for bit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from ._optim import MinimizeResult, NanEnergyError, minimize_pncg
from .hetero1d import Profile1D, sample_profile
from .partition import SectorPartition, TriodGeometry, triple_junction_map
from .potential import Potential, WellTriple, interface_width

__all__ = [
    "GridSpec",
    "Field2D",
    "Section1D",
    "ProfileTriple",
    "EnergyBreakdown",
    "RelaxResult",
    "RelaxError",
    "CheckpointError",
    "boundary_data",
    "competitor_init",
    "energy",
    "rescaled_energy",
    "residual",
    "relax",
    "slice_field",
    "save_checkpoint",
    "load_checkpoint",
    "write_slice_csv",
]

CHECKPOINT_MAGIC = b"ACF2"


class RelaxError(RuntimeError):
    """Relaxation failed hard (non-finite energy)."""


class CheckpointError(IOError):
    """Checkpoint file is malformed."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform n x n grid on [-halfwidth, halfwidth]^2."""

    halfwidth: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("grid needs at least 3 points per side")
        if self.halfwidth <= 0:
            raise ValueError("halfwidth must be positive")

    @property
    def hx(self) -> float:
        return 2.0 * self.halfwidth / (self.n - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.halfwidth, self.halfwidth, self.n)

    def mesh(self):
        ax = self.axis
        return np.meshgrid(ax, ax, indexing="ij")

    def cell_centers(self):
        ax = self.axis
        c = 0.5 * (ax[1:] + ax[:-1])
        return np.meshgrid(c, c, indexing="ij")

    def resolves(self, p: Potential) -> bool:
        """Whether hx resolves the transition layer (hx <= width/4)."""
        return self.hx <= interface_width(p) / 4.0


@dataclass
class Field2D:
    """Grid samples of a map into the u-plane plus the Dirichlet mask."""

    grid: GridSpec
    values: np.ndarray   # (n, n, 2)
    frozen: np.ndarray   # (n, n) bool

    def copy(self) -> "Field2D":
        return Field2D(self.grid, self.values.copy(), self.frozen.copy())

    def min_well_distance(self, wells: WellTriple) -> np.ndarray:
        a = wells.as_array()
        d = self.values[..., None, :] - a
        return np.sqrt(np.min(np.sum(d * d, axis=-1), axis=-1))


@dataclass(frozen=True)
class ProfileTriple:
    """The three connections, keyed by the triod rays they decorate.

    Ray k of a TriodGeometry separates sector cw(k) from sector ccw(k);
    the matching profile runs from the clockwise well at -infinity to the
    counterclockwise well at +infinity, so the field value at signed
    distance s from the ray line is profile(s).
    """

    p12: Profile1D
    p23: Profile1D
    p31: Profile1D

    def for_ray(self, k: int) -> Profile1D:
        return (self.p31, self.p12, self.p23)[k]

    def by_pair(self, i: int, j: int) -> Profile1D:
        table = {(1, 2): self.p12, (2, 3): self.p23, (3, 1): self.p31}
        if (i, j) in table:
            return table[(i, j)]
        raise KeyError(f"no stored connection for pair ({i}, {j})")

    def sigma_values(self) -> np.ndarray:
        return np.array([self.p12.sigma, self.p23.sigma, self.p31.sigma])


# ---------------------------------------------------------------------------
# construction

def _heteroclinic_values(grid: GridSpec, t: TriodGeometry,
                         profiles: ProfileTriple, wells: WellTriple,
                         p: Potential) -> np.ndarray:
    """Nearest-ray heteroclinic ansatz over the full grid.

    Away from the junction each point takes the profile of its nearest
    triod ray evaluated at the signed distance to that ray's line; within
    two interface widths of the center the three ray rules are blended by
    an angular partition of unity (hat weights over the ray angles).
    Points farther than five widths from every ray take their sector's
    well value exactly.
    """
    X, Y = grid.mesh()
    width = interface_width(p)
    ray_d = t.distance_to_rays(X, Y)            # (3, n, n)
    nearest = np.argmin(ray_d, axis=0)
    vals3 = np.stack([
        sample_profile(profiles.for_ray(k), t.signed_ray_distance(X, Y, k))
        for k in range(3)
    ])                                           # (3, n, n, 2)
    out = np.take_along_axis(vals3, nearest[None, ..., None], axis=0)[0]

    # exact well values deep inside the sectors
    deep = np.min(ray_d, axis=0) > 5.0 * width
    if np.any(deep):
        part = SectorPartition(t.center, t.theta)
        wellvals = triple_junction_map(part, wells, X, Y)
        out[deep] = wellvals[deep]

    # partition-of-unity blend near the junction
    zx, zy = X - t.center[0], Y - t.center[1]
    r = np.hypot(zx, zy)
    blendmask = r < 2.0 * width
    if np.any(blendmask):
        phi = np.arctan2(zy, zx)
        acc = np.zeros(X.shape + (2,))
        wsum = np.zeros(X.shape)
        for k, ang in enumerate(t.ray_angles()):
            dphi = np.abs(np.angle(np.exp(1j * (phi - ang))))
            wk = np.clip(1.0 - dphi / (2.0 * np.pi / 3.0), 0.0, None)
            acc += wk[..., None] * vals3[k]
            wsum += wk
        blended = acc / wsum[..., None]
        out[blendmask] = blended[blendmask]
    return out


def _check_construction_pre(grid: GridSpec, t: TriodGeometry, p: Potential):
    width = interface_width(p)
    if not grid.resolves(p):
        raise ValueError(
            f"grid spacing {grid.hx:.4f} does not resolve the interface "
            f"width {width:.4f} (need hx <= width/4)")
    margin = grid.halfwidth / 3.0
    cx, cy = t.center
    if abs(cx) > margin or abs(cy) > margin:
        raise ValueError("triod center must lie in the middle third of the domain")
    border = grid.halfwidth - max(abs(cx), abs(cy))
    if border < 2.0 * width:
        raise ValueError("triod center within two interface widths of the boundary")


def boundary_data(grid: GridSpec, t: TriodGeometry, profiles: ProfileTriple,
                  wells: WellTriple, p: Potential) -> tuple[np.ndarray, np.ndarray]:
    """Dirichlet values on the boundary ring.

    Returns (values, mask): values is (n, n, 2) with the heteroclinic
    ansatz filled on the one-cell boundary ring and zeros elsewhere, and
    mask flags the ring.
    """
    _check_construction_pre(grid, t, p)
    full = _heteroclinic_values(grid, t, profiles, wells, p)
    mask = np.zeros((grid.n, grid.n), dtype=bool)
    mask[0, :] = mask[-1, :] = True
    mask[:, 0] = mask[:, -1] = True
    vals = np.zeros_like(full)
    vals[mask] = full[mask]
    return vals, mask


def competitor_init(grid: GridSpec, t: TriodGeometry, profiles: ProfileTriple,
                    wells: WellTriple, p: Potential) -> Field2D:
    """Heteroclinic competitor field with the boundary ring frozen."""
    _check_construction_pre(grid, t, p)
    vals = _heteroclinic_values(grid, t, profiles, wells, p)
    mask = np.zeros((grid.n, grid.n), dtype=bool)
    mask[0, :] = mask[-1, :] = True
    mask[:, 0] = mask[:, -1] = True
    return Field2D(grid, vals, mask)


# ---------------------------------------------------------------------------
# relaxation energy (edge/node quadrature)

def _relax_energy(u: np.ndarray, hx: float, p: Potential) -> float:
    n = u.shape[0]
    wb = np.ones(n)
    wb[0] = wb[-1] = 0.5
    dx = u[1:] - u[:-1]
    ex = 0.5 * float(np.sum(np.sum(dx * dx, axis=-1) * wb[None, :]))
    dy = u[:, 1:] - u[:, :-1]
    ey = 0.5 * float(np.sum(np.sum(dy * dy, axis=-1) * wb[:, None]))
    w = p.value(u)
    ew = hx * hx * float(np.sum(w * wb[:, None] * wb[None, :]))
    return ex + ey + ew


def _relax_gradient(u: np.ndarray, hx: float, p: Potential,
                    free: np.ndarray) -> np.ndarray:
    g = np.zeros_like(u)
    g[1:-1, 1:-1] = (4.0 * u[1:-1, 1:-1] - u[2:, 1:-1] - u[:-2, 1:-1]
                     - u[1:-1, 2:] - u[1:-1, :-2])
    g[1:-1, 1:-1] += hx * hx * p.gradient(u[1:-1, 1:-1])
    g[~free] = 0.0
    return g


@dataclass
class RelaxResult:
    field: Field2D
    iterations: int
    residual: float
    converged: bool
    energies: np.ndarray


def _reflection_swapping_wells(wells: WellTriple, i: int, j: int) -> np.ndarray:
    """Orthogonal reflection of the u-plane exchanging wells i and j.

    Defined when the third well lies on the perpendicular bisector of the
    other two (true for the equilateral default); the matrix reflects
    across the bisector line through the remaining well.
    """
    a = wells.as_array()
    k = ({1, 2, 3} - {i, j}).pop()
    mid = 0.5 * (a[i - 1] + a[j - 1])
    axis = a[k - 1] - mid
    if np.linalg.norm(axis) < 1e-12:
        raise ValueError("degenerate well geometry")
    axis = axis / np.linalg.norm(axis)
    # reflection across the line through mid with direction `axis`; for a
    # linear map we additionally need mid, a_k and the origin collinear
    beta = np.arctan2(axis[1], axis[0])
    R = np.array([[np.cos(2 * beta), np.sin(2 * beta)],
                  [np.sin(2 * beta), -np.cos(2 * beta)]])
    return R


def _symmetrize(u: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Average with the image under (x, y) -> (x, -y) plus the u-reflection."""
    mirrored = u[:, ::-1] @ R.T
    return 0.5 * (u + mirrored)


def relax(f: Field2D, p: Potential, tol: float = 1e-4, max_iter: int = 5000,
          symmetrize: bool = False) -> RelaxResult:
    """Energy descent on the free nodes until the PDE residual meets tol.

    The reported residual is max over free nodes of |Lap5 u - W_u(u)|
    (Euclidean norm per node pair), i.e. the gradient of the objective in
    units of hx^2.  With symmetrize on, accepted iterates are averaged
    with their image under the vertical flip composed with the u-plane
    reflection that swaps wells 1 and 3 (valid for symmetric data).
    """
    n = f.grid.n
    hx = f.grid.hx
    ring = np.zeros((n, n), dtype=bool)
    ring[0, :] = ring[-1, :] = True
    ring[:, 0] = ring[:, -1] = True
    if not np.all(f.frozen[ring]):
        raise ValueError("frozen mask must cover the boundary ring")
    if not np.all(np.isfinite(f.values)):
        raise ValueError("initial field contains non-finite values")
    free = ~f.frozen
    interior_free = free.copy()
    interior_free[ring] = False

    if not np.isfinite(tol):
        return RelaxResult(f.copy(), 0, np.inf, True,
                           np.array([_relax_energy(f.values, hx, p)]))

    frozen_vals = f.values[f.frozen].copy()
    use_dst = bool(np.all(interior_free[1:-1, 1:-1]))
    if use_dst:
        lam = (2.0 - 2.0 * np.cos(np.pi * np.arange(1, n - 1) / (n - 1))) / hx**2
        denom = lam[:, None] + lam[None, :] + 0.5 * (p.c1 + p.c2)

    def energy_fn(x):
        return _relax_energy(x.reshape(n, n, 2), hx, p)

    def gradient_fn(x):
        return _relax_gradient(x.reshape(n, n, 2), hx, p, free).ravel()

    def residual_norm(g):
        return float(np.max(np.abs(g))) / hx**2

    def precondition(g):
        if not use_dst:
            return g / hx**2
        gi = g.reshape(n, n, 2)
        z = np.zeros_like(gi)
        for c in range(2):
            coeff = sfft.dstn(gi[1:-1, 1:-1, c] / hx**2, type=1, norm="ortho")
            z[1:-1, 1:-1, c] = sfft.idstn(coeff / denom, type=1, norm="ortho")
        return z.ravel()

    postprocess = None
    if symmetrize:
        R = _reflection_swapping_wells(p.wells, 1, 3)

        def postprocess(x):
            u = _symmetrize(x.reshape(n, n, 2), R)
            u[f.frozen] = frozen_vals
            return u.ravel()

    try:
        result: MinimizeResult = minimize_pncg(
            f.values.ravel(), energy_fn, gradient_fn, residual_norm,
            precondition, tol=tol, max_iter=max_iter)
    except NanEnergyError as exc:
        raise RelaxError(f"relaxation diverged: {exc}") from exc

    u = result.x.reshape(n, n, 2)
    u[f.frozen] = frozen_vals  # exact restore, independent of float noise
    out = Field2D(f.grid, u, f.frozen.copy())
    return RelaxResult(out, result.iterations, result.residual,
                       result.converged, result.energies)


# ---------------------------------------------------------------------------
# diagnostics-facing energy (cell midpoint quadrature)

@dataclass(frozen=True)
class EnergyBreakdown:
    """Region energy split into its quadratic parts.

    dirichlet is the half squared gradient mass, potential the W mass;
    total = dirichlet + potential.  tangential and radial halve the
    squared angular/radial derivative about the origin and sum to
    dirichlet pointwise.  horizontal is the full (unhalved) squared
    x-derivative mass.
    """

    total: float
    dirichlet: float
    potential: float
    tangential: float
    radial: float
    horizontal: float
    region: str = ""


def _cell_fields(f: Field2D):
    u = f.values
    hx = f.grid.hx
    dx = (u[1:, :-1] + u[1:, 1:] - u[:-1, :-1] - u[:-1, 1:]) / (2.0 * hx)
    dy = (u[:-1, 1:] + u[1:, 1:] - u[:-1, :-1] - u[1:, :-1]) / (2.0 * hx)
    um = 0.25 * (u[1:, 1:] + u[1:, :-1] + u[:-1, 1:] + u[:-1, :-1])
    return dx, dy, um


def energy(f: Field2D, p: Potential, region) -> EnergyBreakdown:
    """Midpoint-rule energy over grid cells whose centers lie in region."""
    Xc, Yc = f.grid.cell_centers()
    mask = region.contains(Xc, Yc)
    if not np.any(mask):
        return EnergyBreakdown(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, repr(region))
    hx = f.grid.hx
    area = hx * hx
    dx, dy, um = _cell_fields(f)
    dx2 = np.sum(dx * dx, axis=-1)
    dy2 = np.sum(dy * dy, axis=-1)
    dirichlet = 0.5 * float(np.sum((dx2 + dy2)[mask])) * area
    pot = float(np.sum(p.value(um[mask]))) * area
    r = np.hypot(Xc, Yc)
    r = np.where(r < 1e-30, 1e-30, r)
    ex, ey = Xc / r, Yc / r
    dr = dx * ex[..., None] + dy * ey[..., None]
    dr2 = np.sum(dr * dr, axis=-1)
    radial = 0.5 * float(np.sum(dr2[mask])) * area
    tangential = dirichlet - radial
    horizontal = float(np.sum(dx2[mask])) * area
    return EnergyBreakdown(
        total=dirichlet + pot, dirichlet=dirichlet, potential=pot,
        tangential=tangential, radial=radial, horizontal=horizontal,
        region=repr(region))


def rescaled_energy(f: Field2D, p: Potential, R: float, region) -> float:
    """Blow-down energy 1/(2R) |grad u|^2 + R W over the region."""
    if R <= 0:
        raise ValueError("R must be positive")
    br = energy(f, p, region)
    return br.dirichlet / R + R * br.potential


def residual(f: Field2D, p: Potential) -> tuple[float, np.ndarray]:
    """PDE residual Lap u - W_u(u) at interior non-frozen nodes.

    Returns (max Euclidean norm over nodes, full residual field with
    zeros on frozen and boundary nodes).
    """
    u = f.values
    hx = f.grid.hx
    res = np.zeros_like(u)
    res[1:-1, 1:-1] = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:]
                       + u[1:-1, :-2] - 4.0 * u[1:-1, 1:-1]) / hx**2
    res[1:-1, 1:-1] -= p.gradient(u[1:-1, 1:-1])
    res[f.frozen] = 0.0
    norms = np.linalg.norm(res, axis=-1)
    return float(np.max(norms)), res


# ---------------------------------------------------------------------------
# slices

@dataclass(frozen=True)
class Section1D:
    """Vertical section u(x, .) sampled on the grid's y-nodes."""

    x: float
    y: np.ndarray
    values: np.ndarray  # (n, 2)

    @property
    def dy(self) -> float:
        return float(self.y[1] - self.y[0])

    def sample(self, yq) -> np.ndarray:
        yq = np.asarray(yq, dtype=float)
        out = np.empty(yq.shape + (2,))
        for c in range(2):
            out[..., c] = np.interp(yq, self.y, self.values[:, c])
        return out


def slice_field(f: Field2D, x: float) -> Section1D:
    """Vertical slice at abscissa x, interpolated linearly between columns."""
    Lx = f.grid.halfwidth
    if not (-Lx <= x <= Lx):
        raise ValueError(f"x = {x} outside the domain [-{Lx}, {Lx}]")
    ax = f.grid.axis
    pos = (x + Lx) / f.grid.hx
    i0 = int(np.floor(pos))
    frac = pos - i0
    if i0 >= f.grid.n - 1:
        i0, frac = f.grid.n - 2, 1.0
    if frac < 1e-12:
        vals = f.values[i0].copy()
    else:
        vals = (1.0 - frac) * f.values[i0] + frac * f.values[i0 + 1]
    return Section1D(x=float(x), y=ax.copy(), values=vals)


# ---------------------------------------------------------------------------
# checkpoint format

def save_checkpoint(f: Field2D, path) -> None:
    """Bit-exact field snapshot: magic, version, n, Lx, values, mask."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Id", 1, f.grid.halfwidth))
        fh.write(struct.pack("<I", f.grid.n))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
        fh.write(f.frozen.astype(np.uint8).tobytes())


def load_checkpoint(path) -> Field2D:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(
                f"bad checkpoint magic {magic!r} at offset 0 in {path}")
        header = fh.read(16)
        if len(header) != 16:
            raise CheckpointError(f"truncated checkpoint header at offset 4 in {path}")
        version, Lx, n = struct.unpack("<IdI", header)
        if version != 1:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        nbytes = n * n * 2 * 8
        data = fh.read(nbytes)
        if len(data) != nbytes:
            raise CheckpointError(
                f"truncated checkpoint values at offset {20 + len(data)} in {path}")
        values = np.frombuffer(data, dtype="<f8").reshape(n, n, 2).copy()
        mdata = fh.read(n * n)
        if len(mdata) != n * n:
            raise CheckpointError(
                f"truncated frozen mask at offset {20 + nbytes + len(mdata)} in {path}")
        frozen = np.frombuffer(mdata, dtype=np.uint8).reshape(n, n).astype(bool)
    return Field2D(GridSpec(Lx, n), values, frozen)


def write_slice_csv(section: Section1D, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# x = {section.x!r}\n")
        fh.write("y,u1,u2\n")
        for k in range(len(section.y)):
            fh.write(f"{section.y[k]!r},{section.values[k,0]!r},"
                     f"{section.values[k,1]!r}\n")
