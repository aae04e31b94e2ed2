"""Minimizing 1D connections between wells and their linearized spectrum.

A connection between wells a_i and a_j is a curve U: [-L, L] -> R^2 with
clamped ends U(-L) = a_i, U(L) = a_j minimizing the line energy

    J(U) = integral( 1/2 |U'|^2 + W(U) ) dy.

The discretization is a uniform grid with the derivative term summed over
edges and the potential by the trapezoid rule, so the gradient of the
discrete energy at an interior node is exactly dy * (-U'' + W_u(U)) with
the central 3-point second difference.  The minimizer is found by
preconditioned nonlinear conjugate gradient with Armijo backtracking and
then gauge-fixed by translation so that U(0) is equidistant from the two
end wells.

The translation invariance of the continuum problem survives
discretization as a near-exact zero mode of the linearized operator

    T phi = -phi'' + W_uu(U) phi,

computed here as a symmetric block-tridiagonal eigenproblem with
Dirichlet ends.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._optim import NanEnergyError, minimize_pncg
from .potential import Potential, interface_width

__all__ = [
    "Profile1D",
    "SpectrumReport",
    "ConnectionSolveError",
    "solve_connection",
    "profile_energy",
    "equipartition_residual",
    "linearized_spectrum",
    "sample_profile",
    "truncated_energy",
    "tail_decay_rate",
    "save_profile",
    "load_profile",
    "write_profile_csv",
]

PROFILE_MAGIC = b"ACP1"


class ConnectionSolveError(RuntimeError):
    """Connection solve failed; carries the last iterate and its residual."""

    def __init__(self, message: str, profile: "Profile1D | None" = None,
                 residual: float = np.nan):
        super().__init__(message)
        self.profile = profile
        self.residual = residual


@dataclass(frozen=True)
class Profile1D:
    """A sampled curve on [-L, L] with well-valued clamped ends.

    samples[k] is the value at y_k = -L + k*dy; sigma is the discrete line
    energy of the converged minimizer (0.0 for profiles that have not been
    through the solver).
    """

    halfwidth: float
    samples: np.ndarray  # (n, 2)
    left_well: int       # 1-based well indices
    right_well: int
    sigma: float = 0.0

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dy(self) -> float:
        return 2.0 * self.halfwidth / (self.n - 1)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(-self.halfwidth, self.halfwidth, self.n)

    def derivative(self) -> np.ndarray:
        """Central first derivative at nodes, one-sided at the ends."""
        return np.gradient(self.samples, self.dy, axis=0, edge_order=2)


def _discrete_energy(u: np.ndarray, dy: float, p: Potential) -> float:
    du = u[1:] - u[:-1]
    kin = 0.5 * float(np.sum(du * du)) / dy
    w = p.value(u)
    pot = dy * (float(np.sum(w)) - 0.5 * (w[0] + w[-1]))
    return kin + pot


def _discrete_gradient(u: np.ndarray, dy: float, p: Potential) -> np.ndarray:
    g = np.zeros_like(u)
    g[1:-1] = (2.0 * u[1:-1] - u[:-2] - u[2:]) / dy + dy * p.gradient(u[1:-1])
    return g


def _tanh_ramp_init(p: Potential, i: int, j: int, y: np.ndarray) -> np.ndarray:
    """Straight segment from a_i to a_j traversed on a tanh time scale."""
    ai, aj = p.wells.get(i), p.wells.get(j)
    rate = 0.5 * np.sqrt(p.c1)
    t = 0.5 * (1.0 + np.tanh(rate * y))
    return ai[None, :] * (1.0 - t[:, None]) + aj[None, :] * t[:, None]


def _gauge_fix(u: np.ndarray, y: np.ndarray, ai: np.ndarray,
               aj: np.ndarray) -> np.ndarray:
    """Translate so |U(0) - a_i| = |U(0) - a_j|, re-interpolating samples.

    The difference of squared distances is negative at the left end and
    positive at the right end; its first sign change locates the midpoint.
    """
    gg = np.sum((u - ai) ** 2, axis=1) - np.sum((u - aj) ** 2, axis=1)
    pos = np.nonzero(gg > 0)[0]
    if pos.size == 0 or pos[0] == 0:
        return u
    k = int(pos[0])
    y0 = y[k - 1] + (y[k] - y[k - 1]) * (-gg[k - 1]) / (gg[k] - gg[k - 1])
    shifted = np.empty_like(u)
    for c in range(2):
        shifted[:, c] = np.interp(y + y0, y, u[:, c])
    shifted[0], shifted[-1] = ai, aj
    return shifted


def solve_connection(
    p: Potential,
    i: int,
    j: int,
    halfwidth: float = 20.0,
    n: int = 2001,
    init: Profile1D | None = None,
    tol: float = 1e-8,
    max_iter: int = 8000,
) -> Profile1D:
    """Minimize the discrete line energy between wells a_i and a_j.

    Converges when the Euler-Lagrange residual -U'' + W_u(U) has max norm
    at most tol at interior nodes.  The preconditioner is the inverse of
    (-d2/dy2 + (c1+c2)/2) with Dirichlet ends, factored once per solve.
    Raises ConnectionSolveError (carrying the last iterate) when max_iter
    is exhausted, and on non-finite energies from a failed step.
    """
    if i == j:
        raise ValueError("wells i and j must differ")
    if i not in (1, 2, 3) or j not in (1, 2, 3):
        raise ValueError("well indices must be in {1, 2, 3}")
    if n < 401:
        raise ValueError(f"n must be at least 401, got {n}")
    width = interface_width(p)
    if halfwidth < 5.0 * width:
        raise ValueError(
            f"halfwidth {halfwidth} too small: the interval must cover at "
            f"least 10 interface widths ({10 * width:.2f})")

    y = np.linspace(-halfwidth, halfwidth, n)
    dy = y[1] - y[0]
    ai, aj = p.wells.get(i), p.wells.get(j)
    if init is not None:
        u0 = sample_profile(init, y)
    else:
        u0 = _tanh_ramp_init(p, i, j, y)
    u0[0], u0[-1] = ai, aj

    shift = 0.5 * (p.c1 + p.c2)
    bands = np.zeros((2, n - 2))
    bands[0, 1:] = -1.0 / dy**2
    bands[1, :] = 2.0 / dy**2 + shift
    chol = sla.cholesky_banded(bands, lower=False)

    def energy(x):
        return _discrete_energy(x.reshape(n, 2), dy, p)

    def gradient(x):
        return _discrete_gradient(x.reshape(n, 2), dy, p).ravel()

    def residual_norm(g):
        return float(np.max(np.abs(g))) / dy

    def precondition(g):
        gi = g.reshape(n, 2)[1:-1]
        z = np.zeros((n, 2))
        z[1:-1] = sla.cho_solve_banded((chol, False), gi / dy)
        return z.ravel()

    try:
        result = minimize_pncg(
            u0.ravel(), energy, gradient, residual_norm, precondition,
            tol=tol, max_iter=max_iter)
    except NanEnergyError as exc:
        raise ConnectionSolveError(f"connection solve diverged: {exc}") from exc

    u = result.x.reshape(n, 2)
    if not result.converged:
        prof = Profile1D(halfwidth, u, i, j, sigma=result.energy)
        raise ConnectionSolveError(
            f"connection solve did not reach tol={tol:g} in "
            f"{result.iterations} iterations (residual {result.residual:.3e})",
            profile=prof, residual=result.residual)

    u = _gauge_fix(u, y, ai, aj)
    sigma = _discrete_energy(u, dy, p)
    return Profile1D(halfwidth, u, i, j, sigma=sigma)


def profile_energy(prof: Profile1D, p: Potential) -> float:
    """Discrete line energy of the profile; equals prof.sigma when converged."""
    return _discrete_energy(prof.samples, prof.dy, p)


def equipartition_residual(prof: Profile1D, p: Potential) -> float:
    """Max over interior nodes of |1/2 |U'|^2 - W(U)|.

    Both terms vanish at the clamped ends and their difference is a first
    integral of the continuum problem, so this measures how far the
    sampled curve is from an exact connection.  U' is the central
    difference; the value decays at second order in dy.
    """
    u = prof.samples
    dy = prof.dy
    up = (u[2:] - u[:-2]) / (2.0 * dy)
    res = 0.5 * np.sum(up * up, axis=1) - p.value(u[1:-1])
    return float(np.max(np.abs(res)))


def sample_profile(prof: Profile1D, y) -> np.ndarray:
    """Linear interpolation of the samples, clamped to the end wells outside."""
    y = np.asarray(y, dtype=float)
    grid = prof.grid
    out = np.empty(y.shape + (2,))
    for c in range(2):
        out[..., c] = np.interp(y, grid, prof.samples[:, c])
    return out


def truncated_energy(prof: Profile1D, p: Potential,
                     s_minus: float, s_plus: float) -> float:
    """Line energy restricted to [s_minus, s_plus].

    Partial end intervals use the piecewise-linear representation of the
    samples, so truncating at the full interval reproduces profile_energy
    exactly and a degenerate interval gives zero.
    """
    L = prof.halfwidth
    if not (-L <= s_minus <= s_plus <= L):
        raise ValueError("require -L <= s_minus <= s_plus <= L")
    if s_minus == s_plus:
        return 0.0
    grid = prof.grid
    dy = prof.dy
    # subdivide: nodes strictly inside plus the interpolated endpoints
    inside = grid[(grid > s_minus) & (grid < s_plus)]
    ys = np.concatenate([[s_minus], inside, [s_plus]])
    vals = sample_profile(prof, ys)
    dv = np.diff(vals, axis=0)
    dyseg = np.diff(ys)
    keep = dyseg > 1e-15
    kin = 0.5 * float(np.sum(np.sum(dv[keep] * dv[keep], axis=1) / dyseg[keep]))
    w = p.value(vals)
    pot = float(np.sum(0.5 * (w[1:] + w[:-1]) * dyseg))
    return kin + pot


def tail_decay_rate(prof: Profile1D, p: Potential,
                    side: str = "right",
                    band: tuple[float, float] = (1e-6, 0.1)) -> float:
    """Exponential rate of approach to the end well.

    Fits log|U(y) - a| linearly in y over the band of amplitudes where the
    approach is in the linearized regime (below the comparability scale
    but above the floating-point floor).  Returns the slope with respect
    to distance travelled toward the clamp, which is negative.
    """
    if side == "right":
        well = p.wells.get(prof.right_well)
        y = prof.grid
        u = prof.samples
    else:
        well = p.wells.get(prof.left_well)
        y = -prof.grid[::-1]
        u = prof.samples[::-1]
    d = np.linalg.norm(u - well, axis=1)
    mask = (d >= band[0]) & (d <= band[1]) & (y > 0)
    if mask.sum() < 8:
        raise ValueError("not enough samples in the linear tail band")
    slope = np.polyfit(y[mask], np.log(d[mask]), 1)[0]
    return float(slope)


@dataclass(frozen=True)
class SpectrumReport:
    """Lowest eigenvalues of the linearized operator and the overlap of
    the ground eigenvector with the normalized translation mode U'."""

    eigenvalues: np.ndarray
    ground_mode_overlap: float

    @property
    def ground(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def gap(self) -> float:
        return float(self.eigenvalues[1])


def linearized_spectrum(prof: Profile1D, p: Potential, m: int = 6) -> SpectrumReport:
    """Spectrum of -phi'' + W_uu(U) phi with Dirichlet ends.

    The operator is assembled as a symmetric block-tridiagonal sparse
    matrix over the interior nodes (2x2 Hessian blocks on the diagonal)
    and the m smallest eigenvalues extracted by shift-invert Lanczos.
    """
    if m < 3:
        raise ValueError("m must be at least 3")
    u = prof.samples
    n = prof.n
    dy = prof.dy
    ni = n - 2
    hess = p.hessian(u[1:-1])  # (ni, 2, 2)
    diag0 = hess[:, 0, 0] + 2.0 / dy**2
    diag1 = hess[:, 1, 1] + 2.0 / dy**2
    cross = hess[:, 0, 1]
    main = np.empty(2 * ni)
    main[0::2] = diag0
    main[1::2] = diag1
    crossband = np.zeros(2 * ni - 1)
    crossband[0::2] = cross
    # offset-2 entries couple the same component on adjacent nodes
    offdiag = np.full(2 * ni - 2, -1.0 / dy**2)
    T = sp.diags(
        [main, crossband, crossband, offdiag, offdiag],
        [0, 1, -1, 2, -2], format="csc")
    sigma_shift = -max(1.0, 0.1 * p.c1)
    try:
        vals, vecs = spla.eigsh(T, k=m, sigma=sigma_shift, which="LM")
    except Exception as exc:  # pragma: no cover - eigensolver failure
        raise RuntimeError(f"eigensolver failed: {exc}") from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    up = (u[2:] - u[:-2]) / (2.0 * dy)
    mode = up.ravel()
    mode /= np.linalg.norm(mode)
    ground = vecs[:, 0] / np.linalg.norm(vecs[:, 0])
    overlap = float(abs(np.dot(ground, mode)))
    return SpectrumReport(eigenvalues=vals, ground_mode_overlap=overlap)


# ---------------------------------------------------------------------------
# serialization

def save_profile(prof: Profile1D, path) -> None:
    """Binary record: magic, version, n, L, wells, sigma, raw samples."""
    with open(path, "wb") as fh:
        fh.write(PROFILE_MAGIC)
        fh.write(struct.pack("<IIdIId", 1, prof.n, prof.halfwidth,
                             prof.left_well, prof.right_well, prof.sigma))
        fh.write(np.ascontiguousarray(prof.samples, dtype="<f8").tobytes())


def load_profile(path) -> Profile1D:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != PROFILE_MAGIC:
            raise ValueError(
                f"bad profile magic {magic!r} at offset 0 in {path}")
        version, n, L, lw, rw, sigma = struct.unpack("<IIdIId", fh.read(32))
        if version != 1:
            raise ValueError(f"unsupported profile version {version}")
        data = fh.read(n * 2 * 8)
        if len(data) != n * 2 * 8:
            raise ValueError(f"truncated profile data in {path}")
        samples = np.frombuffer(data, dtype="<f8").reshape(n, 2).copy()
    return Profile1D(L, samples, lw, rw, sigma=sigma)


def write_profile_csv(prof: Profile1D, path) -> None:
    """Plain-text export: one row per node, columns y, u1, u2."""
    y = prof.grid
    with open(path, "w") as fh:
        fh.write(f"# sigma = {prof.sigma!r}\n")
        fh.write(f"# wells = {prof.left_well} -> {prof.right_well}\n")
        fh.write("y,u1,u2\n")
        for k in range(prof.n):
            fh.write(f"{y[k]!r},{prof.samples[k,0]!r},{prof.samples[k,1]!r}\n")
