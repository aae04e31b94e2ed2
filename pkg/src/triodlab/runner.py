"""Experiment driver: staged pipeline with content-addressed run folders.

Each stage reads the configuration, computes, and emits CSV tables (and
binary checkpoints) into  <out_root>/<run-id>/  where the run id is the
configuration's content hash.  Stages find each other's artifacts in the
same folder, so `relax` auto-invokes `hetero` when profiles are missing
and `diagnose` picks up the relaxed checkpoint.  All emitted bytes are
deterministic functions of the configuration.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import diagnostics as diag
from . import field2d, hetero1d
from ._csvio import write_csv
from .config import RunConfig
from .field2d import Field2D, ProfileTriple
from .partition import TriodGeometry
from .potential import Potential, WellTriple, check_hypotheses, interface_width, make_triple_well

__all__ = ["RunPaths", "run_hetero", "run_relax", "run_competitor",
           "run_diagnose", "run_all", "build_potential", "load_profiles"]

PAIRS = ((1, 2), (2, 3), (3, 1))


@dataclass(frozen=True)
class RunPaths:
    root: str
    run_id: str

    @property
    def run_dir(self) -> str:
        return os.path.join(self.root, self.run_id)

    def artifact(self, name: str) -> str:
        return os.path.join(self.run_dir, f"{self.run_id}.{name}")

    def ensure(self) -> "RunPaths":
        os.makedirs(self.run_dir, exist_ok=True)
        return self


def paths_for(cfg: RunConfig, out_root: str | None = None) -> RunPaths:
    return RunPaths(out_root or cfg.out_dir, cfg.content_hash())


def build_potential(cfg: RunConfig) -> Potential:
    w = cfg.potential.wells
    wells = WellTriple(np.asarray(w[0], dtype=float),
                       np.asarray(w[1], dtype=float),
                       np.asarray(w[2], dtype=float))
    return make_triple_well(wells, cfg.potential.scale)


def _triod(cfg: RunConfig) -> TriodGeometry:
    return TriodGeometry(tuple(cfg.field2d.center), cfg.field2d.theta)


# ---------------------------------------------------------------------------
# hetero stage

def run_hetero(cfg: RunConfig, out_root: str | None = None) -> RunPaths:
    """Solve the three connections; emit profiles, sigma table, spectra."""
    cfg.validate()
    paths = paths_for(cfg, out_root).ensure()
    pot = build_potential(cfg)
    ps = cfg.profile
    profiles = {}
    sigma_rows = []
    spec_rows = []
    for (i, j) in PAIRS:
        prof = hetero1d.solve_connection(
            pot, i, j, halfwidth=ps.halfwidth, n=ps.n,
            tol=ps.tol, max_iter=ps.max_iter)
        profiles[(i, j)] = prof
        hetero1d.save_profile(prof, paths.artifact(f"profile_{i}{j}.bin"))
        hetero1d.write_profile_csv(prof, paths.artifact(f"profile_{i}{j}.csv"))
        equip = hetero1d.equipartition_residual(prof, pot)
        tail = hetero1d.tail_decay_rate(prof, pot)
        sigma_rows.append((f"{i}{j}", prof.sigma, equip, tail, ps.n,
                           ps.halfwidth))
        spec = hetero1d.linearized_spectrum(prof, pot, m=6)
        spec_rows.append((f"{i}{j}", *spec.eigenvalues.tolist(),
                          spec.ground_mode_overlap))
    write_csv(paths.artifact("sigma_table.csv"),
              ["pair", "sigma", "equipartition_residual", "tail_rate", "n",
               "halfwidth"],
              sigma_rows,
              meta={"run_id": paths.run_id})
    write_csv(paths.artifact("spectrum.csv"),
              ["pair", "eig0", "eig1", "eig2", "eig3", "eig4", "eig5",
               "ground_mode_overlap"],
              spec_rows,
              meta={"run_id": paths.run_id})
    report = check_hypotheses(pot, seed=cfg.seed)
    write_csv(paths.artifact("hypotheses.csv"),
              ["check", "passed", "detail"],
              [(c.name, c.passed, c.detail.replace(",", ";"))
               for c in report.checks],
              meta={"run_id": paths.run_id,
                    "comparability_lower": report.comparability_lower,
                    "comparability_upper": report.comparability_upper})
    return paths


def load_profiles(paths: RunPaths) -> ProfileTriple:
    """Load the three connection profiles from a run folder."""
    out = {}
    for (i, j) in PAIRS:
        path = paths.artifact(f"profile_{i}{j}.bin")
        if not os.path.exists(path):
            raise FileNotFoundError(f"missing profile artifact {path}")
        out[(i, j)] = hetero1d.load_profile(path)
    return ProfileTriple(p12=out[(1, 2)], p23=out[(2, 3)], p31=out[(3, 1)])


def _profiles_or_solve(cfg: RunConfig, paths: RunPaths) -> ProfileTriple:
    try:
        return load_profiles(paths)
    except FileNotFoundError:
        run_hetero(cfg, paths.root)
        return load_profiles(paths)


# ---------------------------------------------------------------------------
# competitor / relax stages

def run_competitor(cfg: RunConfig, out_root: str | None = None) -> RunPaths:
    """Build the heteroclinic competitor and log its disk energies."""
    cfg.validate()
    paths = paths_for(cfg, out_root).ensure()
    pot = build_potential(cfg)
    profiles = _profiles_or_solve(cfg, paths)
    grid = field2d.GridSpec(cfg.field2d.halfwidth, cfg.field2d.n)
    comp = field2d.competitor_init(grid, _triod(cfg), profiles, pot.wells, pot)
    field2d.save_checkpoint(comp, paths.artifact("competitor.acf2"))
    sigma = float(np.mean(profiles.sigma_values()))
    rows = []
    for R in cfg.diagnostics.radii:
        rows.append(("disk", R,
                     *_growth_entry(comp, pot, ("disk", R), sigma)))
    write_csv(paths.artifact("competitor_energy.csv"),
              ["shape", "R", "E", "excess"],
              rows, meta={"run_id": paths.run_id, "sigma": sigma})
    return paths


def _growth_entry(f: Field2D, pot: Potential, shape, sigma: float):
    row = diag.energy_growth(f, pot, [shape], sigma)[0]
    return row.E, row.excess


def run_relax(cfg: RunConfig, out_root: str | None = None,
              resume: str | None = None) -> tuple[RunPaths, bool]:
    """Relax from the competitor (or a checkpoint); emit field + energy log.

    Returns the run paths and whether the solve converged.  On
    non-convergence the best iterate is still written.
    """
    cfg.validate()
    paths = paths_for(cfg, out_root).ensure()
    pot = build_potential(cfg)
    profiles = _profiles_or_solve(cfg, paths)
    grid = field2d.GridSpec(cfg.field2d.halfwidth, cfg.field2d.n)
    comp = field2d.competitor_init(grid, _triod(cfg), profiles, pot.wells, pot)
    competitor_energy = field2d._relax_energy(comp.values, grid.hx, pot)
    if resume is not None:
        start = field2d.load_checkpoint(resume)
        if start.grid != grid:
            raise field2d.CheckpointError(
                "resume checkpoint grid does not match the configuration")
    else:
        start = comp
    result = field2d.relax(start, pot, tol=cfg.field2d.tol,
                           max_iter=cfg.field2d.max_iter,
                           symmetrize=cfg.field2d.symmetrize)
    field2d.save_checkpoint(result.field, paths.artifact("field.acf2"))
    write_csv(paths.artifact("energy_log.csv"),
              ["iteration", "energy"],
              [(k, e) for k, e in enumerate(result.energies)],
              meta={"run_id": paths.run_id,
                    "competitor_energy": competitor_energy,
                    "final_energy": result.energies[-1],
                    "final_residual": result.residual,
                    "iterations": result.iterations,
                    "converged": result.converged})
    return paths, result.converged


# ---------------------------------------------------------------------------
# diagnose stage

def run_diagnose(cfg: RunConfig, out_root: str | None = None,
                 checkpoint: str | None = None) -> RunPaths:
    """Run every diagnostic on a relaxed field and emit the CSV reports."""
    cfg.validate()
    paths = paths_for(cfg, out_root).ensure()
    pot = build_potential(cfg)
    profiles = load_profiles(paths)
    ckpt = checkpoint or paths.artifact("field.acf2")
    if not os.path.exists(ckpt):
        raise FileNotFoundError(f"missing field checkpoint {ckpt}")
    f = field2d.load_checkpoint(ckpt)
    d = cfg.diagnostics
    sigma = float(np.mean(profiles.sigma_values()))
    width = interface_width(pot)
    meta = {"run_id": paths.run_id, "sigma": sigma, "interface_width": width}
    summary_rows = []

    def record(name, value, threshold, ok):
        summary_rows.append((name, value, threshold, bool(ok)))

    # interface localization first: several diagnostics use the fitted triod
    skip_interface = d.delta >= 0.5 * pot.wells.min_separation()
    if not skip_interface:
        loc = diag.interface_report(f, pot.wells, d.delta,
                                    theta_radii=d.radii)
        triod = loc.triod
        write_csv(paths.artifact("interface.csv"),
                  ["x", "width", "ymin", "ymax"],
                  [tuple(r) for r in loc.width_by_x],
                  meta={**meta, "delta": d.delta,
                        "center_x": triod.center[0],
                        "center_y": triod.center[1],
                        "theta": triod.theta,
                        "max_dist": loc.max_dist,
                        "cell_count": loc.cell_count,
                        "fit_rms": loc.fit_rms})
        write_csv(paths.artifact("interface_theta.csv"),
                  ["R", "theta"],
                  [tuple(r) for r in loc.theta_by_R], meta=meta)
        X, Y = f.grid.mesh()
        mind = f.min_well_distance(pot.wells)
        gmask = (mind >= d.delta) & (np.hypot(X, Y) <= diag.inner_radius(f))
        write_csv(paths.artifact("gamma.csv"),
                  ["x", "y", "min_well_distance"],
                  zip(X[gmask].tolist(), Y[gmask].tolist(),
                      mind[gmask].tolist()),
                  meta={**meta, "delta": d.delta})
        record("interface_max_dist_widths", loc.max_dist / width, 3.0,
               loc.max_dist / width <= 3.0)
        record("interface_theta_abs", abs(triod.theta), 1e-2,
               abs(triod.theta) <= 1e-2)
    else:
        triod = _triod(cfg)
        record("interface_max_dist_widths", float("nan"), 3.0, False)

    # energy growth on disks and triangles
    shapes = [("disk", R) for R in d.radii]
    shapes += [("triangle", R) for R in d.triangle_radii]
    growth = diag.energy_growth(f, pot, shapes, sigma, triod=triod)
    write_csv(paths.artifact("energy_growth.csv"),
              ["shape", "R", "E", "excess"],
              [(r.shape, r.R, r.E, r.excess) for r in growth], meta=meta)
    disk_exc = max(abs(r.excess) for r in growth if r.shape == "disk")
    tri_exc = max(abs(r.excess) for r in growth if r.shape == "triangle")
    record("energy_growth_disk_max_excess", disk_exc, 2.0 * sigma,
           disk_exc <= 2.0 * sigma)
    record("energy_growth_triangle_max_excess", tri_exc, 2.0 * sigma,
           tri_exc <= 2.0 * sigma)

    # equipartition
    eq = diag.equipartition_report(f, pot, d.annulus_radii, sigma)
    write_csv(paths.artifact("equipartition.csv"),
              ["R", "pot_over_R", "grad_over_2R", "tang_over_2R",
               "dev_pot", "dev_grad", "ann_radial_over_R",
               "ann_equi_mass_over_R", "ann_radial_fraction"],
              [(r.R, r.pot_over_R, r.grad_over_2R, r.tang_over_2R,
                r.dev_pot, r.dev_grad, r.ann_radial_over_R,
                r.ann_equi_mass_over_R, r.ann_radial_fraction)
               for r in eq], meta=meta)
    last = eq[-1]
    record("equipartition_dev_pot", abs(last.dev_pot), 0.05,
           abs(last.dev_pot) <= 0.05)
    record("equipartition_dev_grad", abs(last.dev_grad), 0.05,
           abs(last.dev_grad) <= 0.05)
    record("annulus_radial_over_R", last.ann_radial_over_R, 0.05 * sigma,
           last.ann_radial_over_R <= 0.05 * sigma)
    decreasing = all(eq[k].ann_radial_over_R >= eq[k + 1].ann_radial_over_R
                     for k in range(len(eq) - 1))
    record("annulus_radial_decreasing", float(decreasing), 1.0, decreasing)

    # global deformation
    gd = diag.global_deformation(f, pot, sigma, strip_radii=d.radii,
                                 triod=triod)
    write_csv(paths.artifact("deformation.csv"),
              ["R", "strip_E", "strip_excess"],
              [tuple(r) for r in gd.strip_rows],
              meta={**meta, "radial_total": gd.radial_total,
                    "horizontal_total": gd.horizontal_total})
    strip_exc = max(r[2] for r in gd.strip_rows)
    record("strip_excess_max", strip_exc, 2.0 * sigma,
           strip_exc <= 2.0 * sigma)

    # hamiltonian identities
    ham = diag.hamiltonian_profile(f, pot, d.hamiltonian_xs)
    write_csv(paths.artifact("hamiltonian.csv"),
              ["x", "G", "H", "G_rel_dev", "H_over_sigma"],
              [(r.x, r.G, r.H, r.G / sigma - 1.0, r.H / sigma) for r in ham],
              meta=meta)
    gdev = max(abs(r.G / sigma - 1.0) for r in ham)
    hdev = max(abs(r.H) / sigma for r in ham)
    record("hamiltonian_G_dev", gdev, 0.03, gdev <= 0.03)
    record("hamiltonian_H_dev", hdev, 0.03, hdev <= 0.03)

    # slices
    rows, summary = diag.slice_analysis(f, pot, profiles.p31, d.xs, d.eps)
    write_csv(paths.artifact("slices.csv"),
              ["x", "J", "excess", "d0", "h", "orth_residual", "G", "H",
               "sup_dev", "d1_proxy", "in_bad_set", "bracket_ok"],
              [(r.x, r.J, r.excess, r.d0, r.h, r.orth_residual, r.G, r.H,
                r.sup_dev, r.d1_proxy, r.in_bad_set, r.bracket_ok)
               for r in rows],
              meta={**meta, "sigma_ref": summary.sigma_ref,
                    "badset_measure": summary.badset_measure,
                    "h_total_variation": summary.h_total_variation,
                    "h_limit": summary.h_limit,
                    "alpha_hat": summary.alpha_hat,
                    "eps": d.eps})
    by_x = {r.x: r for r in rows}
    lo, hi = 5.0, 25.0
    if lo in by_x and hi in by_x:
        ratio = by_x[hi].d0 / by_x[lo].d0 if by_x[lo].d0 > 0 else np.inf
        record("slice_d0_ratio_25_over_5", ratio, 0.5, ratio <= 0.5)
        record("slice_supdev_at_25", by_x[hi].sup_dev, 0.05,
               by_x[hi].sup_dev <= 0.05)
    window = [r.h for r in rows if 15.0 <= r.x <= 25.0 and r.bracket_ok]
    tv = float(np.sum(np.abs(np.diff(window)))) if len(window) > 1 else 0.0
    record("slice_h_tv_15_25_widths", tv / width, 0.1, tv / width <= 0.1)

    # h-prime identity
    hp = diag.h_prime_check(f, pot, profiles.p31, d.hprime_x,
                            2.0 * f.grid.hx)
    write_csv(paths.artifact("hprime.csv"),
              ["x", "dx", "fd", "formula", "abs_diff", "denominator",
               "flagged"],
              [(hp.x, hp.dx, hp.fd, hp.formula, hp.abs_diff,
                hp.denominator, hp.flagged)], meta=meta)
    hp_tol = 1e-2 * (abs(hp.fd) + 1e-3)
    record("hprime_abs_diff", hp.abs_diff, hp_tol, hp.abs_diff <= hp_tol)

    # decay into sector 2 along its bisector
    bearing = triod.theta + np.pi
    fit = diag.decay_fit(f, pot.wells,
                         diag.SectorRegion(bearing=bearing, rmin=2.0),
                         triod, delta=d.delta)
    tail = hetero1d.tail_decay_rate(profiles.p31, pot)
    write_csv(paths.artifact("decay.csv"),
              ["K", "k", "rms_log_residual", "n_points", "tail_rate_1d"],
              [(fit.K, fit.k, fit.rms_log_residual, fit.n_points, -tail)],
              meta=meta)
    record("decay_rate_positive", fit.k, 0.0, fit.k > 0)
    record("decay_rms", fit.rms_log_residual, 0.2,
           fit.rms_log_residual <= 0.2)
    rel = abs(fit.k / (-tail) - 1.0)
    record("decay_rate_vs_1d", rel, 0.3, rel <= 0.3)

    # maximum principle on a rectangle inside sector 1
    inner = diag.inner_radius(f)
    rect = (0.25 * inner, 0.75 * inner, 0.35 * inner, 0.85 * inner)
    mp = diag.max_principle_check(f, pot.wells, rect, 1, d.r0 / 2.0)
    write_csv(paths.artifact("maxprinciple.csv"),
              ["x0", "x1", "y0", "y1", "well", "r", "holds",
               "hypothesis_met", "max_boundary_deviation",
               "max_interior_deviation"],
              [(rect[0], rect[1], rect[2], rect[3], 1, d.r0 / 2.0, mp.holds,
                mp.hypothesis_met, mp.max_boundary_deviation,
                mp.max_interior_deviation)], meta=meta)
    record("max_principle_holds", float(mp.holds), 1.0,
           mp.holds or not mp.hypothesis_met)

    write_csv(paths.artifact("summary.csv"),
              ["criterion", "value", "threshold", "passed"],
              summary_rows, meta=meta)
    return paths


def run_all(cfg: RunConfig, out_root: str | None = None,
            resume: str | None = None) -> tuple[RunPaths, bool]:
    paths = run_hetero(cfg, out_root)
    run_competitor(cfg, out_root)
    _, converged = run_relax(cfg, out_root, resume=resume)
    run_diagnose(cfg, out_root)
    return paths, converged
