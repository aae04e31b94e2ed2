"""Run configuration: validation, YAML round-trip, content addressing.

A run is fully determined by its configuration and seed; the run
directory is named by a content hash of everything except the output
location, so identical configurations land in the same directory and
reruns are byte-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import yaml

__all__ = ["ConfigError", "RunConfig", "PotentialSpec", "ProfileSpec",
           "FieldSpec", "DiagnosticsSpec", "load_config", "save_config",
           "default_config"]

_UNITS_HEADER = """\
# Run configuration.
# Units: order parameters are dimensionless; lengths are in the units of
# the spatial domain; energies follow from the potential normalization.
# potential.wells: three [u1, u2] zeros of the potential.
# profile.halfwidth / field.halfwidth: half-extent of the 1D / 2D domain.
# tolerances: max-norm Euler-Lagrange residual at convergence.
"""


class ConfigError(ValueError):
    """Invalid or unreadable run configuration."""


@dataclass(frozen=True)
class PotentialSpec:
    wells: tuple = (
        (1.0, 0.0),
        (-0.5, 0.8660254037844386),
        (-0.5, -0.8660254037844386),
    )
    scale: float = 1.0


@dataclass(frozen=True)
class ProfileSpec:
    halfwidth: float = 20.0
    n: int = 2001
    tol: float = 1e-8
    max_iter: int = 8000


@dataclass(frozen=True)
class FieldSpec:
    halfwidth: float = 40.0
    n: int = 641
    theta: float = 0.0
    center: tuple = (0.0, 0.0)
    tol: float = 1e-4
    max_iter: int = 6000
    symmetrize: bool = False


@dataclass(frozen=True)
class DiagnosticsSpec:
    delta: float = 0.3
    eps: float = 0.4
    radii: tuple = (10.0, 15.0, 20.0, 25.0)
    triangle_radii: tuple = (8.0, 12.0, 16.0)
    annulus_radii: tuple = (10.0, 15.0)
    xs: tuple = tuple(float(x) for x in range(1, 28))
    hamiltonian_xs: tuple = (5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0, 22.5, 25.0)
    r0: float = 0.2
    hprime_x: float = 15.0


@dataclass(frozen=True)
class RunConfig:
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    profile: ProfileSpec = field(default_factory=ProfileSpec)
    field2d: FieldSpec = field(default_factory=FieldSpec)
    diagnostics: DiagnosticsSpec = field(default_factory=DiagnosticsSpec)
    seed: int = 0
    out_dir: str = "runs"

    # -- validation ---------------------------------------------------

    def validate(self) -> "RunConfig":
        p, f, d = self.profile, self.field2d, self.diagnostics
        if p.n < 401:
            raise ConfigError(f"profile.n must be >= 401, got {p.n}")
        if p.tol <= 0 or f.tol <= 0:
            raise ConfigError("tolerances must be positive")
        if p.halfwidth <= 0 or f.halfwidth <= 0:
            raise ConfigError("halfwidths must be positive")
        if f.n < 3:
            raise ConfigError("field2d.n must be >= 3")
        if d.delta <= 0 or d.eps <= 0 or d.r0 <= 0:
            raise ConfigError("diagnostic thresholds must be positive")
        inner = 0.75 * f.halfwidth
        if any(r > inner for r in d.radii):
            raise ConfigError("radii must stay within 3/4 of the field halfwidth")
        if any(2 * r > inner for r in d.annulus_radii):
            raise ConfigError("annulus radii must keep 2R within the inner region")
        if any(abs(x) > inner for x in d.xs):
            raise ConfigError("slice abscissas must stay within the inner region")
        if list(d.xs) != sorted(d.xs):
            raise ConfigError("slice abscissas must be increasing")
        wells = self.potential.wells
        if len(wells) != 3 or any(len(w) != 2 for w in wells):
            raise ConfigError("potential.wells must be three planar points")
        if self.potential.scale <= 0:
            raise ConfigError("potential.scale must be positive")
        return self

    # -- serialization ------------------------------------------------

    def to_dict(self) -> dict:
        def convert(obj):
            if dataclasses.is_dataclass(obj):
                return {k: convert(v) for k, v in dataclasses.asdict(obj).items()}
            if isinstance(obj, (tuple, list)):
                return [convert(v) for v in obj]
            return obj

        return convert(self)

    def content_hash(self) -> str:
        """Hash of everything that determines the numbers (not out_dir)."""
        payload = self.to_dict()
        payload.pop("out_dir", None)
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _tuplify(obj):
    if isinstance(obj, list):
        return tuple(_tuplify(v) for v in obj)
    return obj


def _from_dict(data: dict) -> RunConfig:
    try:
        pot = PotentialSpec(**{k: _tuplify(v) for k, v in data.get("potential", {}).items()})
        prof = ProfileSpec(**data.get("profile", {}))
        fld = FieldSpec(**{k: _tuplify(v) for k, v in data.get("field2d", {}).items()})
        diag = DiagnosticsSpec(**{k: _tuplify(v) for k, v in data.get("diagnostics", {}).items()})
        return RunConfig(potential=pot, profile=prof, field2d=fld, diagnostics=diag,
                         seed=int(data.get("seed", 0)),
                         out_dir=str(data.get("out_dir", "runs")))
    except TypeError as exc:
        raise ConfigError(f"unknown or malformed configuration key: {exc}") from exc


def default_config() -> RunConfig:
    return RunConfig().validate()


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return _from_dict(data).validate()


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as fh:
        fh.write(_UNITS_HEADER)
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True,
                       default_flow_style=None)
