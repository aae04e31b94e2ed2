"""Numerical laboratory for planar three-phase interface systems.

Builds triple-well potentials, computes the minimizing 1D connections
between phases, relaxes 2D fields with a triple junction on large finite
domains, and measures sharp-interface asymptotics (energy growth,
equipartition, slice conservation laws, interface localization, decay
rates) as finite-scale diagnostics.
"""

from .config import RunConfig, default_config, load_config, save_config
from .field2d import (EnergyBreakdown, Field2D, GridSpec, ProfileTriple,
                      competitor_init, energy, load_checkpoint, relax,
                      residual, save_checkpoint, slice_field)
from .hetero1d import (Profile1D, SpectrumReport, equipartition_residual,
                       linearized_spectrum, profile_energy, sample_profile,
                       solve_connection, truncated_energy)
from .partition import (ON_INTERFACE, SectorPartition, TriodGeometry,
                        classify, partition_energy, triod_length_in_disk,
                        triple_junction_map)
from .potential import (Potential, WellTriple, check_hypotheses, evaluate,
                        interface_width, make_triple_well)

__version__ = "0.1.0"
