"""Resonances and spectral shift profiles for perturbed magnetic Pauli
operators near the low ground state, at desk scale."""

__version__ = "0.1.0"

from .model import (MagneticModel, PotentialSpec, ProfileClass, RegionSpec,
                    SectorBounds, SeparableParts, ValidationFailure,
                    sector_membership, region_admissible, validate_potential,
                    transverse_weight_W)
from .landau import (ToeplitzSpectrum, counting_function, fit_counting_asymptotics,
                     lll_projection_kernel, n_tilde_p, phi, sigma_p,
                     toeplitz_matrix, toeplitz_spectrum)
from .longitudinal import (AxisGrid, build_axis_grid, resolvent_kernel_1d,
                           s_kernel, series_switch_threshold)
from .birman_schwinger import (BSMatrix, Grids, PauliFamily, SyntheticFamily,
                               SyntheticModel, assemble_T, assemble_synthetic,
                               build_B, build_Q_resolvent_block, det2,
                               make_grids, trace_dz_T)
from .resonances import (Box, Resonance, ScanConfig, ScanReport,
                         count_in_annulus, scan_annulus, scan_resonances,
                         winding_number)
from .ssf import (BreitWignerDecomposition, SSFConfig, SSFProfile,
                  breit_wigner_decompose, compute_profile, negative_axis_jumps,
                  phi_singularity_check, trace_formula_check, xi2_at,
                  xi_prime_at)
from .potentials import CatalogEntry, by_name, catalog
