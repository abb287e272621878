"""Generalized-reflectivity microwave imaging."""

__version__ = "0.1.0"

from .em_core import (Wavenumber, apply_adjoint, apply_forward, assemble_measurement_matrix,  # noqa: E402
                      dyadic_green, incident_field, scalar_green)
from .metrics import SsimParams, composite_image, ssim  # noqa: E402
from .patchwise import back_project, fast_reconstruct, partition_grid, psf_block, splice  # noqa: E402
from .scene import (Acquisition, GroupedMeasurements, ImagingGrid, add_noise, born_forward,  # noqa: E402
                    build_groups, foldy_lax_forward, load_scene)
from .solver import SolverConfig, mixed_norm, prox_mixed_norm, solve_first_order  # noqa: E402

__all__ = [
    "Wavenumber", "apply_adjoint", "apply_forward", "assemble_measurement_matrix", "dyadic_green",
    "incident_field", "scalar_green", "SsimParams", "composite_image", "ssim", "back_project",
    "fast_reconstruct", "partition_grid", "psf_block", "splice", "Acquisition", "GroupedMeasurements",
    "ImagingGrid", "add_noise", "born_forward", "build_groups", "foldy_lax_forward", "load_scene",
    "SolverConfig", "mixed_norm", "prox_mixed_norm", "solve_first_order",
]
