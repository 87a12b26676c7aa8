"""oamlens: orbital-angular-momentum dependent magnetic lensing.

Three fidelity levels for the same physics: closed-form thin-lens optics
with the exact focal dispersion law (:mod:`oamlens.analytic`), semiclassical
radial ray tracing (:mod:`oamlens.ray`), and unitary paraxial wave
propagation of azimuthal components (:mod:`oamlens.wave`), all sharing the
field models of :mod:`oamlens.fields` and the constants and numerical
primitives of :mod:`oamlens.core`. Config-driven experiment protocols live
in :mod:`oamlens.experiments`; ``oamlens.cli`` and ``oamlens.service``
expose them on the command line and over HTTP.
"""

from .core import (CONSTANTS, BeamParameters, ConfigurationError, DomainError,
                   NumericalError, PhysicalConstants, integrate_line, make_beam)
from .fields import (AxialFieldModel, FieldIntegrals, eval_axial_field,
                     axial_solenoid_phi_integral, field_integrals,
                     multipole_phi_integral,
                     vector_potential_phi)
from .analytic import (DispersionSummary, ImageSolution, LensElement,
                       OpticalColumn, RayTransferMatrix, StackMagnification,
                       afocal_stack_magnification, approx_focal_length,
                       column_matrix, compose, dispersion_summary,
                       drift_matrix, flux_quanta_focal_length, focal_length,
                       image_solve, larmor_phase, principal_focus_distance,
                       spherical_c3, thin_lens_matrix,
                       variable_spacing_image_solve,
                       variable_spacing_magnification)
from .ray import RayState, RayTrajectory, focal_crossing, radial_rhs, trace
from .wave import (AzimuthalWave, CartesianField, LGModeSpec, OAMSpectrum,
                   PropagationOptions, RadialGrid, aperture_transmission,
                   apply_aperture, lg_mode, oam_spectrum, propagate,
                   ring_spectrum_2d, rms_radius, step, synthesize_2d,
                   waist_position, write_pgm16, write_profile_csv,
                   write_spectrum_csv)
from .experiments import ExperimentConfig, RunReport, config_json_schema, run

__version__ = "0.1.0"

__all__ = [
    "CONSTANTS", "PhysicalConstants", "BeamParameters", "make_beam",
    "integrate_line", "DomainError", "NumericalError", "ConfigurationError",
    "AxialFieldModel", "FieldIntegrals", "eval_axial_field", "field_integrals",
    "vector_potential_phi", "multipole_phi_integral",
    "axial_solenoid_phi_integral",
    "LensElement", "OpticalColumn", "RayTransferMatrix", "DispersionSummary",
    "ImageSolution", "StackMagnification",
    "focal_length", "dispersion_summary", "approx_focal_length",
    "flux_quanta_focal_length", "larmor_phase",
    "spherical_c3", "thin_lens_matrix", "drift_matrix", "compose",
    "column_matrix", "principal_focus_distance", "image_solve",
    "afocal_stack_magnification",
    "variable_spacing_magnification", "variable_spacing_image_solve",
    "RayState", "RayTrajectory", "radial_rhs", "trace", "focal_crossing",
    "RadialGrid", "AzimuthalWave", "LGModeSpec", "OAMSpectrum",
    "CartesianField", "PropagationOptions", "lg_mode", "step", "propagate",
    "rms_radius", "waist_position", "oam_spectrum", "aperture_transmission",
    "apply_aperture", "synthesize_2d", "ring_spectrum_2d",
    "write_profile_csv", "write_spectrum_csv", "write_pgm16",
    "ExperimentConfig", "RunReport", "config_json_schema", "run",
]
