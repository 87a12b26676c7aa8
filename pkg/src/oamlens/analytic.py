"""Closed-form lens optics: focal dispersion, phases, and transfer matrices.

The quantum number m of an azimuthal beam component couples to a round
magnetic lens through the cubic term of the vector potential. With the
moment integrals of one element's profiles,

    1/f_m = e^2/(8 m_e E) * [ int B1^2 dz - (m hbar / (e b^2)) int B3 dz ],

so the m = 0 focal length f0 and a dimensionless dispersion strength Lambda
characterize the whole family exactly:

    f_m = f0 / (1 - Lambda * m),
    Lambda = (hbar / (e b^2)) * (int B3 dz) / (int B1^2 dz).

Everything else here (per-m transfer matrices, telescope stacks, image
solves) is ordinary paraxial ABCD algebra built on that dispersion law.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import CONSTANTS, BeamParameters, DomainError
from .fields import AxialFieldModel, FieldIntegrals, field_integrals

__all__ = [
    "LensElement",
    "OpticalColumn",
    "RayTransferMatrix",
    "DispersionSummary",
    "ImageSolution",
    "StackMagnification",
    "focal_length",
    "dispersion_summary",
    "approx_focal_length",
    "flux_quanta_focal_length",
    "larmor_phase",
    "spherical_c3",
    "thin_lens_matrix",
    "drift_matrix",
    "compose",
    "column_matrix",
    "principal_focus_distance",
    "image_solve",
    "afocal_stack_magnification",
    "variable_spacing_magnification",
    "variable_spacing_image_solve",
]


@dataclass(frozen=True)
class LensElement:
    """A field model placed on the column axis at ``z_center``."""

    model: AxialFieldModel
    z_center: float = 0.0


@dataclass(frozen=True)
class OpticalColumn:
    """An ordered sequence of lens elements plus optional hard apertures.

    ``apertures`` is a sequence of (z, radius) pairs. ``object_z`` marks the
    default launch/object plane for matrix and tracing helpers.
    """

    elements: Tuple[LensElement, ...] = ()
    apertures: Tuple[Tuple[float, float], ...] = ()
    object_z: float = 0.0

    def __post_init__(self):
        elements = tuple(self.elements)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "apertures", tuple(
            (float(z), float(r)) for z, r in self.apertures))
        centers = [e.z_center for e in elements]
        if any(c2 <= c1 for c1, c2 in zip(centers, centers[1:])):
            raise DomainError("element centers must be strictly increasing in z")
        for z, r in self.apertures:
            if not r > 0.0:
                raise DomainError(f"aperture at z={z:g} has non-positive radius")

    def axial_profiles(self, z):
        """Superposed on-axis profiles at absolute z: returns
        (sum_i B1_i, sum_i B3_i / b_i^2).

        Fields of separate elements superpose before any squaring, so this
        is the correct input for phase densities and ray forces. Tabulated
        elements contribute zero outside their sampled range.
        """
        scalar = np.isscalar(z) or np.ndim(z) == 0
        z = np.atleast_1d(np.asarray(z, dtype=float))
        b1_tot = np.zeros(z.shape)
        s3_tot = np.zeros(z.shape)
        for el in self.elements:
            zr = z - el.z_center
            model = el.model
            if model.kind == "tabulated":
                inside = (zr >= model.table_z[0]) & (zr <= model.table_z[-1])
                if not inside.any():
                    continue
                b1, b3 = model.eval(zr[inside])
                b1_tot[inside] += b1
                s3_tot[inside] += b3 / model.dispersion_length ** 2
            else:
                b1, b3 = model.eval(zr)
                b1_tot += b1
                s3_tot += b3 / model.dispersion_length ** 2
        if scalar:
            return float(b1_tot[0]), float(s3_tot[0])
        return b1_tot, s3_tot

    def field_regions(self, pad: float = 8.0):
        """(z_lo, z_hi) intervals where some element's field is significant;
        used by steppers to shrink their step. ``pad`` is in units of each
        element's extent."""
        return [(el.z_center - pad * el.model.extent,
                 el.z_center + pad * el.model.extent) for el in self.elements]


@dataclass(frozen=True)
class RayTransferMatrix:
    """2x2 paraxial transfer matrix acting on (rho, drho/dz)."""

    a: float
    b: float
    c: float
    d: float

    @property
    def determinant(self) -> float:
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: "RayTransferMatrix") -> "RayTransferMatrix":
        return RayTransferMatrix(
            a=self.a * other.a + self.b * other.c,
            b=self.a * other.b + self.b * other.d,
            c=self.c * other.a + self.d * other.c,
            d=self.c * other.b + self.d * other.d,
        )

    def apply(self, rho: float, slope: float) -> Tuple[float, float]:
        return (self.a * rho + self.b * slope, self.c * rho + self.d * slope)

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])


@dataclass(frozen=True)
class DispersionSummary:
    """m = 0 focal length, dispersion strength, and peak flux count.

    ``beta0`` is the dispersion strength rescaled to flux quanta through the
    dispersion disc at the peak on-axis field, beta0 = Lambda e B_peak b^2 /
    hbar; it is 2 for the bell profile independent of every parameter.
    """

    f0: float
    Lambda: float
    beta0: float


def _integrals(model: AxialFieldModel,
               integrals: Optional[FieldIntegrals] = None) -> FieldIntegrals:
    return integrals if integrals is not None else field_integrals(model)


def focal_length(model: AxialFieldModel, beam: BeamParameters, m: int,
                 integrals: Optional[FieldIntegrals] = None) -> float:
    """Thin-lens focal length for azimuthal order m, in meters.

    Returns ``math.inf`` when the focusing power vanishes exactly (the
    cubic coupling cancels the quadratic focusing) and a negative value for
    a net diverging lens; neither is an error, the sign carries the optics.
    """
    ints = _integrals(model, integrals)
    c = CONSTANTS
    energy = beam.kinetic_energy
    coupling = c.e_charge ** 2 / (8.0 * c.m_e * energy)
    power = coupling * (ints.i_b1sq
                        - (m * c.hbar / (c.e_charge * model.dispersion_length ** 2))
                        * ints.i_b3)
    if power == 0.0:
        return math.inf
    return 1.0 / power


def dispersion_summary(model: AxialFieldModel, beam: BeamParameters,
                       integrals: Optional[FieldIntegrals] = None) -> DispersionSummary:
    """Collapse an element to its (f0, Lambda, beta0) triple.

    Raises
    ------
    DomainError
        If the element has no focusing power at all (int B1^2 dz = 0), in
        which case neither f0 nor Lambda is defined.
    """
    ints = _integrals(model, integrals)
    if ints.i_b1sq == 0.0:
        raise DomainError("degenerate lens: int B1^2 dz vanishes, "
                          "no focal length or dispersion defined")
    c = CONSTANTS
    f0 = 8.0 * c.m_e * beam.kinetic_energy / (c.e_charge ** 2 * ints.i_b1sq)
    lam = (c.hbar / (c.e_charge * model.dispersion_length ** 2)) \
        * ints.i_b3 / ints.i_b1sq
    b1_peak = _peak_dipole(model)
    beta0 = lam * c.e_charge * b1_peak * model.dispersion_length ** 2 / c.hbar
    return DispersionSummary(f0=f0, Lambda=lam, beta0=beta0)


def _peak_dipole(model: AxialFieldModel) -> float:
    if model.kind == "tabulated":
        return float(np.max(np.abs(model.table_b1)))
    if model.kind == "wire_loop":
        return 0.5 * model.peak_field
    return abs(model.peak_field)


def approx_focal_length(f0: float, Lambda: float, m: int) -> float:
    """First-order dispersion law f_m ~ f0 (1 + Lambda m)."""
    return f0 * (1.0 + Lambda * m)


def flux_quanta_focal_length(f0: float, beta1: float, m: int, n_flux: float) -> float:
    """Same first-order law with Lambda = beta1 / n_flux.

    ``n_flux`` counts flux quanta threaded through the dispersion disc;
    ``beta1`` is the profile's order-unity shape constant.
    """
    if n_flux == 0.0:
        raise DomainError("n_flux must be nonzero")
    return approx_focal_length(f0, beta1 / n_flux, m)


def larmor_phase(model: AxialFieldModel, beam: BeamParameters, m: int,
                 integrals: Optional[FieldIntegrals] = None) -> float:
    """m-proportional rotation phase picked up crossing one element, rad.

    chi_m = -m * sqrt(e / (8 m_e V_a)) * int B1 dz. Odd in both m and the
    element polarity; zero for the round m = 0 component.
    """
    ints = _integrals(model, integrals)
    c = CONSTANTS
    rate = math.sqrt(c.e_charge / (8.0 * c.m_e * beam.accelerating_voltage))
    return -m * rate * ints.i_b1


def spherical_c3(model: AxialFieldModel, beam: BeamParameters, f: float,
                 integrals: Optional[FieldIntegrals] = None) -> float:
    """Spherical-aberration coefficient of the cubic potential term, meters.

    C3(f) = e^2 f^4 / (8 m_e E b^2) * int B1 B3 dz. For the bell profile
    evaluated at its own f0 this collapses to f0^3 / b^2.
    """
    ints = _integrals(model, integrals)
    c = CONSTANTS
    return (c.e_charge ** 2 * f ** 4
            / (8.0 * c.m_e * beam.kinetic_energy * model.dispersion_length ** 2)
            * ints.i_b1b3)


# -- ABCD algebra ------------------------------------------------------------

def thin_lens_matrix(f: float) -> RayTransferMatrix:
    """Thin lens of focal length f; f = +-inf degrades to the identity.

    Raises
    ------
    DomainError
        If f is exactly zero (no thin-lens limit exists).
    """
    if f == 0.0:
        raise DomainError("thin lens with f = 0 is not representable")
    if math.isinf(f):
        return RayTransferMatrix(1.0, 0.0, 0.0, 1.0)
    return RayTransferMatrix(1.0, 0.0, -1.0 / f, 1.0)


def drift_matrix(d: float) -> RayTransferMatrix:
    """Field-free propagation over axial distance d (may be negative)."""
    return RayTransferMatrix(1.0, float(d), 0.0, 1.0)


def compose(*matrices: RayTransferMatrix) -> RayTransferMatrix:
    """Compose matrices given in propagation order (first traversed first)."""
    total = RayTransferMatrix(1.0, 0.0, 0.0, 1.0)
    for mat in matrices:
        total = mat @ total
    return total


def column_matrix(column: OpticalColumn, beam: BeamParameters, m: int,
                  z_from: Optional[float] = None,
                  z_to: Optional[float] = None) -> RayTransferMatrix:
    """Thin-lens transfer matrix of a column between two planes.

    Each element collapses to a thin lens of focal length f_m at its
    center. A warning is issued when any f_m is within a factor 10 of the
    element's axial extent, where the thin-lens picture degrades.

    Parameters
    ----------
    z_from, z_to : float, optional
        Start and end planes; default to the column's object plane and the
        last element's center. An empty column needs an explicit z_to.
    """
    if z_from is None:
        z_from = column.object_z
    if z_to is None:
        if not column.elements:
            raise DomainError("empty column: z_to must be given explicitly")
        z_to = column.elements[-1].z_center
    if z_to < z_from:
        raise DomainError(f"z_to={z_to:g} precedes z_from={z_from:g}")
    mats = []
    z = z_from
    for el in column.elements:
        if el.z_center < z_from or el.z_center > z_to:
            continue
        f = focal_length(el.model, beam, m)
        if math.isfinite(f) and abs(f) <= 10.0 * el.model.extent:
            warnings.warn(
                f"element at z={el.z_center:g}: |f_m|={abs(f):.3g} m is within "
                f"10x the field extent {el.model.extent:.3g} m; thin-lens "
                "treatment is marginal", stacklevel=2)
        mats.append(drift_matrix(el.z_center - z))
        mats.append(thin_lens_matrix(f))
        z = el.z_center
    mats.append(drift_matrix(z_to - z))
    return compose(*mats)


def principal_focus_distance(matrix: RayTransferMatrix) -> float:
    """Distance past the matrix exit plane where an incoming collimated ray
    crosses the axis: -A/C. Infinite when the system is afocal (C = 0)."""
    if matrix.c == 0.0:
        return math.inf
    return -matrix.a / matrix.c


@dataclass(frozen=True)
class ImageSolution:
    """Image-plane location and magnification for a given object distance.

    For an afocal system (output rays parallel) the image recedes to
    infinity; ``afocal`` is set and ``angular_magnification`` carries the
    slope ratio instead of a transverse magnification.
    """

    image_distance: float
    magnification: float
    afocal: bool = False
    angular_magnification: Optional[float] = None


def image_solve(matrix: RayTransferMatrix, object_distance: float) -> ImageSolution:
    """Solve for the image plane of a system matrix.

    ``matrix`` maps the system's entrance plane to its exit plane; the
    object sits ``object_distance`` upstream of the entrance. The image
    condition is vanishing (rho | slope) coupling of the object-to-image
    matrix.
    """
    m_obj = matrix @ drift_matrix(object_distance)
    if m_obj.d == 0.0:
        # Object at a focal plane: every object point exits as a collimated
        # bundle. The meaningful gain is direction per object height, the
        # (slope | rho) entry of the object-referenced matrix.
        return ImageSolution(image_distance=math.inf, magnification=math.inf,
                             afocal=True, angular_magnification=m_obj.c)
    x = -m_obj.b / m_obj.d
    mag = m_obj.a + x * m_obj.c
    return ImageSolution(image_distance=x, magnification=mag)


@dataclass(frozen=True)
class StackMagnification:
    """Afocal N-pair telescope magnification, exact and exponentiated."""

    exact: float
    approximate: float
    n_pairs: int


def afocal_stack_magnification(Lambda: float, m: int, n_pairs: int) -> StackMagnification:
    """Magnification of N back-to-back telescopes of opposite dispersion.

    Each pair couples a lens of focal length f0/(1 - Lambda m) to one of
    f0/(1 + Lambda m) separated by the sum of the two, giving per-pair
    magnification -(1 + Lambda m)/(1 - Lambda m); N pairs compound to

        exact  = ( -(1 + Lambda m)/(1 - Lambda m) )^N
        approx = (-1)^N * exp(2 Lambda m N)

    The exponential form is the small-Lambda*m limit; both are returned so
    callers can see the compounding error.
    """
    if n_pairs < 1:
        raise DomainError("n_pairs must be at least 1")
    x = Lambda * m
    if x == 1.0:
        raise DomainError("dispersion pole: Lambda*m = 1 leaves the first "
                          "lens of each pair unfocused")
    exact = (-(1.0 + x) / (1.0 - x)) ** n_pairs
    approx = (-1.0) ** n_pairs * math.exp(2.0 * x * n_pairs)
    return StackMagnification(exact=exact, approximate=approx, n_pairs=n_pairs)


def variable_spacing_magnification(Lambda: float, m: int, s: float) -> float:
    """Magnification of the two-lens spacing-tuned telescope family,

        M_m = 1 / (1 - 2 (s + 1) Lambda m),

    where s > 0 parametrizes the spacing. Exactly 1 for m = 0 regardless of
    s. At the pole 2 (s+1) Lambda m = 1 the magnification is returned as
    ``math.inf`` (signed by the approach direction is meaningless there).
    """
    if not s > 0.0:
        raise DomainError("spacing parameter s must be positive")
    den = 1.0 - 2.0 * (s + 1.0) * Lambda * m
    if den == 0.0:
        return math.inf
    return 1.0 / den


def variable_spacing_image_solve(Lambda: float, m: int, s: float,
                                 f0: float) -> ImageSolution:
    """ABCD realization of the spacing-tuned telescope.

    Concrete geometry reproducing the closed form to second order in
    Lambda*m: first lens f0/(1 - Lambda m), second lens f0/(1 + Lambda m)
    (opposite dispersion polarity), separated by 2 (s + 1) f0, object
    placed (s + 1) f0 / s upstream of the first lens. The residual between
    this solve and the closed form is 2 (s+1)^2 (Lambda m)^2 /
    (s |1 - 2 (s+1) Lambda m|) in relative terms.
    """
    if not s > 0.0:
        raise DomainError("spacing parameter s must be positive")
    if not f0 > 0.0:
        raise DomainError("f0 must be positive")
    x = Lambda * m
    if x == 1.0 or x == -1.0:
        raise DomainError("dispersion pole: |Lambda*m| = 1")
    f1 = f0 / (1.0 - x)
    f2 = f0 / (1.0 + x)
    sep = 2.0 * (s + 1.0) * f0
    system = compose(thin_lens_matrix(f1), drift_matrix(sep), thin_lens_matrix(f2))
    return image_solve(system, (s + 1.0) * f0 / s)
