"""Axial magnetic field models for round lenses and their moment integrals.

A lens element is described near the axis by the first two even multipole
profiles of its field expansion: the on-axis dipole profile B1(z) and the
cubic-in-radius correction profile B3(z), entering the azimuthal vector
potential as

    A_phi(rho, z) = B1(z) * rho / 2  -  B3(z) * rho**3 / (8 * b**2),

where b is the dispersion length of the element (the radial scale on which
the cubic term competes with the linear one). Three concrete models are
supported: a bell-shaped analytic profile, a single current loop, and a
tabulated profile loaded from CSV.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np

from .core import CONSTANTS, DomainError, integrate_line

__all__ = [
    "AxialFieldModel",
    "FieldIntegrals",
    "PotentialSample",
    "MultipoleLineIntegral",
    "eval_axial_field",
    "vector_potential_phi",
    "field_integrals",
    "multipole_phi_integral",
    "axial_solenoid_phi_integral",
    "write_field_csv",
    "read_field_csv",
]

GLASER = "glaser"
WIRE_LOOP = "wire_loop"
TABULATED = "tabulated"


@dataclass(frozen=True)
class AxialFieldModel:
    """One lens element's axial field profiles, centered on z = 0.

    Use the classmethod constructors; the generic constructor exists for
    dataclass plumbing only.

    Parameters
    ----------
    kind : str
        One of ``"glaser"``, ``"wire_loop"``, ``"tabulated"``.
    dispersion_length : float
        Radial scale b (m) of the cubic correction term.
    polarity : int
        +1 or -1; flips the sign of both profiles (current reversal).
    peak_field : float, optional
        Field scale B0 in tesla. For the bell profile this is the on-axis
        peak; for the loop it is mu0 * I0 / R (the on-axis peak is B0 / 2).
    half_width : float, optional
        Axial half-width a (m) of the bell profile.
    loop_radius : float, optional
        Loop radius R (m).
    loop_current : float, optional
        Loop current I0 (A); stored for provenance when given.
    table_z, table_b1, table_b3 : ndarray, optional
        Sample grid for the tabulated model; strictly increasing z.
    """

    kind: str
    dispersion_length: float
    polarity: int = 1
    peak_field: Optional[float] = None
    half_width: Optional[float] = None
    loop_radius: Optional[float] = None
    loop_current: Optional[float] = None
    table_z: Optional[np.ndarray] = field(default=None, repr=False)
    table_b1: Optional[np.ndarray] = field(default=None, repr=False)
    table_b3: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in (GLASER, WIRE_LOOP, TABULATED):
            raise DomainError(f"unknown field model kind {self.kind!r}")
        if self.polarity not in (-1, 1):
            raise DomainError(f"polarity must be +1 or -1, got {self.polarity!r}")
        if not self.dispersion_length > 0.0:
            raise DomainError("dispersion_length must be positive")

    # -- constructors -------------------------------------------------------

    @classmethod
    def glaser(cls, peak_field: float, half_width: float,
               dispersion_length: float, polarity: int = 1) -> "AxialFieldModel":
        """Bell-shaped profile B(z) = B0 / (1 + z^2/a^2), with B3 = B1.

        The dispersion length b is an independent parameter; realistic
        columns have b orders of magnitude below a.
        """
        if not half_width > 0.0:
            raise DomainError("half_width must be positive")
        return cls(kind=GLASER, peak_field=float(peak_field),
                   half_width=float(half_width),
                   dispersion_length=float(dispersion_length),
                   polarity=int(polarity))

    @classmethod
    def wire_loop(cls, loop_radius: float, loop_current: Optional[float] = None,
                  peak_field: Optional[float] = None,
                  polarity: int = 1) -> "AxialFieldModel":
        """Single circular current loop of radius R in the z = 0 plane.

        Exactly one of ``loop_current`` or ``peak_field`` must be given; they
        are related by B0 = mu0 * I0 / R. The dispersion length of this model
        is the loop radius itself, not a free parameter. With
        l(z) = sqrt(z^2 + R^2) the stored profiles are

            B1 = B0 * R^3 / (2 l^3)
            B3 = 3 B0 * (R^5/l^5 + (5/2) R^7/l^7)

        Note the cubic profile is a modeling ansatz tied to this package's
        lensing formulas, not the Taylor coefficient of the exact
        Biot-Savart loop potential; see the tests for the exact-loop
        comparison and its quadratic-in-rho mismatch scale.
        """
        if not loop_radius > 0.0:
            raise DomainError("loop_radius must be positive")
        if (loop_current is None) == (peak_field is None):
            raise DomainError("give exactly one of loop_current or peak_field")
        if peak_field is None:
            peak_field = CONSTANTS.mu0 * loop_current / loop_radius
        return cls(kind=WIRE_LOOP, peak_field=float(peak_field),
                   loop_radius=float(loop_radius),
                   loop_current=None if loop_current is None else float(loop_current),
                   dispersion_length=float(loop_radius), polarity=int(polarity))

    @classmethod
    def tabulated(cls, z: np.ndarray, b1: np.ndarray, b3: np.ndarray,
                  dispersion_length: float, polarity: int = 1) -> "AxialFieldModel":
        """Piecewise-linear profiles on a strictly increasing z grid."""
        z = np.asarray(z, dtype=float)
        b1 = np.asarray(b1, dtype=float)
        b3 = np.asarray(b3, dtype=float)
        if z.ndim != 1 or len(z) < 2:
            raise DomainError("tabulated model needs at least two samples")
        if not (len(z) == len(b1) == len(b3)):
            raise DomainError("z, B1, B3 tables must have equal length")
        if not np.all(np.diff(z) > 0.0):
            raise DomainError("tabulated z grid must be strictly increasing")
        return cls(kind=TABULATED, table_z=z, table_b1=b1, table_b3=b3,
                   dispersion_length=float(dispersion_length),
                   polarity=int(polarity))

    # -- evaluation ---------------------------------------------------------

    @property
    def extent(self) -> float:
        """Characteristic axial half-extent of the field region (m)."""
        if self.kind == GLASER:
            return self.half_width
        if self.kind == WIRE_LOOP:
            return self.loop_radius
        return 0.5 * float(self.table_z[-1] - self.table_z[0])

    def eval(self, z: Union[float, np.ndarray]):
        """Evaluate (B1, B3) at axial position(s) z relative to the element
        center. Tabulated models raise DomainError outside their grid."""
        z = np.asarray(z, dtype=float)
        if self.kind == GLASER:
            bell = self.peak_field / (1.0 + (z / self.half_width) ** 2)
            b1 = b3 = bell
        elif self.kind == WIRE_LOOP:
            r = self.loop_radius
            ell2 = z * z + r * r
            ell = np.sqrt(ell2)
            b1 = 0.5 * self.peak_field * r ** 3 / (ell2 * ell)
            r5 = (r * r / ell2) ** 2 * (r / ell)
            b3 = 3.0 * self.peak_field * (r5 + 2.5 * r5 * (r * r / ell2))
        else:
            zmin, zmax = self.table_z[0], self.table_z[-1]
            if np.any(z < zmin) or np.any(z > zmax):
                raise DomainError(
                    f"tabulated field queried at z outside [{zmin:g}, {zmax:g}]")
            b1 = np.interp(z, self.table_z, self.table_b1)
            b3 = np.interp(z, self.table_z, self.table_b3)
        s = float(self.polarity)
        return s * b1, s * b3

    def flipped(self) -> "AxialFieldModel":
        """Same element with the excitation current reversed."""
        return AxialFieldModel(
            kind=self.kind, dispersion_length=self.dispersion_length,
            polarity=-self.polarity, peak_field=self.peak_field,
            half_width=self.half_width, loop_radius=self.loop_radius,
            loop_current=self.loop_current, table_z=self.table_z,
            table_b1=self.table_b1, table_b3=self.table_b3)


def eval_axial_field(model: AxialFieldModel, z):
    """Module-level alias for :meth:`AxialFieldModel.eval`."""
    return model.eval(z)


class PotentialSample(NamedTuple):
    """Azimuthal vector potential value plus a validity flag.

    ``beyond_dispersion_length`` is set when rho exceeds the element's b;
    the cubic truncation of the potential is uncontrolled out there, so the
    value is returned but flagged.
    """

    a_phi: float
    beyond_dispersion_length: bool


def vector_potential_phi(model: AxialFieldModel, rho: float, z: float) -> PotentialSample:
    """Azimuthal vector potential A_phi(rho, z) of one element, in T m.

    Raises
    ------
    DomainError
        If rho is negative.
    """
    if rho < 0.0:
        raise DomainError(f"rho must be non-negative, got {rho!r}")
    b1, b3 = model.eval(z)
    b = model.dispersion_length
    a_phi = 0.5 * float(b1) * rho - float(b3) * rho ** 3 / (8.0 * b * b)
    return PotentialSample(a_phi=a_phi, beyond_dispersion_length=bool(rho > b))


@dataclass(frozen=True)
class FieldIntegrals:
    """Line integrals of the field profiles along the full axis.

    i_b1sq = int B1^2 dz      (T^2 m)   focusing strength
    i_b3   = int B3 dz        (T m)     OAM-coupling strength
    i_b1   = int B1 dz        (T m)     image-rotation strength
    i_b1b3 = int B1 B3 dz     (T^2 m)   spherical-aberration cross term
    method : "analytic" or "quadrature", whichever produced the values.
    """

    i_b1sq: float
    i_b3: float
    i_b1: float
    i_b1b3: float
    method: str


def _model_profile(model: AxialFieldModel, which: str):
    def f(z: float) -> float:
        b1, b3 = model.eval(z)
        if which == "b1sq":
            return float(b1) ** 2
        if which == "b3":
            return float(b3)
        if which == "b1":
            return float(b1)
        return float(b1) * float(b3)
    return f


def _tabulated_integrals(model: AxialFieldModel) -> FieldIntegrals:
    # Piecewise-linear profiles integrate exactly segment by segment:
    # linear terms by the trapezoid rule, products of linears by the
    # quadratic closed form h/6 * (2 f0 g0 + f0 g1 + f1 g0 + 2 f1 g1).
    s = float(model.polarity)
    z = model.table_z
    f1 = s * model.table_b1
    f3 = s * model.table_b3
    h = np.diff(z)
    i_b1 = float(np.sum(0.5 * h * (f1[:-1] + f1[1:])))
    i_b3 = float(np.sum(0.5 * h * (f3[:-1] + f3[1:])))
    i_b1sq = float(np.sum(h / 6.0 * (2.0 * f1[:-1] ** 2 + 2.0 * f1[:-1] * f1[1:]
                                     + 2.0 * f1[1:] ** 2)))
    i_b1b3 = float(np.sum(h / 6.0 * (2.0 * f1[:-1] * f3[:-1] + f1[:-1] * f3[1:]
                                     + f1[1:] * f3[:-1] + 2.0 * f1[1:] * f3[1:])))
    return FieldIntegrals(i_b1sq=i_b1sq, i_b3=i_b3, i_b1=i_b1, i_b1b3=i_b1b3,
                          method="analytic")


def field_integrals(model: AxialFieldModel, method: str = "auto",
                    rel_tol: float = 1e-9) -> FieldIntegrals:
    """Moment integrals of one element's profiles over the whole axis.

    Parameters
    ----------
    model : AxialFieldModel
    method : {"auto", "analytic", "quadrature"}
        "auto" uses closed forms where available and quadrature otherwise;
        "analytic" requires a closed form (DomainError if none exists for
        some component); "quadrature" forces adaptive integration for every
        component, which is always available and serves as a cross-check.
    rel_tol : float
        Relative tolerance for the quadrature path.
    """
    if method not in ("auto", "analytic", "quadrature"):
        raise DomainError(f"unknown method {method!r}")
    s = float(model.polarity)

    analytic = None
    if model.kind == GLASER:
        b0, a = model.peak_field, model.half_width
        # int dz/(1+u^2) = pi a ; int dz/(1+u^2)^2 = pi a / 2
        analytic = FieldIntegrals(
            i_b1sq=0.5 * math.pi * b0 * b0 * a,
            i_b3=s * math.pi * b0 * a,
            i_b1=s * math.pi * b0 * a,
            i_b1b3=0.5 * math.pi * b0 * b0 * a,
            method="analytic")
    elif model.kind == TABULATED:
        analytic = _tabulated_integrals(model)

    if method != "quadrature" and analytic is not None:
        return analytic

    if model.kind == TABULATED:
        # Profiles are only defined on the table; the closed forms above are
        # already exact, so the quadrature request just returns them.
        return analytic

    if model.kind == WIRE_LOOP and method == "analytic":
        # Only the linear moments int B3 dz = 12 B0 R and int B1 dz = B0 R
        # have closed forms worth pinning; the quadratic moments go through
        # quadrature so one independent path stays alive.
        raise DomainError("wire_loop has no full analytic fast path; "
                          "use method='auto' or 'quadrature'")

    vals = {}
    for which in ("b1sq", "b3", "b1", "b1b3"):
        vals[which] = integrate_line(_model_profile(model, which),
                                     rel_tol=rel_tol).value
    if model.kind == WIRE_LOOP and method == "auto":
        b0, r = model.peak_field, model.loop_radius
        return FieldIntegrals(i_b1sq=vals["b1sq"], i_b3=s * 12.0 * b0 * r,
                              i_b1=s * b0 * r, i_b1b3=vals["b1b3"],
                              method="analytic+quadrature")
    return FieldIntegrals(i_b1sq=vals["b1sq"], i_b3=vals["b3"],
                          i_b1=vals["b1"], i_b1b3=vals["b1b3"],
                          method="quadrature")


# -- transverse-solenoid multipole arrangements -----------------------------

class MultipoleLineIntegral(NamedTuple):
    """z-line integral of A_phi for a solenoid arrangement.

    ``value`` is int A_phi dz (T m^2) along the straight path at (rho, phi);
    ``solenoid_scale`` is the largest single-solenoid int |A_phi| dz, the
    natural yardstick for calling the total a null.
    """

    value: float
    solenoid_scale: float


def _loop_potential(points: np.ndarray, center: np.ndarray, normal: np.ndarray,
                    radius: float, current: float, n_segments: int = 256) -> np.ndarray:
    """Vector potential of one circular current loop at many field points.

    Periodic trapezoid over the loop parameter; spectrally accurate while
    the field points stay off the wire.
    """
    normal = normal / np.linalg.norm(normal)
    # Orthonormal frame spanning the loop plane.
    seed = np.array([1.0, 0.0, 0.0])
    if abs(normal @ seed) > 0.9:
        seed = np.array([0.0, 1.0, 0.0])
    e1 = seed - (seed @ normal) * normal
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    theta = np.linspace(0.0, 2.0 * math.pi, n_segments, endpoint=False)
    ct, st = np.cos(theta), np.sin(theta)
    wire = center[None, :] + radius * (np.outer(ct, e1) + np.outer(st, e2))
    tangent = np.outer(-st, e1) + np.outer(ct, e2)
    diff = points[:, None, :] - wire[None, :, :]      # (npts, nseg, 3)
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    pref = CONSTANTS.mu0 * current * radius / (4.0 * math.pi) * (2.0 * math.pi / n_segments)
    return pref * np.einsum("ps,sk->pk", 1.0 / dist, tangent)


def _solenoid_loops(center: np.ndarray, axis: np.ndarray, extent: float,
                    strength: float, n_loops: int):
    """Loop stack realizing one compact solenoid.

    The stack spans ``extent`` along its axis with loops of radius
    extent / 2; the strength S (T m^2) fixes the per-loop current through
    S = mu0 * I * r_loop (a pure normalization, the null being linear in S).
    """
    axis = axis / np.linalg.norm(axis)
    r_loop = 0.5 * extent
    current = strength / (CONSTANTS.mu0 * r_loop)
    offsets = np.linspace(-0.5 * extent, 0.5 * extent, n_loops)
    return [(center + t * axis, axis, r_loop, current / n_loops) for t in offsets]


def _stack_phi_integrals(stacks, rho: float, phi: float, z_halfspan: float,
                         n_z: int, n_segments: int):
    """Simpson line integrals of A_phi per solenoid stack along z.

    Returns (signed integrals, absolute integrals), one entry per stack.
    The z grid is symmetric about 0 so odd-in-z components cancel exactly.
    """
    if n_z % 2 == 0:
        n_z += 1
    zg = np.linspace(-z_halfspan, z_halfspan, n_z)
    w = np.ones(n_z)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= (zg[1] - zg[0]) / 3.0
    pts = np.column_stack([np.full(n_z, rho * math.cos(phi)),
                           np.full(n_z, rho * math.sin(phi)),
                           zg])
    phi_hat = np.array([-math.sin(phi), math.cos(phi), 0.0])
    signed, absolute = [], []
    for loops in stacks:
        a_phi = np.zeros(n_z)
        for center, axis, r_loop, current in loops:
            a = _loop_potential(pts, center, axis, r_loop, current, n_segments)
            a_phi += a @ phi_hat
        signed.append(float(w @ a_phi))
        absolute.append(float(w @ np.abs(a_phi)))
    return signed, absolute


def multipole_phi_integral(n_poles: int, solenoid_strength: float,
                           solenoid_extent: float, rho: float, phi: float,
                           ring_radius: Optional[float] = None,
                           n_loops: int = 5, n_z: int = 2001,
                           n_segments: int = 256) -> MultipoleLineIntegral:
    """Line integral of A_phi for a ring of radially oriented solenoids.

    ``n_poles`` solenoids sit at azimuths 2 pi j / n on a ring of radius
    ``ring_radius`` (default 4x the solenoid extent), axes pointing radially
    outward. Transverse multipole arrangements of this kind thread no net
    axial flux through the beam, so the z-line integral of A_phi, the
    quantity that couples to the beam's azimuthal quantum number, cancels;
    the returned ``solenoid_scale`` shows how large the individual
    contributions were before cancellation.

    Parameters
    ----------
    n_poles : int
        Even number of poles, at least 2.
    solenoid_strength : float
        Per-solenoid strength in T m^2 (see the loop-stack normalization).
    solenoid_extent : float
        Axial length of each solenoid stack (m); loop radius is half this.
    rho, phi : float
        Cylindrical transverse position of the straight integration path.

    Raises
    ------
    DomainError
        If n_poles is odd or below 2, or rho is negative, or the path would
        intersect the hardware (rho beyond half the ring radius).
    """
    if n_poles < 2 or n_poles % 2 != 0:
        raise DomainError(f"n_poles must be an even integer >= 2, got {n_poles}")
    if rho < 0.0:
        raise DomainError("rho must be non-negative")
    if not solenoid_extent > 0.0:
        raise DomainError("solenoid_extent must be positive")
    if ring_radius is None:
        ring_radius = 4.0 * solenoid_extent
    if rho > 0.5 * ring_radius:
        raise DomainError("path too close to the solenoid ring")
    stacks = []
    for j in range(n_poles):
        ang = 2.0 * math.pi * j / n_poles
        u = np.array([math.cos(ang), math.sin(ang), 0.0])
        stacks.append(_solenoid_loops(ring_radius * u, u, solenoid_extent,
                                      solenoid_strength, n_loops))
    span = 40.0 * max(ring_radius, solenoid_extent)
    signed, absolute = _stack_phi_integrals(stacks, rho, phi, span, n_z, n_segments)
    return MultipoleLineIntegral(value=float(np.sum(signed)),
                                 solenoid_scale=float(np.max(absolute)))


def axial_solenoid_phi_integral(solenoid_strength: float, solenoid_extent: float,
                                rho: float, n_loops: int = 5, n_z: int = 2001,
                                n_segments: int = 256) -> MultipoleLineIntegral:
    """Control case: one solenoid aligned with the beam axis.

    Same stack geometry and normalization as the multipole builder, but the
    axis now points along z, so the path at radius rho encircles real flux
    and the line integral is decisively nonzero.
    """
    if rho < 0.0:
        raise DomainError("rho must be non-negative")
    if not solenoid_extent > 0.0:
        raise DomainError("solenoid_extent must be positive")
    loops = _solenoid_loops(np.zeros(3), np.array([0.0, 0.0, 1.0]),
                            solenoid_extent, solenoid_strength, n_loops)
    span = 40.0 * solenoid_extent
    signed, absolute = _stack_phi_integrals([loops], rho, 0.0, span, n_z, n_segments)
    return MultipoleLineIntegral(value=signed[0], solenoid_scale=absolute[0])


# -- CSV interchange --------------------------------------------------------

def write_field_csv(path, z: np.ndarray, b1: np.ndarray, b3: np.ndarray) -> None:
    """Write a field table as ``z,B1,B3`` with a header row."""
    z = np.asarray(z, dtype=float)
    b1 = np.asarray(b1, dtype=float)
    b3 = np.asarray(b3, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z", "B1", "B3"])
        for row in zip(z, b1, b3):
            writer.writerow([repr(float(v)) for v in row])


def read_field_csv(path, dispersion_length: float, polarity: int = 1) -> AxialFieldModel:
    """Load a ``z,B1,B3`` table into a tabulated field model."""
    z, b1, b3 = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [c.strip() for c in header[:3]] != ["z", "B1", "B3"]:
            raise DomainError(f"expected header 'z,B1,B3' in {path}, got {header!r}")
        for row in reader:
            if not row:
                continue
            z.append(float(row[0]))
            b1.append(float(row[1]))
            b3.append(float(row[2]))
    return AxialFieldModel.tabulated(np.array(z), np.array(b1), np.array(b3),
                                     dispersion_length=dispersion_length,
                                     polarity=polarity)
