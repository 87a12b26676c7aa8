"""Unitary paraxial wave propagation of azimuthal beam components.

A monochromatic paraxial beam decomposes into azimuthal components
u_m(rho, z) e^{i m phi}; an axisymmetric column never mixes them, so the
field is carried as a map m -> u_m on a shared radial grid. Each component
obeys a radial Schroedinger-like equation

    i du/dz = -(1/2k) [ (1/rho)(rho u')' - m^2 u / rho^2 ] + V_m(rho, z) u,

with the magnetic interaction (linear and cubic potential terms of each
element, fields of all elements superposed before squaring)

    V_m = m e B1 / (2 hbar k)
          + [ e^2 B1^2 / (8 hbar^2 k) - e m S3 / (8 hbar k) ] rho^2,
    S3  = sum_i B3_i / b_i^2 .

Numerics: Strang splitting with the potential as exact phase factors around
a Crank-Nicolson step of the radial Laplacian on the half-integer grid
rho_j = (j + 1/2) h. The flux form of the discrete Laplacian makes the
Cayley update exactly norm-conserving in the weighted norm
sum_j rho_j |u_j|^2, so propagation is unitary to roundoff by construction;
there is no renormalization anywhere in the stepping path.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import (CONSTANTS, BeamParameters, ConfigurationError, DomainError,
                   NumericalError, parabolic_minimum, solve_tridiagonal)
from .analytic import OpticalColumn

__all__ = [
    "RadialGrid",
    "AzimuthalWave",
    "LGModeSpec",
    "OAMSpectrum",
    "CartesianField",
    "PropagationOptions",
    "lg_mode",
    "step",
    "propagate",
    "rms_radius",
    "waist_position",
    "oam_spectrum",
    "aperture_transmission",
    "apply_aperture",
    "synthesize_2d",
    "ring_spectrum_2d",
    "write_profile_csv",
    "write_spectrum_csv",
    "write_pgm16",
]


@dataclass(frozen=True)
class RadialGrid:
    """Half-integer radial grid rho_j = (j + 1/2) * spacing, j = 0..n-1.

    Placing samples off the axis keeps every 1/rho coefficient finite and
    makes the j = 0 inner flux vanish identically, which is what lets the
    Crank-Nicolson step conserve the weighted norm exactly.
    """

    n_points: int
    rho_max: float

    def __post_init__(self):
        if self.n_points < 8:
            raise ConfigurationError("radial grid needs at least 8 points")
        if not self.rho_max > 0.0:
            raise ConfigurationError("rho_max must be positive")

    @property
    def spacing(self) -> float:
        return self.rho_max / self.n_points

    @property
    def rho(self) -> np.ndarray:
        h = self.spacing
        return (np.arange(self.n_points) + 0.5) * h

    def power_weights(self) -> np.ndarray:
        """Quadrature weights 2 pi rho_j h for power integrals."""
        return 2.0 * math.pi * self.rho * self.spacing


@dataclass(frozen=True)
class AzimuthalWave:
    """Beam state at one plane: azimuthal components on a shared grid.

    ``components`` maps the azimuthal quantum number m to the complex
    radial profile u_m sampled on ``grid.rho``. ``metadata`` accumulates
    bookkeeping such as aperture renormalization events; the propagation
    itself never touches the norm.
    """

    components: Dict[int, np.ndarray]
    grid: RadialGrid
    z: float
    beam: BeamParameters
    metadata: dict = field(default_factory=dict)

    def power(self, m: int) -> float:
        w = self.grid.power_weights()
        u = self.components[m]
        return float(np.sum(w * (u.real ** 2 + u.imag ** 2)))

    def total_power(self) -> float:
        return float(sum(self.power(m) for m in self.components))

    def m_values(self) -> List[int]:
        return sorted(self.components)


@dataclass(frozen=True)
class LGModeSpec:
    """One ring-mode source component: azimuthal order, waist, amplitude."""

    m: int
    w0: float
    amplitude: complex = 1.0 + 0.0j


def _lg_profile(m: int, w0: float, rho: np.ndarray) -> np.ndarray:
    am = abs(m)
    norm = math.sqrt(2.0 / (math.pi * w0 * w0 * math.factorial(am)))
    x = rho * math.sqrt(2.0) / w0
    return norm * x ** am * np.exp(-(rho / w0) ** 2)


def lg_mode(specs: Sequence[LGModeSpec], grid: RadialGrid, beam: BeamParameters,
            z: float = 0.0) -> AzimuthalWave:
    """Build a waist-plane superposition of fundamental ring modes.

    Each spec contributes u_m proportional to (rho sqrt(2)/w0)^{|m|}
    exp(-rho^2/w0^2); the result is normalized to unit total power on the
    discrete grid.

    Raises
    ------
    ConfigurationError
        If the grid under-resolves any waist (requires spacing <= w0 / 16)
        or is too small to hold the widest requested mode (requires
        rho_max >= 4 w0 sqrt(|m|/2 + 1)); the message names the violated
        bound.
    DomainError
        On duplicate m values or an empty spec list.
    """
    if not specs:
        raise DomainError("at least one mode spec is required")
    ms = [spec.m for spec in specs]
    if len(set(ms)) != len(ms):
        raise DomainError("duplicate azimuthal orders in mode specs")
    h = grid.spacing
    for spec in specs:
        if not spec.w0 > 0.0:
            raise DomainError("mode waist must be positive")
        if h > spec.w0 / 16.0:
            raise ConfigurationError(
                f"grid spacing {h:.3e} m violates spacing <= w0/16 = "
                f"{spec.w0 / 16.0:.3e} m for the m={spec.m} mode")
        needed = 4.0 * spec.w0 * math.sqrt(abs(spec.m) / 2.0 + 1.0)
        if grid.rho_max < needed:
            raise ConfigurationError(
                f"grid rho_max {grid.rho_max:.3e} m violates rho_max >= "
                f"4 w0 sqrt(|m|/2 + 1) = {needed:.3e} m for the m={spec.m} mode")
    rho = grid.rho
    comps = {spec.m: complex(spec.amplitude) * _lg_profile(spec.m, spec.w0, rho)
             for spec in specs}
    wave = AzimuthalWave(components=comps, grid=grid, z=float(z), beam=beam)
    total = wave.total_power()
    if total <= 0.0:
        raise NumericalError("source mode carries no power on this grid")
    scale = 1.0 / math.sqrt(total)
    comps = {m: u * scale for m, u in comps.items()}
    return AzimuthalWave(components=comps, grid=grid, z=float(z), beam=beam)


class _RadialStepper:
    """Cached Crank-Nicolson machinery for one grid and one beam.

    The discrete radial Laplacian in flux form, with rho_{j+-1/2} = j h and
    (j+1) h, has off-diagonals j/((j+1/2) h^2) and (j+1)/((j+1/2) h^2) and
    constant diagonal -2/h^2, minus the centrifugal m^2/rho_j^2. It is
    self-adjoint under the weight rho_j, so the Cayley transform
    (1 - a L)^{-1} (1 + a L), a = i dz/(4k), is exactly unitary in the
    weighted norm.
    """

    def __init__(self, grid: RadialGrid, wavenumber: float):
        self.grid = grid
        self.k = wavenumber
        n = grid.n_points
        h = grid.spacing
        j = np.arange(n, dtype=float)
        self.sub = j[1:] / ((j[1:] + 0.5) * h * h)          # couples u_{j-1}
        self.sup = (j[:-1] + 1.0) / ((j[:-1] + 0.5) * h * h)  # couples u_{j+1}
        self.base_diag = np.full(n, -2.0 / (h * h))
        self.inv_rho2 = 1.0 / grid.rho ** 2
        self._cache: Dict[Tuple[int, float], tuple] = {}

    def _bands(self, m: int, dz: float):
        key = (m, float(dz))
        got = self._cache.get(key)
        if got is not None:
            return got
        alpha = 0.25j * dz / self.k
        diag = self.base_diag - m * m * self.inv_rho2
        lhs_diag = 1.0 - alpha * diag
        rhs_diag = 1.0 + alpha * diag
        lhs_off_sub = -alpha * self.sub
        lhs_off_sup = -alpha * self.sup
        rhs_off_sub = alpha * self.sub
        rhs_off_sup = alpha * self.sup
        bands = (lhs_off_sub, lhs_diag, lhs_off_sup,
                 rhs_off_sub, rhs_diag, rhs_off_sup)
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[key] = bands
        return bands

    def diffract(self, u: np.ndarray, m: int, dz: float) -> np.ndarray:
        lsub, ldiag, lsup, rsub, rdiag, rsup = self._bands(m, dz)
        rhs = rdiag * u
        rhs[:-1] += rsup * u[1:]
        rhs[1:] += rsub * u[:-1]
        return solve_tridiagonal(lsub, ldiag, lsup, rhs)


def _phase_coefficients(column: Optional[OpticalColumn], z: float,
                        beam: BeamParameters):
    """(constant, quadratic) phase-rate coefficients at plane z:
    d(phase)/dz = -(c0 * m + (c2 * 1 - c2m * m) rho^2)."""
    if column is None or not column.elements:
        return 0.0, 0.0, 0.0
    b1, s3 = column.axial_profiles(z)
    c = CONSTANTS
    hk = c.hbar * beam.wavenumber
    c0 = c.e_charge * b1 / (2.0 * hk)
    c2 = c.e_charge ** 2 * b1 * b1 / (8.0 * c.hbar * hk)
    c2m = c.e_charge * s3 / (8.0 * hk)
    return c0, c2, c2m


def _apply_half_phase(comps: Dict[int, np.ndarray], rho2: np.ndarray,
                      coeffs, half_dz: float) -> Dict[int, np.ndarray]:
    c0, c2, c2m = coeffs
    if c0 == 0.0 and c2 == 0.0 and c2m == 0.0:
        return comps
    out = {}
    for m, u in comps.items():
        phase = -half_dz * (c0 * m + (c2 - c2m * m) * rho2)
        out[m] = u * np.exp(1j * phase)
    return out


@dataclass(frozen=True)
class PropagationOptions:
    """Stepping controls for :func:`propagate`.

    max_dz_free : float, optional
        Step ceiling outside field regions; default span/500. Free-space
        steps are exact in the potential (it vanishes) and unitary in the
        diffraction, so this controls accuracy of the Cayley dispersion
        only.
    field_dz_divisor : float
        Inside a field region the step is capped at extent/divisor;
        the default honors dz <= a/50.
    absorber_strength : float
        Optional soft absorbing ramp over the outer 10 percent of the grid,
        amplitude decay per meter at the rim. 0 (default) disables it and
        keeps propagation exactly unitary.
    threads : int
        Worker threads across azimuthal components.
    """

    max_dz_free: Optional[float] = None
    field_dz_divisor: float = 50.0
    absorber_strength: float = 0.0
    threads: int = 1


def step(wave: AzimuthalWave, dz: float, column: Optional[OpticalColumn] = None,
         stepper: Optional[_RadialStepper] = None,
         absorber_strength: float = 0.0) -> AzimuthalWave:
    """One Strang-split step: half potential phase, Crank-Nicolson
    diffraction, half potential phase (phases evaluated at the entry and
    exit planes, so composed steps see the trapezoid average).

    The potential phases are unimodular and the Cayley diffraction step is
    unitary in the grid norm, so the step conserves total power to
    roundoff. Returns a new wave at z + dz.
    """
    if not dz > 0.0:
        raise DomainError("dz must be positive")
    if stepper is None:
        stepper = _RadialStepper(wave.grid, wave.beam.wavenumber)
    rho2 = wave.grid.rho ** 2
    z0, z1 = wave.z, wave.z + dz
    comps = _apply_half_phase(wave.components, rho2,
                              _phase_coefficients(column, z0, wave.beam),
                              0.5 * dz)
    comps = {m: stepper.diffract(u, m, dz) for m, u in comps.items()}
    comps = _apply_half_phase(comps, rho2,
                              _phase_coefficients(column, z1, wave.beam),
                              0.5 * dz)
    if absorber_strength > 0.0:
        ramp = np.clip((wave.grid.rho / wave.grid.rho_max - 0.9) / 0.1, 0.0, None)
        damp = np.exp(-absorber_strength * dz * ramp * ramp)
        comps = {m: u * damp for m, u in comps.items()}
    return replace(wave, components=comps, z=z1)


def _step_plan(z: float, target: float, column: Optional[OpticalColumn],
               options: PropagationOptions, span: float) -> float:
    """Length of the next step from z toward target under the dz policy."""
    dz_free = options.max_dz_free if options.max_dz_free else span / 500.0
    dz = dz_free
    boundary = target
    if column is not None:
        for (lo, hi), el in zip(column.field_regions(pad=8.0), column.elements):
            if lo <= z < hi:
                dz = min(dz, el.model.extent / options.field_dz_divisor)
                boundary = min(boundary, hi)
            elif z < lo:
                boundary = min(boundary, lo)
    return min(dz, boundary - z, target - z)


def propagate(wave: AzimuthalWave, column: Optional[OpticalColumn],
              sample_planes: Sequence[float],
              options: Optional[PropagationOptions] = None
              ) -> List[Tuple[float, AzimuthalWave]]:
    """March the wave through the column, snapshotting at requested planes.

    ``sample_planes`` must be strictly increasing and start at or after the
    wave's current plane; propagation ends at the last plane and the
    returned list holds one (z, wave) pair per plane. Hard apertures
    registered on the column are applied in passing (power simply leaves
    the wave; renormalization is left to :func:`apply_aperture` callers)
    and recorded in each subsequent snapshot's metadata.

    A warning metadata entry is attached when the step policy yields phase
    advances too coarse for the grid (Cayley distortion), with the
    recommended ceiling.
    """
    if options is None:
        options = PropagationOptions()
    planes = [float(p) for p in sample_planes]
    if not planes:
        raise ConfigurationError("sample_planes must not be empty")
    if any(b <= a for a, b in zip(planes, planes[1:])):
        raise ConfigurationError("sample_planes must be strictly increasing")
    if planes[0] < wave.z - 1e-18:
        raise ConfigurationError(
            f"first sample plane {planes[0]:g} precedes the wave at {wave.z:g}")
    span = max(planes[-1] - wave.z, 1e-30)
    stepper = _RadialStepper(wave.grid, wave.beam.wavenumber)

    pending_apertures = sorted(
        (za, ra) for za, ra in (column.apertures if column else ())
        if wave.z < za <= planes[-1])

    # Step-coarseness advisory: top-of-band Cayley argument per free step.
    k = wave.beam.wavenumber
    h = wave.grid.spacing
    dz_free = options.max_dz_free if options.max_dz_free else span / 500.0
    cayley_arg = 2.0 * dz_free / (k * h * h)
    warn = None
    if cayley_arg > 2.0:
        warn = {"kind": "coarse_step",
                "message": "free-space step is coarse for this grid; "
                           "highest transverse modes accrue phase error",
                "recommended_max_dz_free": k * h * h}

    executor = None
    if options.threads > 1:
        executor = ThreadPoolExecutor(max_workers=options.threads)

    def advance(w: AzimuthalWave, dz: float) -> AzimuthalWave:
        if executor is None or len(w.components) < 2:
            return step(w, dz, column, stepper, options.absorber_strength)
        rho2 = w.grid.rho ** 2
        co0 = _phase_coefficients(column, w.z, w.beam)
        co1 = _phase_coefficients(column, w.z + dz, w.beam)
        halves = 0.5 * dz

        def one(mu):
            m, u = mu
            c0, c2, c2m = co0
            if not (c0 == 0.0 and c2 == 0.0 and c2m == 0.0):
                u = u * np.exp(-1j * halves * (c0 * m + (c2 - c2m * m) * rho2))
            u = stepper.diffract(u, m, dz)
            c0, c2, c2m = co1
            if not (c0 == 0.0 and c2 == 0.0 and c2m == 0.0):
                u = u * np.exp(-1j * halves * (c0 * m + (c2 - c2m * m) * rho2))
            return m, u

        comps = dict(executor.map(one, list(w.components.items())))
        if options.absorber_strength > 0.0:
            ramp = np.clip((w.grid.rho / w.grid.rho_max - 0.9) / 0.1, 0.0, None)
            damp = np.exp(-options.absorber_strength * dz * ramp * ramp)
            comps = {m: u * damp for m, u in comps.items()}
        return replace(w, components=comps, z=w.z + dz)

    snapshots: List[Tuple[float, AzimuthalWave]] = []
    current = wave
    if warn is not None:
        current = replace(current, metadata={**current.metadata,
                                             "warnings": [warn]})
    eps = 1e-15 * span
    try:
        for target in planes:
            while target - current.z > eps:
                stop = target
                if pending_apertures and pending_apertures[0][0] <= target:
                    stop = min(stop, pending_apertures[0][0])
                while stop - current.z > eps:
                    dz = _step_plan(current.z, stop, column, options, span)
                    current = advance(current, dz)
                current = replace(current, z=stop)
                if pending_apertures and abs(stop - pending_apertures[0][0]) <= eps:
                    _, ra = pending_apertures.pop(0)
                    # apply_aperture records the event in the wave metadata
                    current, _ = apply_aperture(current, ra, renormalize=False)
            current = replace(current, z=target)
            snapshots.append((target, current))
    finally:
        if executor is not None:
            executor.shutdown()
    return snapshots


# -- diagnostics -------------------------------------------------------------

def rms_radius(wave: AzimuthalWave, m: int) -> float:
    """Root-mean-square radius of one component's intensity profile."""
    u = wave.components[m]
    w = wave.grid.power_weights()
    p = w * (u.real ** 2 + u.imag ** 2)
    total = float(np.sum(p))
    if total <= 0.0:
        raise DomainError(f"component m={m} carries no power")
    return math.sqrt(float(np.sum(p * wave.grid.rho ** 2)) / total)


def waist_position(snapshots: Sequence[Tuple[float, AzimuthalWave]],
                   m: int) -> Optional[float]:
    """Focal (waist) plane of component m from a snapshot sequence.

    Scans the per-snapshot RMS radius for an interior minimum and refines
    it with a parabola through the minimum and its neighbors. Needs at
    least three snapshots bracketing the minimum; returns None when the
    minimum sits on the boundary of the sampled range (not bracketed).
    """
    if len(snapshots) < 3:
        return None
    zs = np.array([z for z, _ in snapshots])
    r = np.array([rms_radius(w, m) for _, w in snapshots])
    i = int(np.argmin(r))
    if i == 0 or i == len(r) - 1:
        return None
    return parabolic_minimum(zs[i - 1:i + 2], r[i - 1:i + 2] ** 2)


@dataclass(frozen=True)
class OAMSpectrum:
    """Power per azimuthal order, ordered by m."""

    powers: Dict[int, float]

    @property
    def total(self) -> float:
        return float(sum(self.powers.values()))

    def items(self):
        return sorted(self.powers.items())


def oam_spectrum(wave: AzimuthalWave) -> OAMSpectrum:
    """P(m) = int |u_m|^2 2 pi rho drho on the grid, for every component."""
    return OAMSpectrum(powers={m: wave.power(m) for m in wave.m_values()})


def aperture_transmission(wave: AzimuthalWave, radius: float) -> Dict[int, float]:
    """Fraction of each component's power inside a hard-edge radius."""
    if not radius > 0.0:
        raise DomainError("aperture radius must be positive")
    w = wave.grid.power_weights()
    inside = wave.grid.rho <= radius
    out = {}
    for m, u in wave.components.items():
        p = w * (u.real ** 2 + u.imag ** 2)
        total = float(np.sum(p))
        out[m] = float(np.sum(p[inside])) / total if total > 0.0 else 0.0
    return out


def apply_aperture(wave: AzimuthalWave, radius: float,
                   renormalize: bool = False) -> Tuple[AzimuthalWave, dict]:
    """Hard-edge truncation at ``radius``; optionally renormalize to unit
    total power afterwards.

    Returns the truncated wave and an info dict: per-m transmitted
    fractions, total transmitted power, and whether renormalization was
    applied (also recorded in the wave's metadata).
    """
    fractions = aperture_transmission(wave, radius)
    mask = wave.grid.rho <= radius
    comps = {m: np.where(mask, u, 0.0 + 0.0j) for m, u in wave.components.items()}
    new = replace(wave, components=comps)
    transmitted = new.total_power()
    renormalized = False
    if renormalize:
        if transmitted <= 0.0:
            raise DomainError("aperture blocked all power; cannot renormalize")
        s = 1.0 / math.sqrt(transmitted)
        comps = {m: u * s for m, u in comps.items()}
        new = replace(new, components=comps)
        renormalized = True
    info = {"transmitted_fraction_by_m": fractions,
            "transmitted_power": transmitted,
            "renormalized": renormalized}
    meta = dict(new.metadata)
    meta.setdefault("aperture_events", [])
    meta["aperture_events"] = list(meta["aperture_events"]) + [
        {"z": wave.z, "radius": radius, **info}]
    return replace(new, metadata=meta), info


# -- Cartesian synthesis and image export ------------------------------------

@dataclass(frozen=True)
class CartesianField:
    """Complex field on a centered square pixel grid (pixel centers offset
    half a pitch from the axis, so no sample sits exactly at rho = 0)."""

    values: np.ndarray
    pitch: float
    z: float

    @property
    def intensity(self) -> np.ndarray:
        return (self.values.real ** 2 + self.values.imag ** 2)

    @property
    def phase(self) -> np.ndarray:
        return np.mod(np.angle(self.values), 2.0 * math.pi)

    def power(self) -> float:
        return float(np.sum(self.intensity)) * self.pitch ** 2


def synthesize_2d(wave: AzimuthalWave, n_pixels: int, pitch: float) -> CartesianField:
    """Rebuild the transverse field u(x, y) = sum_m u_m(rho) e^{i m phi}.

    Radial profiles are linearly interpolated onto the pixel radii; pixels
    beyond the radial grid get zero.

    Raises
    ------
    ConfigurationError
        If n_pixels is odd (the half-pixel-centered layout needs an even
        count), pitch is not positive, or the pixel array half-width
        n_pixels * pitch / 2 exceeds the radial grid extent (the corners
        still poke past rho_max and get zero; the axes must not).
    """
    if n_pixels % 2 != 0 or n_pixels < 2:
        raise ConfigurationError("n_pixels must be an even integer >= 2")
    if not pitch > 0.0:
        raise ConfigurationError("pitch must be positive")
    half_width = n_pixels * pitch / 2.0
    if half_width > wave.grid.rho_max * (1.0 + 1e-12):
        raise ConfigurationError(
            "pixel array half-width %.6g m exceeds the radial grid extent "
            "%.6g m" % (half_width, wave.grid.rho_max))
    coords = (np.arange(n_pixels) - n_pixels / 2 + 0.5) * pitch
    xx, yy = np.meshgrid(coords, coords, indexing="xy")
    rr = np.hypot(xx, yy)
    phi = np.arctan2(yy, xx)
    rho = wave.grid.rho
    out = np.zeros((n_pixels, n_pixels), dtype=complex)
    for m, u in wave.components.items():
        ur = np.interp(rr, rho, u.real, left=u.real[0], right=0.0)
        ui = np.interp(rr, rho, u.imag, left=u.imag[0], right=0.0)
        out += (ur + 1j * ui) * np.exp(1j * m * phi)
    return CartesianField(values=out, pitch=pitch, z=wave.z)


def ring_spectrum_2d(fieldmap: CartesianField, m_values: Sequence[int],
                     n_phi: int = 512) -> Dict[int, float]:
    """Azimuthal power content of a Cartesian field by ring sampling.

    Bilinear-samples the field on concentric rings, Fourier-transforms in
    the azimuth, and integrates |coefficient|^2 over radius. Serves as the
    independent check that synthesis put the right power into each m.
    """
    n = fieldmap.values.shape[0]
    coords = (np.arange(n) - n / 2 + 0.5) * fieldmap.pitch
    r_max = float(coords[-1])
    radii = np.linspace(0.5 * fieldmap.pitch, 0.95 * r_max, n // 2)
    phi = np.linspace(0.0, 2.0 * math.pi, n_phi, endpoint=False)
    powers = {m: 0.0 for m in m_values}
    dr = radii[1] - radii[0]
    for r in radii:
        x = r * np.cos(phi)
        y = r * np.sin(phi)
        samples = _bilinear(fieldmap.values, coords, x, y)
        coeffs = np.fft.fft(samples) / n_phi
        for m in m_values:
            c = coeffs[m % n_phi]
            powers[m] += (c.real ** 2 + c.imag ** 2) * 2.0 * math.pi * r * dr
    return powers


def _bilinear(values: np.ndarray, coords: np.ndarray, x: np.ndarray,
              y: np.ndarray) -> np.ndarray:
    pitch = coords[1] - coords[0]
    fx = (x - coords[0]) / pitch
    fy = (y - coords[0]) / pitch
    ix = np.clip(np.floor(fx).astype(int), 0, len(coords) - 2)
    iy = np.clip(np.floor(fy).astype(int), 0, len(coords) - 2)
    tx = fx - ix
    ty = fy - iy
    v00 = values[iy, ix]
    v01 = values[iy, ix + 1]
    v10 = values[iy + 1, ix]
    v11 = values[iy + 1, ix + 1]
    return (v00 * (1 - tx) * (1 - ty) + v01 * tx * (1 - ty)
            + v10 * (1 - tx) * ty + v11 * tx * ty)


# -- file formats -------------------------------------------------------------

def write_profile_csv(path, wave: AzimuthalWave, m: int) -> None:
    """Radial profile of one component as ``rho,re_u,im_u``."""
    u = wave.components[m]
    with open(path, "w", newline="") as fh:
        fh.write("rho,re_u,im_u\n")
        for r, c in zip(wave.grid.rho, u):
            fh.write(f"{float(r)!r},{float(c.real)!r},{float(c.imag)!r}\n")


def write_spectrum_csv(path, spectrum: OAMSpectrum) -> None:
    """Azimuthal power table as ``m,power``."""
    with open(path, "w", newline="") as fh:
        fh.write("m,power\n")
        for m, p in spectrum.items():
            fh.write(f"{m},{float(p)!r}\n")


def write_pgm16(path, data: np.ndarray, quantity: str, pitch: float,
                z: float) -> dict:
    """16-bit binary PGM (P5, big-endian) plus a JSON sidecar at path+'.json'.

    ``quantity`` selects normalization: "intensity" maps [0, max] onto
    [0, 65535]; "phase" maps [0, 2 pi) onto [0, 65535]. The sidecar records
    pixel pitch, plane z, the quantity, and the normalization so values are
    recoverable.
    """
    if quantity not in ("intensity", "phase"):
        raise DomainError(f"unknown pgm quantity {quantity!r}")
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2:
        raise DomainError("pgm data must be 2D")
    if quantity == "intensity":
        top = float(arr.max())
        scale = 65535.0 / top if top > 0.0 else 0.0
        quantized = np.round(arr * scale)
        normalization = {"max_value": top, "mapping": "linear [0, max] -> [0, 65535]"}
    else:
        quantized = np.floor(np.mod(arr, 2.0 * math.pi) / (2.0 * math.pi) * 65536.0)
        quantized = np.clip(quantized, 0, 65535)
        normalization = {"mapping": "phase [0, 2pi) -> [0, 65535]"}
    pixels = quantized.astype(">u2")
    height, width = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n65535\n".encode("ascii"))
        fh.write(pixels.tobytes())
    sidecar = {
        "width": int(width),
        "height": int(height),
        "pitch_meters": float(pitch),
        "z_meters": float(z),
        "quantity": quantity,
        "normalization": normalization,
        "byte_order": "big-endian",
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar
