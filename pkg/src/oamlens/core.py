"""Shared physical constants, beam kinematics, and numerical primitives.

Everything downstream (field models, matrix optics, ray tracing, wave
propagation) pulls its constants and its quadrature / linear-algebra
helpers from here so that a single pinned constant set feeds the whole
package and run reports can hash it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.linalg import solve_banded

__all__ = [
    "PhysicalConstants",
    "CONSTANTS",
    "SPEED_OF_LIGHT",
    "DomainError",
    "NumericalError",
    "ConfigurationError",
    "BeamParameters",
    "make_beam",
    "LineIntegral",
    "integrate_line",
    "solve_tridiagonal",
    "bracket_crossing",
    "parabolic_minimum",
]

#: Exact/defined SI values (2018 redefinition era). Pinned rather than taken
#: from an external package so results are reproducible byte-for-byte.
SPEED_OF_LIGHT = 299792458.0


class DomainError(ValueError):
    """An argument is outside the physically meaningful domain."""


class ConfigurationError(ValueError):
    """A configuration (grid, column, run config) violates a documented bound.

    Attributes
    ----------
    field_path : str or None
        Dotted path of the offending entry when the error originates from a
        structured config, e.g. ``"elements[0].B0_tesla"``.
    """

    def __init__(self, message: str, field_path: Optional[str] = None):
        super().__init__(message)
        self.field_path = field_path


class NumericalError(RuntimeError):
    """A numerical routine failed to meet its requested tolerance.

    Carries the best available estimate so callers can decide whether to
    accept a degraded answer.
    """

    def __init__(self, message: str, estimate: Optional[tuple] = None):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class PhysicalConstants:
    """SI constants used throughout. hbar and h are both carried to avoid
    repeated 2*pi round trips in phase accumulators."""

    hbar: float = 1.054571817e-34      # J s
    e_charge: float = 1.602176634e-19  # C
    m_e: float = 9.1093837015e-31      # kg
    mu0: float = 1.25663706212e-6      # N A^-2
    h: float = 6.62607015e-34          # J s

    def as_dict(self) -> dict:
        return asdict(self)


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class BeamParameters:
    """Kinematic description of a monoenergetic electron beam.

    Attributes
    ----------
    accelerating_voltage : float
        Gun voltage in volts.
    kinetic_energy : float
        e * V_a in joules.
    wavelength : float
        de Broglie wavelength in meters.
    wavenumber : float
        2 pi / wavelength in 1/m.
    speed : float
        Axial speed in m/s.
    relativistic : bool
        Whether the relativistically corrected momentum was used.
    """

    accelerating_voltage: float
    kinetic_energy: float
    wavelength: float
    wavenumber: float
    speed: float
    relativistic: bool = False


def make_beam(accelerating_voltage: float, relativistic: bool = False,
              constants: PhysicalConstants = CONSTANTS) -> BeamParameters:
    """Build beam kinematics from an accelerating voltage.

    Parameters
    ----------
    accelerating_voltage : float
        Voltage in volts; must be positive.
    relativistic : bool, optional
        If True, use the relativistically corrected de Broglie wavelength
        lambda = h / sqrt(2 m E (1 + E / (2 m c^2))) and the matching speed.
        Default (False) is the plain non-relativistic form; all worked
        reference numbers in this package use that branch.

    Returns
    -------
    BeamParameters

    Raises
    ------
    DomainError
        If the voltage is not strictly positive.
    """
    if not (accelerating_voltage > 0.0) or not math.isfinite(accelerating_voltage):
        raise DomainError(
            f"accelerating voltage must be positive and finite, got {accelerating_voltage!r}")
    c = constants
    energy = c.e_charge * accelerating_voltage
    if relativistic:
        rest = c.m_e * SPEED_OF_LIGHT ** 2
        wavelength = c.h / math.sqrt(2.0 * c.m_e * energy * (1.0 + energy / (2.0 * rest)))
        gamma = 1.0 + energy / rest
        speed = SPEED_OF_LIGHT * math.sqrt(1.0 - 1.0 / gamma ** 2)
    else:
        wavelength = c.h / math.sqrt(2.0 * c.m_e * energy)
        speed = math.sqrt(2.0 * energy / c.m_e)
    wavenumber = 2.0 * math.pi / wavelength
    return BeamParameters(
        accelerating_voltage=float(accelerating_voltage),
        kinetic_energy=energy,
        wavelength=wavelength,
        wavenumber=wavenumber,
        speed=speed,
        relativistic=relativistic,
    )


@dataclass(frozen=True)
class LineIntegral:
    """Result of :func:`integrate_line` with the metadata needed to audit it.

    ``z_lower`` / ``z_upper`` document where the integrand support was found
    to end: the probe rung just beyond the last point where
    |f| >= truncation_threshold * max|f| (probes on a geometric ladder out to
    |z| = 1e12). Finite requested bounds are reported as given. Infinite
    sides are still integrated in full through the change of variables; the
    support bounds only set the substitution scale, the absolute-error
    floor, and the subdivision seed points.
    """

    value: float
    error_estimate: float
    z_lower: float
    z_upper: float
    substitution: str               # "tangent" or "none"
    truncation_threshold: float
    function_evaluations: int


_LADDER = np.concatenate([[0.0], np.logspace(-12.0, 12.0, 97)])


def _safe_abs(f: Callable[[float], float], z: float) -> float:
    """|f(z)| with non-finite values and arithmetic blowups mapped to 0."""
    try:
        with np.errstate(all="ignore"):
            v = f(float(z))
    except (ZeroDivisionError, OverflowError, FloatingPointError):
        return 0.0
    return abs(v) if math.isfinite(v) else 0.0


def _scan_support(f: Callable[[float], float], z_min: float, z_max: float):
    """Probe |f| on a geometric ladder to estimate peak value, the half-height
    scale, and how far the tails extend. Non-finite samples are ignored."""
    probes = []
    if math.isfinite(z_min) and math.isfinite(z_max):
        probes.append(np.linspace(z_min, z_max, 65))
    else:
        ref = 0.0
        if math.isfinite(z_min):
            ref = z_min
        elif math.isfinite(z_max):
            ref = z_max
        for sign in (-1.0, 1.0):
            zs = ref + sign * _LADDER
            keep = np.ones(zs.shape, dtype=bool)
            if math.isfinite(z_min):
                keep &= zs >= z_min
            if math.isfinite(z_max):
                keep &= zs <= z_max
            probes.append(zs[keep])
    zs = np.unique(np.concatenate(probes))
    vals = np.array([_safe_abs(f, z) for z in zs])
    peak = float(vals.max()) if len(vals) else 0.0
    return zs, vals, peak


def _half_edge(f: Callable[[float], float], zs: np.ndarray, vals: np.ndarray,
               i_peak: int, direction: int) -> float:
    """Half-height abscissa on one side of the peak probe.

    Walks outward until a probe falls below half height, then bisects
    between the last probe at or above it and the first below. When the
    probed range never drops below half on this side, the outermost probe
    is returned (the integrand is fat there; no sharper scale exists).
    """
    half = 0.5 * float(vals[i_peak])
    j = i_peak
    n = len(zs)
    while 0 <= j + direction < n and vals[j + direction] >= half:
        j += direction
    if not (0 <= j + direction < n):
        return float(zs[j])
    lo, hi = float(zs[j]), float(zs[j + direction])
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _safe_abs(f, mid) >= half:
            lo = mid
        else:
            hi = mid
    return hi


def integrate_line(f: Callable[[float], float],
                   z_min: float = -math.inf,
                   z_max: float = math.inf,
                   rel_tol: float = 1e-9,
                   max_subdivisions: int = 200) -> LineIntegral:
    """Adaptive line integral of ``f`` along z, with infinite limits allowed.

    Infinite or semi-infinite ranges are mapped to a finite interval with the
    tangent substitution z = z_ref + s * tan(u) before handing the integrand
    to an adaptive Gauss-Kronrod rule, so the full line is integrated even
    for slowly decaying integrands. A geometric probe ladder locates the
    peak and the points where |f| has fallen below ``1e-14 * max|f|``; those
    support bounds choose the stretch s, floor the absolute tolerance, and
    are reported in the result so the caller can audit them.

    Parameters
    ----------
    f : callable
        Scalar integrand of a scalar z.
    z_min, z_max : float
        Limits; either or both may be ``+-inf``. Must satisfy z_min <= z_max.
    rel_tol : float
        Requested relative tolerance. An absolute floor of
        ``1e-14 * peak * scale`` covers integrals that vanish by symmetry.
    max_subdivisions : int
        Subdivision budget for the adaptive rule.

    Returns
    -------
    LineIntegral

    Raises
    ------
    DomainError
        If z_min > z_max or rel_tol is not positive.
    NumericalError
        If the requested tolerance was not met; the exception's ``estimate``
        attribute holds ``(value, error_estimate)`` achieved.
    """
    if z_min > z_max:
        raise DomainError(f"z_min={z_min} exceeds z_max={z_max}")
    if not rel_tol > 0.0:
        raise DomainError("rel_tol must be positive")
    if z_min == z_max:
        return LineIntegral(0.0, 0.0, z_min, z_max, "none", 1e-14, 0)

    threshold = 1e-14
    zs, vals, peak = _scan_support(f, z_min, z_max)

    lo_finite = math.isfinite(z_min)
    hi_finite = math.isfinite(z_max)

    if peak == 0.0:
        # Nothing detected on the ladder: integrate the raw request with a
        # pure relative criterion and an uninformed unit scale.
        z_lo_eff, z_hi_eff = z_min, z_max
        ref = z_min if lo_finite else (z_max if hi_finite else 0.0)
        scale = 1.0
        eps_abs = 1e-300
    else:
        alive = vals >= threshold * peak
        z_alive = zs[alive]
        z_lo_eff = z_min if lo_finite else -_next_rung(abs(z_alive.min()) if len(z_alive) else 1.0)
        z_hi_eff = z_max if hi_finite else _next_rung(abs(z_alive.max()) if len(z_alive) else 1.0)
        if not lo_finite:
            z_lo_eff = min(z_lo_eff, -1.0e-6)
        if not hi_finite:
            z_hi_eff = max(z_hi_eff, 1.0e-6)
        # Center the substitution on the detected peak and stretch it by the
        # half-height width, so a feature far from the requested origin is
        # still resolved. The width also floors the absolute error for
        # integrals that vanish by symmetry.
        i_peak = int(np.argmax(vals))
        ref = float(zs[i_peak])
        left = _half_edge(f, zs, vals, i_peak, -1)
        right = _half_edge(f, zs, vals, i_peak, +1)
        scale = max(right - ref, ref - left, 1e-12)
        eps_abs = max(threshold * peak * 2.0 * scale, 1e-300)

    neval = 0

    # Seed the subdivision with a decade ladder around the peak out to the
    # detected support edges. A panel whose edge merely touches a narrow
    # feature can hide a power-law shoulder spanning decades from both the
    # Gauss-Kronrod rule and its error estimator; per-decade panels cannot.
    seed_zs = _seed_ladder(ref, scale, z_lo_eff, z_hi_eff)

    if lo_finite and hi_finite:
        integrand, u_lo, u_hi = f, z_min, z_max
        substitution = "none"
        seeds = sorted(z for z in seed_zs if z_min < z < z_max) or None
    else:
        s = scale

        def integrand(u: float) -> float:
            t = math.tan(u)
            return f(ref + s * t) * s * (1.0 + t * t)

        u_lo = math.atan((z_min - ref) / s) if lo_finite else -0.5 * math.pi
        u_hi = math.atan((z_max - ref) / s) if hi_finite else 0.5 * math.pi
        substitution = "tangent"
        seed_zs.update(zk for zk in (z_lo_eff, z_hi_eff) if math.isfinite(zk))
        seeds = sorted({math.atan((zk - ref) / s) for zk in seed_zs})
        seeds = [u for u in seeds if u_lo < u < u_hi] or None

    # QUADPACK requires the break-point count to stay below the subdivision
    # budget; thin the ladder evenly rather than dropping one whole side.
    if seeds is not None and len(seeds) > max_subdivisions - 2:
        cap = max_subdivisions - 2
        if cap <= 0:
            seeds = None
        else:
            idx = np.unique(np.round(
                np.linspace(0, len(seeds) - 1, cap)).astype(int))
            seeds = [seeds[i] for i in idx]

    with np.errstate(all="ignore"):
        out = quad(integrand, u_lo, u_hi, epsabs=eps_abs,
                   epsrel=rel_tol, limit=max_subdivisions,
                   points=seeds, full_output=True)
    value, abserr, info = out[0], out[1], out[2]
    neval = int(info.get("neval", 0)) if isinstance(info, dict) else 0

    # QUADPACK appends a message element only when its error flag is set; a
    # clean return already satisfies max(eps_abs, rel_tol*|I|) by its
    # stopping rule.
    if len(out) > 3:
        tol_met = abserr <= max(eps_abs, rel_tol * abs(value)) * 1.0001
        if not tol_met:
            # Integrals that vanish by cancellation bottom out at roundoff
            # of the l1 mass, not at eps_abs. Measure the mass loosely
            # before declaring failure.
            try:
                with np.errstate(all="ignore"):
                    l1 = quad(lambda u: abs(integrand(u)), u_lo, u_hi,
                              epsabs=0.0, epsrel=1e-2,
                              limit=max_subdivisions, points=seeds,
                              full_output=True)[0]
            except Exception:
                l1 = 0.0
            tol_met = abserr <= 100.0 * np.finfo(float).eps * abs(l1)
        if not tol_met:
            raise NumericalError(
                "line integral did not converge to the requested tolerance "
                f"(value~{value:.6e}, error~{abserr:.2e}, rel_tol={rel_tol:g})",
                estimate=(value, abserr),
            )
    return LineIntegral(value=float(value), error_estimate=float(abserr),
                        z_lower=float(z_lo_eff), z_upper=float(z_hi_eff),
                        substitution=substitution,
                        truncation_threshold=threshold,
                        function_evaluations=neval)


def _seed_ladder(ref: float, scale: float, lo_edge: float,
                 hi_edge: float) -> set:
    """Abscissas ref +- scale * 10^j out to the farther support edge."""
    span = max(abs(lo_edge - ref), abs(hi_edge - ref))
    seeds = {ref}
    step = scale
    for _ in range(31):
        if not (step <= span and math.isfinite(step)):
            break
        seeds.add(ref - step)
        seeds.add(ref + step)
        step *= 10.0
    return seeds


def _next_rung(x: float) -> float:
    """Smallest ladder rung strictly above x; pads the truncation outward."""
    if x <= 0.0:
        return 1e-12
    return float(10.0 ** (math.floor(math.log10(x) * 4.0) / 4.0 + 0.25))


def solve_tridiagonal(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray,
                      rhs: np.ndarray) -> np.ndarray:
    """Solve a tridiagonal system A x = rhs.

    ``lower`` (length n-1) is the subdiagonal, ``diag`` (length n) the main
    diagonal, ``upper`` (length n-1) the superdiagonal. Complex input is
    fine; this is the hot path of the radial Crank-Nicolson solve.
    """
    n = len(diag)
    dtype = np.result_type(lower.dtype if hasattr(lower, "dtype") else float,
                           diag.dtype if hasattr(diag, "dtype") else float,
                           rhs.dtype if hasattr(rhs, "dtype") else float)
    ab = np.zeros((3, n), dtype=dtype)
    ab[0, 1:] = upper
    ab[1, :] = diag
    ab[2, :-1] = lower
    return solve_banded((1, 1), ab, rhs)


def bracket_crossing(z: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """First sign change of sampled data, refined by linear interpolation.

    Returns the interpolated z of the first index pair where y changes sign
    (an exact zero counts), or None when y never crosses.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    for i in range(len(y) - 1):
        y0, y1 = y[i], y[i + 1]
        if y0 == 0.0:
            return float(z[i])
        if y0 * y1 < 0.0:
            return float(z[i] + (z[i + 1] - z[i]) * y0 / (y0 - y1))
    if len(y) and y[-1] == 0.0:
        return float(z[-1])
    return None


def parabolic_minimum(z: Sequence[float], y: Sequence[float]) -> float:
    """Vertex abscissa of the parabola through three samples.

    Used to refine discrete minima (ray turning points, wave waists).
    Falls back to the middle sample when the three points are collinear.
    """
    z0, z1, z2 = (float(v) for v in z)
    y0, y1, y2 = (float(v) for v in y)
    d01 = (y1 - y0) / (z1 - z0)
    d12 = (y2 - y1) / (z2 - z1)
    curv = (d12 - d01) / (z2 - z0)
    if curv == 0.0:
        return z1
    return 0.5 * (z0 + z1 - d01 / curv)
