"""Semiclassical radial ray tracing through axisymmetric magnetic columns.

Rays here are characteristics of the azimuthal-component beam: each ray
carries the azimuthal quantum number m of the wave component it represents,
which enters the radial equation of motion as a conserved canonical angular
momentum m hbar. Tracing the same launch condition for opposite m (or
opposite lens polarity) exposes the focal-length splitting that the matrix
and wave layers describe in their own terms.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import solve_ivp

from .core import (CONSTANTS, BeamParameters, DomainError, NumericalError,
                   bracket_crossing, parabolic_minimum)
from .fields import AxialFieldModel
from .analytic import LensElement, OpticalColumn

__all__ = [
    "RayState",
    "RayTrajectory",
    "radial_rhs",
    "trace",
    "focal_crossing",
    "default_launch_radius",
    "write_trajectory_csv",
]


@dataclass(frozen=True)
class RayState:
    """Instantaneous ray sample: axial position, radius, slope, and the
    azimuthal quantum number the ray represents."""

    z: float
    rho: float
    rho_prime: float
    m: int


@dataclass
class RayTrajectory:
    """Sampled ray path plus provenance of the integration that produced it."""

    z: np.ndarray
    rho: np.ndarray
    rho_prime: np.ndarray
    m: int
    provenance: dict = field(default_factory=dict)

    def state_at(self, index: int) -> RayState:
        return RayState(z=float(self.z[index]), rho=float(self.rho[index]),
                        rho_prime=float(self.rho_prime[index]), m=self.m)


def _angular_momentum_length(m: int, beam: BeamParameters) -> float:
    # L = m hbar / (m_e v) has units of length^2 / length: rho^2 rho'' ~ L^2/rho
    return m * CONSTANTS.hbar / (CONSTANTS.m_e * beam.speed)


def radial_rhs(state: RayState, model: Union[AxialFieldModel, LensElement],
               beam: BeamParameters) -> float:
    """Second derivative d^2 rho / dz^2 for a single element.

    Derivation sketch (the basis for the expression below): the transverse
    motion of an electron of charge -e in an axisymmetric field conserves
    the canonical angular momentum p_phi = m_e rho^2 dphi/dt - e rho A_phi,
    quantized as m hbar for the azimuthal component the ray represents.
    Eliminating dphi/dt turns the transverse Hamiltonian into motion in the
    effective radial potential

        U(rho) = (m hbar + e rho A_phi)^2 / (2 m_e rho^2),

    and inserting A_phi = B1 rho/2 - B3 rho^3/(8 b^2), dropping terms
    beyond rho^4 in U (consistent with the potential's own truncation),
    gives with d/dt = v d/dz

        rho'' = (m hbar)^2 / (m_e^2 v^2 rho^3)
                - [ e^2 B1^2 - e m hbar B3 / b^2 ] rho / (4 m_e^2 v^2).

    The rho-independent cross term in U carries no radial force; it is the
    rotation phase handled by the analytic layer.

    Raises
    ------
    DomainError
        If rho = 0 while m != 0 (the centrifugal term diverges; such a ray
        cannot be on the axis).
    """
    if isinstance(model, LensElement):
        z_local = state.z - model.z_center
        model = model.model
    else:
        z_local = state.z
    if state.rho == 0.0 and state.m != 0:
        raise DomainError("rho = 0 with m != 0: centrifugal term is singular")
    b1, b3 = model.eval(z_local)
    b1 = float(b1)
    s3 = float(b3) / model.dispersion_length ** 2
    return _rhs_value(state.rho, state.m, float(b1), s3, beam)


def _rhs_value(rho: float, m: int, b1: float, s3: float,
               beam: BeamParameters) -> float:
    c = CONSTANTS
    v = beam.speed
    lens = (c.e_charge ** 2 * b1 * b1 - c.e_charge * m * c.hbar * s3) \
        / (4.0 * c.m_e ** 2 * v * v)
    out = -lens * rho
    if m != 0:
        ell = _angular_momentum_length(m, beam)
        out += ell * ell / rho ** 3
    return out


def _profile_fn(column: OpticalColumn) -> Callable[[float], tuple]:
    """Scalar (B1_total, B3/b^2_total) evaluator; pure-python fast path for
    analytic elements since this sits inside the ODE right-hand side."""
    analytic_ok = all(el.model.kind in ("glaser", "wire_loop")
                      for el in column.elements)
    if not analytic_ok:
        return lambda z: column.axial_profiles(z)
    parts = []
    for el in column.elements:
        mdl = el.model
        s = float(mdl.polarity)
        inv_b2 = 1.0 / mdl.dispersion_length ** 2
        if mdl.kind == "glaser":
            parts.append(("g", el.z_center, s * mdl.peak_field,
                          mdl.half_width, inv_b2))
        else:
            parts.append(("w", el.z_center, s * mdl.peak_field,
                          mdl.loop_radius, inv_b2))

    def fn(z: float):
        b1_tot = 0.0
        s3_tot = 0.0
        for kind, zc, b0, scale, inv_b2 in parts:
            u = z - zc
            if kind == "g":
                bell = b0 / (1.0 + (u / scale) ** 2)
                b1_tot += bell
                s3_tot += bell * inv_b2
            else:
                ell2 = u * u + scale * scale
                ell = math.sqrt(ell2)
                r3 = scale ** 3
                b1_tot += 0.5 * b0 * r3 / (ell2 * ell)
                frac = (scale * scale / ell2)
                base = 3.0 * b0 * frac * frac * (scale / ell)
                s3_tot += (base + 2.5 * base * frac) * inv_b2
        return b1_tot, s3_tot

    return fn


def trace(initial: RayState, column: OpticalColumn, beam: BeamParameters,
          z_end: float, rel_tol: float = 1e-10,
          max_step: Optional[float] = None, method: str = "adaptive",
          n_steps: Optional[int] = None,
          n_samples: int = 2001) -> RayTrajectory:
    """Integrate one ray from its initial state to z_end.

    Parameters
    ----------
    initial : RayState
        Launch condition; ``initial.z`` is the start plane.
    column : OpticalColumn
        Elements contribute their superposed fields at every z.
    beam : BeamParameters
    z_end : float
        Final plane, must exceed the launch plane.
    rel_tol : float
        Relative tolerance of the adaptive integrator.
    max_step : float, optional
        Hard cap on the adaptive step. Defaults to four times the narrowest
        element extent in the column: without a cap the controller can grow
        the step across a field-free gap until a narrow lens fits between
        two stage evaluations and is silently skipped. Empty columns leave
        the step uncapped.
    method : {"adaptive", "fixed"}
        "adaptive" uses an embedded Runge-Kutta 4(5) pair with error
        control; "fixed" is a classic fixed-step RK4 sweep, bit-for-bit
        reproducible across runs.
    n_steps : int, optional
        Step count for the fixed sweep (default 20000).
    n_samples : int
        Output sample count for the adaptive path (the fixed path records
        its own grid).

    Raises
    ------
    DomainError
        For a non-forward range or an on-axis launch with m != 0.
    NumericalError
        If the adaptive integrator reports failure.
    """
    if z_end <= initial.z:
        raise DomainError("z_end must lie beyond the launch plane")
    if initial.rho == 0.0 and initial.m != 0:
        raise DomainError("rho = 0 with m != 0: centrifugal term is singular")
    if initial.rho < 0.0:
        raise DomainError("launch radius must be non-negative")
    if method not in ("adaptive", "fixed"):
        raise DomainError(f"unknown method {method!r}")

    profiles = _profile_fn(column)
    m = initial.m

    def rhs(z, y):
        b1, s3 = profiles(z)
        return (y[1], _rhs_value(y[0], m, b1, s3, beam))

    y0 = (initial.rho, initial.rho_prime)

    if max_step is None and column.elements:
        max_step = 4.0 * min(el.model.extent for el in column.elements)

    if method == "adaptive":
        span = z_end - initial.z
        scale = max(abs(initial.rho), abs(initial.rho_prime) * span, 1e-15)
        t_eval = np.linspace(initial.z, z_end, n_samples)
        sol = solve_ivp(rhs, (initial.z, z_end), y0, method="RK45",
                        rtol=rel_tol, atol=rel_tol * scale * 1e-2,
                        max_step=max_step if max_step else np.inf,
                        t_eval=t_eval, dense_output=False)
        if not sol.success:
            raise NumericalError(f"ray integration failed: {sol.message}",
                                 estimate=(sol.t[-1] if len(sol.t) else initial.z,))
        prov = {"method": "rk45-adaptive", "rel_tol": rel_tol,
                "rhs_evaluations": int(sol.nfev), "n_samples": n_samples}
        return RayTrajectory(z=sol.t, rho=sol.y[0], rho_prime=sol.y[1], m=m,
                             provenance=prov)

    if n_steps is None:
        n_steps = 20000
    z_grid = np.linspace(initial.z, z_end, n_steps + 1)
    h = (z_end - initial.z) / n_steps
    rho = np.empty(n_steps + 1)
    slope = np.empty(n_steps + 1)
    rho[0], slope[0] = y0
    y = np.array(y0, dtype=float)
    for i in range(n_steps):
        z = z_grid[i]
        k1 = np.asarray(rhs(z, y))
        k2 = np.asarray(rhs(z + 0.5 * h, y + 0.5 * h * k1))
        k3 = np.asarray(rhs(z + 0.5 * h, y + 0.5 * h * k2))
        k4 = np.asarray(rhs(z + h, y + h * k3))
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        rho[i + 1], slope[i + 1] = y
    prov = {"method": "rk4-fixed", "n_steps": n_steps, "step": h}
    return RayTrajectory(z=z_grid, rho=rho, rho_prime=slope, m=m, provenance=prov)


def focal_crossing(trajectory: RayTrajectory) -> Optional[float]:
    """Axial position where the traced ray focuses, or None.

    For m = 0 the ray can cross the axis; the crossing is located by linear
    interpolation of the sign change. For m != 0 the centrifugal barrier
    keeps rho > 0, so the focus is the turning point of minimum radius,
    refined by a parabola through the discrete minimum and its neighbors.
    A monotone radius (no focus within the traced range) returns None.
    """
    z, rho = trajectory.z, trajectory.rho
    if trajectory.m == 0:
        return bracket_crossing(z, rho)
    i = int(np.argmin(rho))
    if i == 0 or i == len(rho) - 1:
        return None
    return parabolic_minimum(z[i - 1:i + 2], rho[i - 1:i + 2])


def default_launch_radius(w0: float, m: int) -> float:
    """Peak-intensity radius w0 sqrt(|m|/2) of the matching ring mode.

    This is the natural representative radius for a ray standing in for an
    azimuthal wave component of waist w0; it degenerates to 0 for m = 0.
    """
    if not w0 > 0.0:
        raise DomainError("w0 must be positive")
    return w0 * math.sqrt(abs(m) / 2.0)


def write_trajectory_csv(trajectory: RayTrajectory, path) -> None:
    """Write trajectory samples as ``z,rho,rho_prime,m`` with a header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z", "rho", "rho_prime", "m"])
        for z, r, rp in zip(trajectory.z, trajectory.rho, trajectory.rho_prime):
            writer.writerow([repr(float(z)), repr(float(r)),
                             repr(float(rp)), trajectory.m])
