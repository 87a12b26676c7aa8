"""Config-driven experiment runner: validated configs in, files + report out.

This is the layer both the command line and the HTTP service call. A run is
described by one JSON document (schema published via
:func:`config_json_schema`), executes deterministically into an output
directory, and returns a report carrying the resolved inputs, result
tables, a manifest of every file written (with SHA-256 digests), and the
package/constants fingerprints needed to reproduce it.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .core import CONSTANTS, ConfigurationError, NumericalError, make_beam
from . import fields as fieldmod
from .analytic import (LensElement, OpticalColumn, afocal_stack_magnification,
                       dispersion_summary, focal_length, larmor_phase,
                       spherical_c3, variable_spacing_image_solve,
                       variable_spacing_magnification)
from . import ray as raymod
from . import wave as wavemod

try:  # installed package metadata; fall back for in-tree use
    from importlib.metadata import version as _pkg_version
    PACKAGE_VERSION = _pkg_version("oamlens")
except Exception:  # pragma: no cover
    PACKAGE_VERSION = "0.1.0"

__all__ = [
    "BeamConfig", "ElementConfig", "ApertureConfig", "SourceModeConfig",
    "GridConfig", "RayConfig", "PropagationConfig", "StackConfig",
    "ImagesConfig", "ExperimentConfig", "FileRecord", "RunReport",
    "config_json_schema", "load_config", "run", "constants_digest",
]

RunKind = Literal["focal", "trace", "propagate", "stack", "dichroism", "spectrum"]


class BeamConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    voltage_volts: float = Field(gt=0.0)
    relativistic: bool = False


class ElementConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["glaser", "wire_loop", "tabulated"]
    z_center_meters: float = 0.0
    polarity: Literal[1, -1] = 1
    b_meters: Optional[float] = Field(default=None, gt=0.0)
    B0_tesla: Optional[float] = None
    a_meters: Optional[float] = Field(default=None, gt=0.0)
    R_meters: Optional[float] = Field(default=None, gt=0.0)
    current_amperes: Optional[float] = None
    field_csv: Optional[str] = None

    @model_validator(mode="after")
    def _check_kind_fields(self):
        if self.kind == "glaser":
            if self.B0_tesla is None or self.a_meters is None or self.b_meters is None:
                raise ValueError("glaser element needs B0_tesla, a_meters, b_meters")
        elif self.kind == "wire_loop":
            if self.R_meters is None:
                raise ValueError("wire_loop element needs R_meters")
            if (self.B0_tesla is None) == (self.current_amperes is None):
                raise ValueError("wire_loop element needs exactly one of "
                                 "B0_tesla or current_amperes")
            if self.b_meters is not None:
                raise ValueError("wire_loop pins its dispersion length to "
                                 "R_meters; b_meters is not settable")
        else:
            if self.field_csv is None or self.b_meters is None:
                raise ValueError("tabulated element needs field_csv and b_meters")
        return self

    def build(self, base_dir: Optional[Path] = None) -> LensElement:
        if self.kind == "glaser":
            model = fieldmod.AxialFieldModel.glaser(
                peak_field=self.B0_tesla, half_width=self.a_meters,
                dispersion_length=self.b_meters, polarity=self.polarity)
        elif self.kind == "wire_loop":
            model = fieldmod.AxialFieldModel.wire_loop(
                loop_radius=self.R_meters, loop_current=self.current_amperes,
                peak_field=self.B0_tesla, polarity=self.polarity)
        else:
            csv_path = Path(self.field_csv)
            if base_dir is not None and not csv_path.is_absolute():
                csv_path = base_dir / csv_path
            model = fieldmod.read_field_csv(csv_path, self.b_meters,
                                            polarity=self.polarity)
        return LensElement(model=model, z_center=self.z_center_meters)


class ApertureConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    z_meters: float
    radius_meters: float = Field(gt=0.0)


class SourceModeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    m: int
    w0_meters: float = Field(gt=0.0)
    amplitude_re: float = 1.0
    amplitude_im: float = 0.0

    def spec(self) -> wavemod.LGModeSpec:
        return wavemod.LGModeSpec(m=self.m, w0=self.w0_meters,
                                  amplitude=complex(self.amplitude_re,
                                                    self.amplitude_im))


class GridConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    n_radial: int = Field(default=2048, ge=8)
    rho_max_meters: float = Field(gt=0.0)

    def build(self) -> wavemod.RadialGrid:
        return wavemod.RadialGrid(n_points=self.n_radial,
                                  rho_max=self.rho_max_meters)


class RayConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    rel_tol: float = Field(default=1e-10, gt=0.0)
    max_step_meters: Optional[float] = Field(default=None, gt=0.0)
    fixed_step: bool = False
    n_steps: Optional[int] = Field(default=None, ge=10)
    launch_z_meters: Optional[float] = None
    launch_rho_meters: Optional[float] = Field(default=None, ge=0.0)
    launch_slope: float = 0.0
    z_end_meters: Optional[float] = None


class PropagationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    source_z_meters: float = 0.0
    sample_planes_meters: List[float] = Field(default_factory=list)
    max_dz_free_meters: Optional[float] = Field(default=None, gt=0.0)
    field_dz_divisor: float = Field(default=50.0, ge=1.0)
    absorber_strength_per_meter: float = Field(default=0.0, ge=0.0)

    def options(self, threads: int = 1) -> wavemod.PropagationOptions:
        return wavemod.PropagationOptions(
            max_dz_free=self.max_dz_free_meters,
            field_dz_divisor=self.field_dz_divisor,
            absorber_strength=self.absorber_strength_per_meter,
            threads=threads)


class StackConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    n_pairs: int = Field(default=1, ge=1)
    Lambda_override: Optional[float] = None
    s_values: List[float] = Field(default_factory=list)
    f0_meters: Optional[float] = Field(default=None, gt=0.0)


class ImagesConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    enable: bool = False
    n_pixels: int = Field(default=256, ge=2)
    pitch_meters: Optional[float] = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def _check_even(self):
        if self.n_pixels % 2 != 0:
            raise ValueError("n_pixels must be even")
        return self


class ExperimentConfig(BaseModel):
    """One simulation request. ``kind`` selects the protocol; the validator
    enforces the fields that protocol needs, so schema-valid configs are
    runnable configs."""

    model_config = ConfigDict(extra="forbid")

    kind: RunKind
    title: Optional[str] = None
    beam: BeamConfig
    elements: List[ElementConfig] = Field(default_factory=list)
    apertures: List[ApertureConfig] = Field(default_factory=list)
    m_values: List[int] = Field(default_factory=lambda: [0])
    source_modes: List[SourceModeConfig] = Field(default_factory=list)
    grid: Optional[GridConfig] = None
    ray: RayConfig = Field(default_factory=RayConfig)
    propagation: Optional[PropagationConfig] = None
    stack: Optional[StackConfig] = None
    aperture_radius_meters: Optional[float] = Field(default=None, gt=0.0)
    images: ImagesConfig = Field(default_factory=ImagesConfig)
    provenance: Optional[dict] = None

    @model_validator(mode="after")
    def _check_kind_requirements(self):
        kind = self.kind
        if kind in ("focal", "dichroism") and not self.elements:
            raise ValueError(f"kind={kind!r} requires at least one element")
        if kind == "trace" and self.ray.z_end_meters is None:
            raise ValueError("kind='trace' requires ray.z_end_meters")
        if kind == "trace" and not self.elements \
                and self.ray.launch_z_meters is None:
            raise ValueError("kind='trace' with an empty column requires "
                             "ray.launch_z_meters (no element to anchor the "
                             "default launch plane)")
        if kind in ("propagate", "dichroism", "spectrum"):
            if not self.source_modes:
                raise ValueError(f"kind={kind!r} requires source_modes")
            if self.grid is None:
                raise ValueError(f"kind={kind!r} requires grid")
        if kind == "propagate":
            if self.propagation is None or not self.propagation.sample_planes_meters:
                raise ValueError("kind='propagate' requires "
                                 "propagation.sample_planes_meters")
        if kind == "dichroism" and self.aperture_radius_meters is None:
            raise ValueError("kind='dichroism' requires aperture_radius_meters")
        if kind == "stack" and self.stack is None:
            raise ValueError("kind='stack' requires the stack section")
        if kind == "stack" and self.stack.Lambda_override is None and not self.elements:
            raise ValueError("kind='stack' needs an element or "
                             "stack.Lambda_override to fix the dispersion")
        return self


class FileRecord(BaseModel):
    path: str
    sha256: str
    bytes: int


class RunReport(BaseModel):
    """Everything a caller needs to audit one run."""

    schema_version: str = "1"
    package_version: str
    constants_sha256: str
    kind: str
    title: Optional[str] = None
    inputs: dict
    tables: Dict[str, List[dict]]
    notes: List[str]
    files: List[FileRecord]


def constants_digest() -> str:
    payload = json.dumps(CONSTANTS.as_dict(), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()


def config_json_schema() -> dict:
    """JSON schema of the experiment config, for validation and discovery."""
    return ExperimentConfig.model_json_schema()


def load_config(path) -> ExperimentConfig:
    """Parse and validate a config file.

    Raises
    ------
    ConfigurationError
        With the dotted path of the first offending field.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return validate_config(raw)


def validate_config(raw: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(part) for part in first.get("loc", ()))
        raise ConfigurationError(
            f"invalid config at '{loc}': {first.get('msg', 'invalid')}",
            field_path=loc or None) from exc


# -- run orchestration --------------------------------------------------------

class _Emitter:
    """Collects written files so the manifest can hash every one of them."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.paths: List[Path] = []

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.paths.append(p)
        return p

    def note_sidecar(self, name: str) -> None:
        self.paths.append(self.out_dir / name)

    def manifest(self) -> List[FileRecord]:
        records = []
        for p in sorted(set(self.paths)):
            data = p.read_bytes()
            records.append(FileRecord(
                path=p.relative_to(self.out_dir).as_posix(),
                sha256=hashlib.sha256(data).hexdigest(),
                bytes=len(data)))
        return records


def _write_table_csv(path: Path, rows: List[dict]) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            fh.write("\n")
            return
        cols = list(rows[0].keys())
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(row[c]) for c in cols) + "\n")


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def _build_column(config: ExperimentConfig, base_dir: Optional[Path],
                  polarity_flip: bool = False) -> OpticalColumn:
    elements = []
    for ec in config.elements:
        el = ec.build(base_dir)
        if polarity_flip:
            el = LensElement(model=el.model.flipped(), z_center=el.z_center)
        elements.append(el)
    apertures = tuple((a.z_meters, a.radius_meters) for a in config.apertures)
    return OpticalColumn(elements=tuple(elements), apertures=apertures)


def _default_source_z(column: OpticalColumn, pad: float = 25.0) -> float:
    if not column.elements:
        return 0.0
    return min(el.z_center - pad * el.model.extent for el in column.elements)


def run(config: ExperimentConfig, out_dir, threads: int = 1,
        base_dir: Optional[Path] = None) -> RunReport:
    """Execute one experiment into ``out_dir`` and return its report.

    ``base_dir`` resolves relative file references inside the config (for
    example tabulated field CSVs); it defaults to the current directory.
    The report is also written to ``out_dir/report.json``. Identical
    configs produce byte-identical outputs when the adaptive integrators
    are switched to their fixed-step modes; everything else in the pipeline
    is deterministic by construction.
    """
    out = Path(out_dir)
    emit = _Emitter(out)
    beam = make_beam(config.beam.voltage_volts,
                     relativistic=config.beam.relativistic)
    runner = {
        "focal": _run_focal,
        "trace": _run_trace,
        "propagate": _run_propagate,
        "stack": _run_stack,
        "dichroism": _run_dichroism,
        "spectrum": _run_spectrum,
    }[config.kind]
    tables, notes = runner(config, beam, emit, threads, base_dir)
    report = RunReport(
        package_version=PACKAGE_VERSION,
        constants_sha256=constants_digest(),
        kind=config.kind,
        title=config.title,
        inputs=config.model_dump(mode="json"),
        tables=tables,
        notes=notes,
        files=emit.manifest(),
    )
    report_path = out / "report.json"
    report_path.write_text(json.dumps(report.model_dump(mode="json"),
                                      indent=2, sort_keys=True) + "\n")
    return report


# -- kind runners -------------------------------------------------------------

def _run_focal(config, beam, emit, threads, base_dir):
    column = _build_column(config, base_dir)
    disp_rows, focal_rows = [], []
    for idx, el in enumerate(column.elements):
        ints = fieldmod.field_integrals(el.model)
        summary = dispersion_summary(el.model, beam, integrals=ints)
        disp_rows.append({
            "element": idx,
            "kind": el.model.kind,
            "z_center_meters": el.z_center,
            "f0_meters": summary.f0,
            "Lambda": summary.Lambda,
            "beta0": summary.beta0,
            "c3_at_f0_meters": spherical_c3(el.model, beam, summary.f0,
                                            integrals=ints),
        })
        for m in config.m_values:
            f_m = focal_length(el.model, beam, m, integrals=ints)
            focal_rows.append({
                "element": idx,
                "m": m,
                "f_m_meters": f_m,
                "f_approx_meters": summary.f0 * (1.0 + summary.Lambda * m),
                "larmor_phase_rad": larmor_phase(el.model, beam, m,
                                                 integrals=ints),
                "thin_lens_ok": bool(not math.isfinite(f_m)
                                     or abs(f_m) > 10.0 * el.model.extent),
            })
    _write_table_csv(emit.path("dispersion.csv"), disp_rows)
    _write_table_csv(emit.path("focal_table.csv"), focal_rows)
    return ({"dispersion": disp_rows, "focal": focal_rows},
            ["focal lengths from moment integrals; f_approx is the "
             "first-order dispersion law"])


def _run_trace(config, beam, emit, threads, base_dir):
    column = _build_column(config, base_dir)
    rc = config.ray
    z0 = rc.launch_z_meters if rc.launch_z_meters is not None \
        else _default_source_z(column)
    z_end = rc.z_end_meters
    rows = []
    w0_by_m = {sm.m: sm.w0_meters for sm in config.source_modes}
    for m in config.m_values:
        if rc.launch_rho_meters is not None:
            rho0 = rc.launch_rho_meters
        elif m in w0_by_m:
            rho0 = raymod.default_launch_radius(w0_by_m[m], m)
        elif config.source_modes:
            rho0 = raymod.default_launch_radius(
                config.source_modes[0].w0_meters, m)
        else:
            raise ConfigurationError(
                "trace needs ray.launch_rho_meters or source_modes to set "
                "the launch radius", field_path="ray.launch_rho_meters")
        state = raymod.RayState(z=z0, rho=rho0, rho_prime=rc.launch_slope, m=m)
        traj = raymod.trace(
            state, column, beam, z_end,
            rel_tol=rc.rel_tol, max_step=rc.max_step_meters,
            method="fixed" if rc.fixed_step else "adaptive",
            n_steps=rc.n_steps)
        raymod.write_trajectory_csv(traj, emit.path(f"trace_m{m:+d}.csv"))
        crossing = raymod.focal_crossing(traj)
        row = {"m": m, "launch_z_meters": z0, "launch_rho_meters": rho0,
               "crossing_z_meters": crossing}
        if column.elements:
            el = column.elements[0]
            f_m = focal_length(el.model, beam, m)
            row["thin_lens_crossing_meters"] = el.z_center + f_m
        rows.append(row)
    _write_table_csv(emit.path("crossings.csv"), rows)
    return ({"crossings": rows},
            ["per-m ray trajectories and focal crossings; thin_lens_crossing "
             "assumes the first element dominates"])


def _make_source(config, beam):
    grid = config.grid.build()
    specs = [sm.spec() for sm in config.source_modes]
    z0 = config.propagation.source_z_meters if config.propagation else 0.0
    return wavemod.lg_mode(specs, grid, beam, z=z0)


def _run_propagate(config, beam, emit, threads, base_dir):
    column = _build_column(config, base_dir)
    wave0 = _make_source(config, beam)
    options = config.propagation.options(threads)
    snapshots = wavemod.propagate(wave0, column,
                                  config.propagation.sample_planes_meters,
                                  options)
    ms = wave0.m_values()
    rms_rows = [{"z_meters": z, "m": m, "rms_meters": wavemod.rms_radius(w, m)}
                for z, w in snapshots for m in ms]
    waist_rows = []
    for m in ms:
        zw = wavemod.waist_position(snapshots, m)
        waist_rows.append({"m": m, "waist_z_meters": zw})
    final = snapshots[-1][1]
    spectrum = wavemod.oam_spectrum(final)
    for m in ms:
        wavemod.write_profile_csv(emit.path(f"profile_m{m:+d}.csv"), final, m)
    wavemod.write_spectrum_csv(emit.path("spectrum.csv"), spectrum)
    _write_table_csv(emit.path("rms.csv"), rms_rows)
    _write_table_csv(emit.path("waists.csv"), waist_rows)
    notes = ["profiles and spectrum are at the final sample plane"]
    if config.images.enable:
        pitch = config.images.pitch_meters or (2.0 * wave0.grid.rho_max
                                               / config.images.n_pixels)
        fieldmap = wavemod.synthesize_2d(final, config.images.n_pixels, pitch)
        for quantity, data in (("intensity", fieldmap.intensity),
                               ("phase", fieldmap.phase)):
            name = f"field_{quantity}.pgm"
            wavemod.write_pgm16(emit.path(name), data, quantity, pitch, final.z)
            emit.note_sidecar(name + ".json")
        notes.append("2D synthesis images written as 16-bit PGM with JSON "
                     "sidecars")
    return ({"rms": rms_rows, "waists": waist_rows,
             "spectrum": [{"m": m, "power": p} for m, p in spectrum.items()]},
            notes)


def _run_stack(config, beam, emit, threads, base_dir):
    sc = config.stack
    if sc.Lambda_override is not None:
        lam = sc.Lambda_override
        f0 = sc.f0_meters or 1.0
        source = "override"
    else:
        column = _build_column(config, base_dir)
        summary = dispersion_summary(column.elements[0].model, beam)
        lam, f0 = summary.Lambda, summary.f0
        source = "element"
    rows = []
    for m in config.m_values:
        mag = afocal_stack_magnification(lam, m, sc.n_pairs)
        gap = abs(mag.exact - mag.approximate) / abs(mag.exact) \
            if mag.exact != 0 else math.inf
        rows.append({"m": m, "Lambda_m": lam * m, "n_pairs": sc.n_pairs,
                     "exact": mag.exact, "approximate": mag.approximate,
                     "relative_gap": gap})
    var_rows = []
    for s in sc.s_values:
        for m in config.m_values:
            closed = variable_spacing_magnification(lam, m, s)
            sol = variable_spacing_image_solve(lam, m, s, f0)
            var_rows.append({
                "m": m, "s": s, "closed_form": closed,
                "abcd": sol.magnification,
                "relative_gap": (abs(closed - sol.magnification)
                                 / abs(sol.magnification))
                if math.isfinite(closed) and sol.magnification != 0 else math.inf,
            })
    _write_table_csv(emit.path("stack_table.csv"), rows)
    tables = {"stack": rows}
    notes = [f"dispersion source: {source} (Lambda={lam!r}, f0={f0!r})"]
    if var_rows:
        _write_table_csv(emit.path("variable_spacing.csv"), var_rows)
        tables["variable_spacing"] = var_rows
    return tables, notes


def _run_dichroism(config, beam, emit, threads, base_dir):
    """Both-polarity aperture-transmission protocol.

    The sorting aperture sits at the +polarity focal plane of the m = +1
    component of the first element; both polarity runs use that same
    physical plane, which is what makes the contrast antisymmetric.
    """
    base_column = _build_column(config, base_dir)
    el = base_column.elements[0]
    f_plus1 = focal_length(el.model, beam, +1)
    if not (math.isfinite(f_plus1) and f_plus1 > 0.0):
        raise NumericalError("m=+1 focal length is not a finite positive "
                             "distance; dichroism plane undefined")
    z_aperture = el.z_center + f_plus1
    rows = []
    contrasts = {}
    for polarity_flip in (False, True):
        column = _build_column(config, base_dir, polarity_flip=polarity_flip)
        wave0 = _make_source(config, beam)
        prop = config.propagation or PropagationConfig()
        options = prop.options(threads)
        snapshots = wavemod.propagate(wave0, column, [z_aperture], options)
        final = snapshots[-1][1]
        fractions = wavemod.aperture_transmission(
            final, config.aperture_radius_meters)
        powers = {m: final.power(m) * fractions[m] for m in final.m_values()}
        p_plus = powers.get(+1, 0.0)
        p_minus = powers.get(-1, 0.0)
        contrast = (p_plus - p_minus) / (p_plus + p_minus) \
            if (p_plus + p_minus) > 0.0 else 0.0
        pol = -1 if polarity_flip else 1
        contrasts[pol] = contrast
        row = {"polarity": pol, "aperture_z_meters": z_aperture,
               "aperture_radius_meters": config.aperture_radius_meters,
               "contrast": contrast}
        for m in sorted(powers):
            row[f"transmitted_power_m{m:+d}"] = powers[m]
            row[f"transmitted_fraction_m{m:+d}"] = fractions[m]
        rows.append(row)
    _write_table_csv(emit.path("dichroism.csv"), rows)
    asym = abs(contrasts[1] + contrasts[-1])
    notes = [f"contrast antisymmetry |c(+) + c(-)| = {asym!r}",
             "aperture plane fixed at the +polarity m=+1 focal plane for "
             "both polarities"]
    return ({"dichroism": rows}, notes)


def _run_spectrum(config, beam, emit, threads, base_dir):
    wave0 = _make_source(config, beam)
    notes = []
    wave = wave0
    if config.aperture_radius_meters is not None:
        wave, info = wavemod.apply_aperture(wave0, config.aperture_radius_meters,
                                            renormalize=True)
        notes.append(f"hard aperture applied: transmitted power "
                     f"{info['transmitted_power']!r}, renormalized")
    spectrum = wavemod.oam_spectrum(wave)
    wavemod.write_spectrum_csv(emit.path("spectrum.csv"), spectrum)
    rows = [{"m": m, "power": p} for m, p in spectrum.items()]
    return ({"spectrum": rows}, notes)
