"""Scenario configuration, pipeline orchestration, and artifact output.

A scenario is a plain-text key/value document (dotted hierarchical keys,
``#`` comments, one ``key = value`` per line). Every key has a built-in
default; unknown keys are rejected with the offending path. ``preset``
selects a bundled parameter set which individual keys may then override.
The full normative key set lives in :data:`CONFIG_SCHEMA` and is documented
in the README.

``run_scenario`` wires release -> channel (either or both solvers) ->
receiver, writes all artifacts under the output directory, and returns a
RunReport. Runs are deterministic given the seed; data artifacts are
byte-for-byte reproducible (the JSON report also carries wall-clock timings,
which are excluded from that guarantee).
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import SpectralGrid, field as analytic_field, probe as analytic_probe
from .errors import ConfigError, GridError
from .fdsolver import BoxGrid, run as grid_run
from .fieldio import diagnostics_to_csv, probe_to_csv, write_field
from .release import (
    CalciumDrive,
    ExocytosisParams,
    MvbParams,
    ReleaseProfile,
    drive_from_csv,
    drive_to_csv,
    event_rate,
    events_to_csv,
    mvb_mean_concentration,
    release_rate,
    sample_events,
    synth_calcium_drive,
)
from .receiver import (
    ClathrinParams,
    LigandReceptorParams,
    integrate,
    trajectory_to_csv,
)
from .transport import ChannelParams, ConcentrationField

__all__ = [
    "CONFIG_SCHEMA",
    "PRESETS",
    "ScenarioConfig",
    "RunReport",
    "load_config",
    "load_config_text",
    "serialize_config",
    "run_scenario",
    "compare_fields",
    "relative_linf",
    "relative_l2",
]

OUTPUT_ROOT_ENV = "EVSIM_OUTPUT_ROOT"

# Normative schema: every legal key with its canonical default (as text).
CONFIG_SCHEMA: dict[str, str] = {
    "seed": "12345",
    "output_dir": "runs/scenario",
    "preset": "",
    "probes_um": "2 0 20; 6 0 20; 10 0 20",
    "snapshot_times_s": "1, 2, 3",
    "release.sub_exponent": "4",
    "release.sub_half_sat_um": "1",
    "release.ltcc_exponent": "4",
    "release.ltcc_half_sat_um": "10",
    "release.mean_ev_count": "24",
    "release.mvb_diameter_nm": "500",
    "release.drive": "synthetic",
    "release.heart_rate_bpm": "120",
    "release.pulse_amplitude_um_per_s": "25",
    "release.pulse_duration_s": "0.15",
    "release.dt_s": "0.005",
    "release.event_dt_s": "0.005",
    "release.gamma_scale": "1",
    "channel.solver": "both",
    "channel.horizon_s": "3",
    "channel.d_um2_per_s": "1",
    "channel.tortuosity": "1.1, 1.4, 1.7",
    "channel.v_um_per_s": "0, 0, 0",
    "channel.alpha": "0.6",
    "channel.binding_rate_per_s": "0.2",
    "channel.half_life_s": "none",
    "channel.degradation": "alpha_scaled",
    "channel.source_center_um": "0, 0, 20",
    "channel.source_sigma_um": "7, 7, 7",
    "channel.grid.center_um": "0, 0, 20",
    "channel.grid.edge_um": "40",
    "channel.grid.h_um": "1",
    "channel.grid.dt_s": "auto",
    "channel.grid.scheme": "central",
    "channel.spectral.points": "64, 64, 64",
    "channel.spectral.align_um": "2",
    "receiver.enabled": "true",
    "receiver.cell_um": "10, 0, 20",
    "receiver.assoc_per_molar_s": "1e4",
    "receiver.dissoc_per_s": "1e-10",
    "receiver.internalization_per_s": "0.0027",
    "receiver.binding_sites": "53000",
    "receiver.cell_radius_um": "82.5",
    "receiver.max_binding_rate_per_molar_s": "6.64e-17",
    "receiver.pit_coat_capacity": "200",
    "receiver.pit_count": "180",
    "receiver.degradation_per_s": "0.0002",
    "receiver.capacity_units": "concentration",
    "receiver.dt_ode_s": "0.5",
    "receiver.horizon_s": "auto",
}

PRESETS: dict[str, dict[str, str]] = {
    "scenario_a": {
        "channel.v_um_per_s": "5, 0, 0",
        "channel.binding_rate_per_s": "0.2",
        "channel.tortuosity": "1.1, 1.4, 1.7",
    },
    "scenario_b": {
        "channel.v_um_per_s": "5, -5, 5",
        "channel.binding_rate_per_s": "0.5",
        "channel.tortuosity": "1.1, 1.1, 1.1",
    },
    "scenario_c": {
        "channel.v_um_per_s": "0, 0, 0",
        "channel.binding_rate_per_s": "0.8",
        "channel.tortuosity": "1.4, 1.4, 1.4",
    },
    # Cross-validation preset: both solvers, probes along x, spectral nodes
    # fine enough that the probes land exactly on grid nodes.
    "fig4": {
        "channel.v_um_per_s": "5, -5, 5",
        "channel.binding_rate_per_s": "0.5",
        "channel.tortuosity": "1.1, 1.1, 1.1",
        "channel.solver": "both",
        "channel.horizon_s": "3",
        "channel.spectral.points": "128, 128, 128",
        "probes_um": "2 0 20; 6 0 20; 10 0 20",
        "snapshot_times_s": "1, 2, 3",
        "receiver.enabled": "false",
    },
    # Long-horizon receiver uptake preset: drift-free channel so the
    # unbounded solution stays representable over 5000 s. The receiver step
    # must resolve the beat-periodic concentration (a step commensurate with
    # the 0.5 s beat aliases it).
    "fig6": {
        "channel.v_um_per_s": "0, 0, 0",
        "channel.binding_rate_per_s": "0.2",
        "channel.tortuosity": "1.1, 1.4, 1.7",
        "channel.solver": "analytic",
        "channel.horizon_s": "5000",
        "release.dt_s": "0.05",
        "release.event_dt_s": "0.05",
        "probes_um": "10 0 20",
        "snapshot_times_s": "",
        "receiver.enabled": "true",
        "receiver.cell_um": "10, 0, 20",
        "receiver.horizon_s": "5000",
        "receiver.dt_ode_s": "0.1",
    },
}


def _parse_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(float(raw)) if float(raw) == int(float(raw)) else int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None


def _parse_bool(key: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _parse_triple(key: str, raw: str) -> tuple[float, float, float]:
    parts = [p for p in raw.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise ConfigError(f"{key}: expected three numbers, got {raw!r}")
    return tuple(_parse_float(key, p) for p in parts)


def _parse_points(key: str, raw: str) -> list[tuple[float, float, float]]:
    groups = [g.strip() for g in raw.split(";") if g.strip()]
    return [_parse_triple(key, g) for g in groups]


def _parse_floats(key: str, raw: str) -> list[float]:
    parts = [p for p in raw.replace(",", " ").split() if p]
    return [_parse_float(key, p) for p in parts]


def _parse_optional_float(key: str, raw: str, sentinels=("none", "auto", "")) -> float | None:
    if raw.strip().lower() in sentinels:
        return None
    return _parse_float(key, raw)


@dataclass
class ScenarioConfig:
    """Fully validated scenario: typed parameter blocks plus run controls."""

    raw: dict[str, str]
    seed: int
    output_dir: str
    probes_um: list[tuple[float, float, float]]
    snapshot_times_s: list[float]

    exocytosis: ExocytosisParams
    mvb: MvbParams
    drive_source: str
    heart_rate_bpm: float
    pulse_amplitude_um_per_s: float
    pulse_duration_s: float
    release_dt_s: float
    event_dt_s: float
    gamma_scale: float

    channel: ChannelParams
    solver: str
    horizon_s: float
    box_grid: BoxGrid
    grid_scheme: str
    spectral_points: tuple[int, int, int]
    spectral_align_um: float

    receiver_enabled: bool
    cell_um: tuple[float, float, float]
    lr: LigandReceptorParams
    cm: ClathrinParams
    receiver_dt_ode_s: float
    receiver_horizon_s: float | None


def _merge_raw(text: str) -> dict[str, str]:
    """Parse key = value lines, apply preset defaults, reject unknown keys."""
    user: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if key not in CONFIG_SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in user:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        user[key] = value

    merged = dict(CONFIG_SCHEMA)
    preset_name = user.get("preset", "").strip().lower()
    if preset_name:
        if preset_name not in PRESETS:
            raise ConfigError(
                f"preset: unknown preset {preset_name!r} (choices: {sorted(PRESETS)})"
            )
        merged.update(PRESETS[preset_name])
        merged["preset"] = preset_name
    merged.update(user)
    return merged


def load_config_text(text: str) -> ScenarioConfig:
    raw = _merge_raw(text)

    def build():
        probes = _parse_points("probes_um", raw["probes_um"])
        snapshots = _parse_floats("snapshot_times_s", raw["snapshot_times_s"])

        exo = ExocytosisParams(
            sub_exponent=_parse_float("release.sub_exponent", raw["release.sub_exponent"]),
            sub_half_sat_um=_parse_float("release.sub_half_sat_um", raw["release.sub_half_sat_um"]),
            ltcc_exponent=_parse_float("release.ltcc_exponent", raw["release.ltcc_exponent"]),
            ltcc_half_sat_um=_parse_float(
                "release.ltcc_half_sat_um", raw["release.ltcc_half_sat_um"]
            ),
        )
        mvb = MvbParams(
            mean_ev_count=_parse_float("release.mean_ev_count", raw["release.mean_ev_count"]),
            diameter_m=_parse_float("release.mvb_diameter_nm", raw["release.mvb_diameter_nm"]) * 1e-9,
        )
        channel = ChannelParams(
            diffusion_um2_s=_parse_float("channel.d_um2_per_s", raw["channel.d_um2_per_s"]),
            tortuosity=_parse_triple("channel.tortuosity", raw["channel.tortuosity"]),
            velocity_um_s=_parse_triple("channel.v_um_per_s", raw["channel.v_um_per_s"]),
            volume_fraction=_parse_float("channel.alpha", raw["channel.alpha"]),
            binding_rate_per_s=_parse_float(
                "channel.binding_rate_per_s", raw["channel.binding_rate_per_s"]
            ),
            half_life_s=_parse_optional_float("channel.half_life_s", raw["channel.half_life_s"]),
            source_center_um=_parse_triple(
                "channel.source_center_um", raw["channel.source_center_um"]
            ),
            source_sigma_um=_parse_triple(
                "channel.source_sigma_um", raw["channel.source_sigma_um"]
            ),
            degradation_convention=raw["channel.degradation"],
        )
        solver = raw["channel.solver"].strip().lower()
        if solver not in ("analytic", "grid", "both"):
            raise ConfigError(f"channel.solver: must be analytic, grid or both, got {solver!r}")

        box = BoxGrid(
            center_um=_parse_triple("channel.grid.center_um", raw["channel.grid.center_um"]),
            edge_um=_parse_float("channel.grid.edge_um", raw["channel.grid.edge_um"]),
            spacing_um=_parse_float("channel.grid.h_um", raw["channel.grid.h_um"]),
            dt_s=_parse_optional_float("channel.grid.dt_s", raw["channel.grid.dt_s"]),
        )
        scheme = raw["channel.grid.scheme"].strip().lower()
        if scheme not in ("central", "upwind"):
            raise ConfigError(f"channel.grid.scheme: must be central or upwind, got {scheme!r}")
        points = _parse_floats("channel.spectral.points", raw["channel.spectral.points"])
        if len(points) != 3 or any(p != int(p) for p in points):
            raise ConfigError("channel.spectral.points: expected three integers")

        capacity_units = raw["receiver.capacity_units"].strip().lower()
        if capacity_units not in ("concentration", "counts"):
            raise ConfigError(
                "receiver.capacity_units: must be concentration or counts, "
                f"got {capacity_units!r}"
            )
        lr = LigandReceptorParams(
            assoc_rate_per_molar_s=_parse_float(
                "receiver.assoc_per_molar_s", raw["receiver.assoc_per_molar_s"]
            ),
            dissoc_rate_per_s=_parse_float("receiver.dissoc_per_s", raw["receiver.dissoc_per_s"]),
            internalization_rate_per_s=_parse_float(
                "receiver.internalization_per_s", raw["receiver.internalization_per_s"]
            ),
            binding_sites=_parse_int("receiver.binding_sites", raw["receiver.binding_sites"]),
            cell_radius_um=_parse_float("receiver.cell_radius_um", raw["receiver.cell_radius_um"]),
        )
        cm = ClathrinParams(
            max_binding_rate_per_molar_s=_parse_float(
                "receiver.max_binding_rate_per_molar_s",
                raw["receiver.max_binding_rate_per_molar_s"],
            ),
            pit_coat_capacity=_parse_int(
                "receiver.pit_coat_capacity", raw["receiver.pit_coat_capacity"]
            ),
            pit_count=_parse_int("receiver.pit_count", raw["receiver.pit_count"]),
            internalization_rate_per_s=_parse_float(
                "receiver.internalization_per_s", raw["receiver.internalization_per_s"]
            ),
            degradation_rate_per_s=_parse_float(
                "receiver.degradation_per_s", raw["receiver.degradation_per_s"]
            ),
            capacity_as_counts=(capacity_units == "counts"),
        )

        horizon = _parse_float("channel.horizon_s", raw["channel.horizon_s"])
        cell = _parse_triple("receiver.cell_um", raw["receiver.cell_um"])
        return ScenarioConfig(
            raw=raw,
            seed=_parse_int("seed", raw["seed"]),
            output_dir=raw["output_dir"],
            probes_um=probes,
            snapshot_times_s=snapshots,
            exocytosis=exo,
            mvb=mvb,
            drive_source=raw["release.drive"].strip(),
            heart_rate_bpm=_parse_float("release.heart_rate_bpm", raw["release.heart_rate_bpm"]),
            pulse_amplitude_um_per_s=_parse_float(
                "release.pulse_amplitude_um_per_s", raw["release.pulse_amplitude_um_per_s"]
            ),
            pulse_duration_s=_parse_float(
                "release.pulse_duration_s", raw["release.pulse_duration_s"]
            ),
            release_dt_s=_parse_float("release.dt_s", raw["release.dt_s"]),
            event_dt_s=_parse_float("release.event_dt_s", raw["release.event_dt_s"]),
            gamma_scale=_parse_float("release.gamma_scale", raw["release.gamma_scale"]),
            channel=channel,
            solver=solver,
            horizon_s=horizon,
            box_grid=box,
            grid_scheme=scheme,
            spectral_points=tuple(int(p) for p in points),
            spectral_align_um=_parse_float(
                "channel.spectral.align_um", raw["channel.spectral.align_um"]
            ),
            receiver_enabled=_parse_bool("receiver.enabled", raw["receiver.enabled"]),
            cell_um=cell,
            lr=lr,
            cm=cm,
            receiver_dt_ode_s=_parse_float("receiver.dt_ode_s", raw["receiver.dt_ode_s"]),
            receiver_horizon_s=_parse_optional_float(
                "receiver.horizon_s", raw["receiver.horizon_s"]
            ),
        )

    try:
        config = build()
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    _validate_config(config)
    return config


def load_config(path) -> ScenarioConfig:
    """Read and validate a scenario file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return load_config_text(text)


def _validate_config(cfg: ScenarioConfig) -> None:
    if cfg.seed < 0:
        raise ConfigError("seed: must be nonnegative")
    if not cfg.horizon_s > 0:
        raise ConfigError("channel.horizon_s: must be > 0")
    if not cfg.release_dt_s > 0 or not cfg.event_dt_s > 0:
        raise ConfigError("release.dt_s and release.event_dt_s must be > 0")
    if cfg.gamma_scale < 0:
        raise ConfigError("release.gamma_scale: must be >= 0")
    if cfg.drive_source != "synthetic" and not Path(cfg.drive_source).exists():
        raise ConfigError(f"release.drive: file {cfg.drive_source!r} does not exist")
    if cfg.solver in ("grid", "both"):
        lo = [cfg.box_grid.center_um[a] - 0.5 * cfg.box_grid.edge_um for a in range(3)]
        hi = [cfg.box_grid.center_um[a] + 0.5 * cfg.box_grid.edge_um for a in range(3)]
        points = list(cfg.probes_um)
        if cfg.receiver_enabled:
            points.append(cfg.cell_um)
        for p in points:
            if any(p[a] < lo[a] or p[a] > hi[a] for a in range(3)):
                raise ConfigError(f"probe/cell point {p} lies outside the solver box")
    if cfg.receiver_enabled:
        horizon = cfg.receiver_horizon_s or cfg.horizon_s
        if horizon > cfg.horizon_s + 1e-9:
            raise ConfigError(
                "receiver.horizon_s: exceeds channel.horizon_s; no concentration to drive it"
            )
        if not cfg.receiver_dt_ode_s > 0:
            raise ConfigError("receiver.dt_ode_s: must be > 0")


def serialize_config(cfg: ScenarioConfig) -> str:
    """Canonical text form: every key, sorted; load(serialize(c)) == c."""
    lines = [f"{key} = {cfg.raw[key]}" for key in sorted(cfg.raw)]
    return "\n".join(lines) + "\n"


def config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()


def relative_linf(candidate: np.ndarray, reference: np.ndarray) -> float:
    """max |a - b| / max |b| (0 when both are identically zero)."""
    ref_peak = float(np.max(np.abs(reference), initial=0.0))
    diff = float(np.max(np.abs(np.asarray(candidate) - np.asarray(reference)), initial=0.0))
    if ref_peak == 0.0:
        return 0.0 if diff == 0.0 else float("inf")
    return diff / ref_peak


def relative_l2(candidate: np.ndarray, reference: np.ndarray) -> float:
    ref_norm = float(np.linalg.norm(np.asarray(reference).ravel()))
    diff = float(np.linalg.norm((np.asarray(candidate) - np.asarray(reference)).ravel()))
    if ref_norm == 0.0:
        return 0.0 if diff == 0.0 else float("inf")
    return diff / ref_norm


def compare_fields(
    candidate: ConcentrationField,
    reference: ConcentrationField,
    interior_margin_um: float = 0.0,
) -> dict[str, float]:
    """Relative error norms over nodes at least ``interior_margin_um`` from the walls."""
    if not candidate.grids_match(reference):
        raise GridError("compare_fields requires identical grids and times")
    masks = []
    for coords in candidate.axes:
        lo, hi = coords[0], coords[-1]
        masks.append((coords >= lo + interior_margin_um) & (coords <= hi - interior_margin_um))
    mx, my, mz = masks
    if not (mx.any() and my.any() and mz.any()):
        raise GridError("interior margin leaves no nodes to compare")
    sel = np.ix_(np.arange(candidate.times_s.size), np.where(mx)[0], np.where(my)[0], np.where(mz)[0])
    a = candidate.values_um[sel]
    b = reference.values_um[sel]
    return {"rel_linf": relative_linf(a, b), "rel_l2": relative_l2(a, b)}


@dataclass
class RunReport:
    """What a scenario run produced, plus cross-solver diagnostics."""

    version: str
    config_hash: str
    output_dir: str
    timings_s: dict[str, float] = dataclass_field(default_factory=dict)
    release: dict = dataclass_field(default_factory=dict)
    channel: dict = dataclass_field(default_factory=dict)
    error_norms: dict | None = None
    artifacts: dict[str, str] = dataclass_field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "version": self.version,
            "config_hash": self.config_hash,
            "output_dir": self.output_dir,
            "timings_s": self.timings_s,
            "release": self.release,
            "channel": self.channel,
            "error_norms": self.error_norms,
            "artifacts": self.artifacts,
        }
        return json.dumps(payload, indent=2, sort_keys=True, default=float)


def _build_drive(cfg: ScenarioConfig) -> CalciumDrive:
    if cfg.drive_source == "synthetic":
        # Two extra samples so the channel horizon (inclusive) is covered.
        return synth_calcium_drive(
            heart_rate_bpm=cfg.heart_rate_bpm,
            pulse_amplitude_um_per_s=cfg.pulse_amplitude_um_per_s,
            pulse_duration_s=cfg.pulse_duration_s,
            horizon_s=cfg.horizon_s + 2.0 * cfg.release_dt_s,
            dt_s=cfg.release_dt_s,
        )
    drive = drive_from_csv(cfg.drive_source)
    if drive.times[-1] < cfg.horizon_s:
        raise ConfigError(
            f"release.drive: file covers only {drive.times[-1]}s of the "
            f"{cfg.horizon_s}s channel horizon"
        )
    if abs(drive.dt - cfg.release_dt_s) > 1e-9 * cfg.release_dt_s:
        raise ConfigError(
            f"release.drive: file is sampled every {drive.dt}s but release.dt_s "
            f"is {cfg.release_dt_s}; they must match"
        )
    return drive


def run_scenario(cfg: ScenarioConfig, output_root=None) -> RunReport:
    """Execute the full pipeline and write artifacts; deterministic per seed."""
    root = output_root or os.environ.get(OUTPUT_ROOT_ENV)
    outdir = Path(root) / cfg.output_dir if root else Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    report = RunReport(
        version=__version__,
        config_hash=config_hash(cfg),
        output_dir=str(outdir),
    )

    def artifact(name: str, filename: str) -> Path:
        path = outdir / filename
        report.artifacts[name] = str(path)
        return path

    # --- release stage -----------------------------------------------------
    t0 = time.perf_counter()
    drive = _build_drive(cfg)
    gamma = release_rate(drive, cfg.exocytosis) * cfg.gamma_scale
    mvb_conc = mvb_mean_concentration(cfg.mvb)
    profile = ReleaseProfile(times=drive.times, gamma=gamma, mvb_concentration_um=mvb_conc)
    rates = event_rate(profile)
    if abs(cfg.event_dt_s - cfg.release_dt_s) <= 1e-12:
        event_times = drive.times
        event_rates = rates
    else:
        event_times = np.arange(0.0, drive.times[-1], cfg.event_dt_s)
        event_rates = np.interp(event_times, drive.times, rates)
    events = sample_events(event_rates, cfg.event_dt_s, cfg.seed, start_times=event_times)

    drive_to_csv(drive, artifact("drive", "drive.csv"))
    np.savetxt(
        artifact("gamma", "gamma.csv"),
        np.column_stack([profile.times, profile.gamma]),
        delimiter=",",
        header="t,gamma",
        comments="",
        fmt="%.17g",
    )
    events_to_csv(events, artifact("events", "events.csv"))
    report.release = {
        "mvb_concentration_um": mvb_conc,
        "gamma_peak_um_per_s": float(profile.gamma.max()),
        "total_events": int(events.counts.sum()),
    }
    report.timings_s["release"] = time.perf_counter() - t0

    # --- channel stage ------------------------------------------------------
    nt = int(round(cfg.horizon_s / cfg.release_dt_s)) + 1
    channel_times = cfg.release_dt_s * np.arange(nt)
    probes = list(cfg.probes_um)
    cell_probe_index = None
    if cfg.receiver_enabled:
        cell_probe_index = len(probes)
        probes.append(cfg.cell_um)

    grid_result = None
    analytic_probe_series = None
    if cfg.solver in ("grid", "both"):
        t0 = time.perf_counter()
        sub_profile = ReleaseProfile(
            times=channel_times, gamma=profile.gamma[:nt], mvb_concentration_um=mvb_conc
        )
        grid_result = grid_run(
            cfg.channel,
            cfg.box_grid,
            sub_profile,
            probes=probes,
            snapshot_times=cfg.snapshot_times_s,
            scheme=cfg.grid_scheme,
        )
        if cfg.snapshot_times_s:
            write_field(grid_result.snapshots, artifact("field_grid", "field_grid.evf"))
        probe_to_csv(
            probes,
            grid_result.times_s,
            grid_result.probe_series,
            artifact("probes_grid", "probes_grid.csv"),
        )
        diagnostics_to_csv(
            grid_result.times_s,
            grid_result.diagnostics["mass_um_um3"],
            grid_result.diagnostics["min_value_um"],
            grid_result.diagnostics["stability_margin"],
            0,
            artifact("diagnostics_grid", "diagnostics_grid.csv"),
        )
        report.channel["grid"] = {
            "dt_pde_s": grid_result.diagnostics["dt_pde_s"],
            "stability_margin": grid_result.diagnostics["stability_margin"],
            "final_mass_um_um3": float(grid_result.diagnostics["mass_um_um3"][-1]),
            "min_value_um": float(grid_result.diagnostics["min_value_um"].min()),
        }
        report.timings_s["channel_grid"] = time.perf_counter() - t0

    sgrid = None
    analytic_snapshots_box = None
    if cfg.solver in ("analytic", "both"):
        t0 = time.perf_counter()
        sgrid = SpectralGrid.for_params(
            cfg.channel,
            horizon_s=cfg.horizon_s,
            dt_s=cfg.release_dt_s,
            points=cfg.spectral_points,
            align_um=cfg.spectral_align_um,
        )
        analytic_probe_series = analytic_probe(cfg.channel, sgrid, profile, probes)
        probe_to_csv(
            probes,
            channel_times,
            analytic_probe_series,
            artifact("probes_analytic", "probes_analytic.csv"),
        )
        meta = {}
        if cfg.snapshot_times_s:
            snap = analytic_field(cfg.channel, sgrid, profile, times=cfg.snapshot_times_s)
            write_field(snap, artifact("field_analytic", "field_analytic.evf"))
            meta = snap.metadata
            if cfg.solver == "both":
                analytic_snapshots_box = analytic_field(
                    cfg.channel,
                    sgrid,
                    profile,
                    times=cfg.snapshot_times_s,
                    axes=tuple(cfg.box_grid.axis_coords(a) for a in range(3)),
                )
                # Same grid as field_grid.evf, so the two files feed `compare`.
                write_field(
                    analytic_snapshots_box,
                    artifact("field_analytic_on_grid", "field_analytic_on_grid.evf"),
                )
        report.channel["analytic"] = {
            "spectral_points": list(sgrid.points),
            "spacing_um": [sgrid.spacing(a) for a in range(3)],
            "ringing_clamped": int(meta.get("ringing_clamped", 0)),
        }
        report.timings_s["channel_analytic"] = time.perf_counter() - t0

    if cfg.solver == "both":
        t0 = time.perf_counter()
        norms = {
            "probe_rel_linf": relative_linf(analytic_probe_series, grid_result.probe_series),
            "probe_rel_l2": relative_l2(analytic_probe_series, grid_result.probe_series),
        }
        if cfg.snapshot_times_s:
            field_norms = compare_fields(
                analytic_snapshots_box, grid_result.snapshots, interior_margin_um=10.0
            )
            norms["field_rel_linf"] = field_norms["rel_linf"]
            norms["field_rel_l2"] = field_norms["rel_l2"]
        report.error_norms = norms
        report.timings_s["compare"] = time.perf_counter() - t0

    # --- receiver stage -----------------------------------------------------
    if cfg.receiver_enabled:
        t0 = time.perf_counter()
        if analytic_probe_series is not None:
            cell_series = analytic_probe_series[cell_probe_index]
        else:
            cell_series = grid_result.probe_series[cell_probe_index]
        horizon = cfg.receiver_horizon_s or cfg.horizon_s
        trajectory = integrate(
            cfg.lr,
            cfg.cm,
            channel_times,
            cell_series,
            t_span=(0.0, horizon),
            dt_ode_s=cfg.receiver_dt_ode_s,
        )
        trajectory_to_csv(trajectory, artifact("receiver", "receiver.csv"))
        report.timings_s["receiver"] = time.perf_counter() - t0

    (outdir / "config.resolved").write_text(serialize_config(cfg), encoding="utf-8")
    report.artifacts["config"] = str(outdir / "config.resolved")
    report_path = outdir / "report.json"
    report_path.write_text(report.to_json() + "\n", encoding="utf-8")
    report.artifacts["report"] = str(report_path)
    return report
