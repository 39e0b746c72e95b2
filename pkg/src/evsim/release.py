"""Calcium-modulated vesicle release.

Two exocytosis microdomains contribute to the cumulative release rate: a
submembrane pool responding to local calcium, and a channel-gated pool whose
open/closed contributions are blended by a gating signal in [0, 1]. Each
contribution is a saturating Hill response, so the raw cumulative rate is
bounded by 2. Release events are drawn from a Poisson process whose rate is
the release rate divided by the mean vesicle concentration of one carrier
body.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .units import AVOGADRO

__all__ = [
    "ExocytosisParams",
    "CalciumDrive",
    "MvbParams",
    "ReleaseProfile",
    "ReleaseEventSeries",
    "hill",
    "release_rate",
    "mvb_mean_concentration",
    "event_rate",
    "sample_events",
    "synth_calcium_drive",
    "drive_to_csv",
    "drive_from_csv",
    "events_to_csv",
]

# Rejection sampling takes over from inversion at this Poisson mean.
_PTRS_THRESHOLD = 10.0

DRIVE_CSV_HEADER = "t,ca_sub,ca_open,ca_close,gate"
EVENTS_CSV_HEADER = "t,count"


@dataclass(frozen=True)
class ExocytosisParams:
    """Hill-kinetics constants for the two release microdomains.

    Exponents are dimensionless, half-saturations in uM. Defaults are
    artifact choices tuned so synthetic drives produce pulse-shaped rates;
    they are not sourced measurements.
    """

    sub_exponent: float = 4.0
    sub_half_sat_um: float = 1.0
    ltcc_exponent: float = 4.0
    ltcc_half_sat_um: float = 10.0

    def __post_init__(self) -> None:
        for name in ("sub_exponent", "sub_half_sat_um", "ltcc_exponent", "ltcc_half_sat_um"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"ExocytosisParams.{name} must be > 0")


@dataclass
class CalciumDrive:
    """Time-sampled calcium inputs driving the release-rate equations.

    ``gate`` is the combined channel-gating signal in [0, 1]; only its value
    enters the rate blend, so upstream gating dynamics stay out of scope.
    """

    times: np.ndarray  # s, uniform spacing, strictly increasing
    ca_sub: np.ndarray  # uM
    ca_open: np.ndarray  # uM
    ca_close: np.ndarray  # uM
    gate: np.ndarray  # dimensionless in [0, 1]

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        for name in ("ca_sub", "ca_open", "ca_close", "gate"):
            arr = np.asarray(getattr(self, name), dtype=float)
            setattr(self, name, arr)
            if arr.shape != self.times.shape:
                raise ValueError(f"CalciumDrive.{name} length {arr.size} != times length {self.times.size}")
        if self.times.size < 2:
            raise ValueError("CalciumDrive needs at least two samples")
        steps = np.diff(self.times)
        if not np.all(steps > 0):
            raise ValueError("CalciumDrive.times must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError("CalciumDrive.times must be uniformly spaced")
        for name in ("ca_sub", "ca_open", "ca_close"):
            if np.any(getattr(self, name) < 0):
                raise ValueError(f"CalciumDrive.{name} must be nonnegative")
        if np.any(self.gate < 0) or np.any(self.gate > 1):
            raise ValueError("CalciumDrive.gate must lie in [0, 1]")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class MvbParams:
    """Mean vesicle load and diameter of one carrier body (diameter in meters)."""

    mean_ev_count: float = 24.0
    diameter_m: float = 500e-9

    def __post_init__(self) -> None:
        if not self.mean_ev_count > 0:
            raise ValueError("MvbParams.mean_ev_count must be > 0")
        if not self.diameter_m > 0:
            raise ValueError("MvbParams.diameter_m must be > 0")


@dataclass
class ReleaseProfile:
    """Cumulative release-rate series (uM/s) plus the carrier concentration (uM)."""

    times: np.ndarray
    gamma: np.ndarray
    mvb_concentration_um: float

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        if self.gamma.shape != self.times.shape:
            raise ValueError("ReleaseProfile gamma/times length mismatch")
        if self.times.size < 2:
            raise ValueError("ReleaseProfile needs at least two samples")
        steps = np.diff(self.times)
        if not np.all(steps > 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError("ReleaseProfile.times must be uniform (solvers convolve on it)")
        if np.any(self.gamma < 0):
            raise ValueError("ReleaseProfile.gamma must be nonnegative")
        if not self.mvb_concentration_um > 0:
            raise ValueError("ReleaseProfile.mvb_concentration_um must be > 0")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass
class ReleaseEventSeries:
    """Per-interval release-event counts, reproducible from ``rng_seed``."""

    interval_start_times: np.ndarray
    counts: np.ndarray
    dt: float
    rng_seed: int

    def __post_init__(self) -> None:
        self.interval_start_times = np.asarray(self.interval_start_times, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != self.interval_start_times.shape:
            raise ValueError("ReleaseEventSeries counts/times length mismatch")
        if np.any(self.counts < 0):
            raise ValueError("ReleaseEventSeries.counts must be nonnegative")
        if not self.dt > 0:
            raise ValueError("ReleaseEventSeries.dt must be > 0")


def hill(conc_um, exponent: float, half_sat_um: float):
    """Saturating Hill response c^l / (c^l + m^l), in [0, 1].

    Evaluated through the ratio (c/m)^l so that simultaneous scaling of c and
    m cancels exactly and large concentrations cannot overflow.
    """
    if not exponent > 0:
        raise ValueError("hill exponent must be > 0")
    if not half_sat_um > 0:
        raise ValueError("hill half-saturation must be > 0")
    c = np.asarray(conc_um, dtype=float)
    if np.any(c < 0):
        raise ValueError("hill concentration must be nonnegative")
    with np.errstate(over="ignore"):  # huge c/m saturates cleanly to 1
        ratio = c / half_sat_um
        out = np.empty_like(ratio)
        low = ratio <= 1.0
        x = ratio[low] ** exponent
        out[low] = x / (1.0 + x)
        inv = (1.0 / ratio[~low]) ** exponent
        out[~low] = 1.0 / (1.0 + inv)
    if np.isscalar(conc_um) or np.ndim(conc_um) == 0:
        return float(out)
    return out


def release_rate(drive: CalciumDrive, params: ExocytosisParams) -> np.ndarray:
    """Cumulative release-rate series from a calcium drive.

    Per sample: submembrane Hill term plus the gate-blended open/closed
    channel-microdomain Hill terms. Bounded by 2 since each term is in [0, 1]
    and the gated pair is a convex combination.
    """
    sub = hill(drive.ca_sub, params.sub_exponent, params.sub_half_sat_um)
    open_ = hill(drive.ca_open, params.ltcc_exponent, params.ltcc_half_sat_um)
    closed = hill(drive.ca_close, params.ltcc_exponent, params.ltcc_half_sat_um)
    return sub + drive.gate * open_ + (1.0 - drive.gate) * closed


def mvb_mean_concentration(params: MvbParams) -> float:
    """Mean vesicle concentration inside one spherical carrier body, in uM.

    Molar concentration rule: 6 N / (pi N_A d^3) with the diameter cubed in
    liters (decimeters cubed), then scaled to uM.
    """
    d_dm = params.diameter_m * 10.0
    mol_per_liter = 6.0 * params.mean_ev_count / (math.pi * AVOGADRO * d_dm**3)
    return mol_per_liter * 1e6


def event_rate(profile: ReleaseProfile) -> np.ndarray:
    """Poisson event-rate series (1/s): release rate over carrier concentration."""
    return profile.gamma / profile.mvb_concentration_um


def _philox(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, stream]))


def _poisson_ptrs(rng: np.random.Generator, mean: float) -> int:
    # Transformed rejection with squeeze (Hormann), valid for mean >= 10.
    slam = math.sqrt(mean)
    loglam = math.log(mean)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = rng.random() - 0.5
        v = rng.random()
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + mean + 0.43)
        if us >= 0.07 and v <= vr:
            return int(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)
                <= k * loglam - mean - math.lgamma(k + 1.0)):
            return int(k)


def sample_events(
    rates_per_s,
    dt: float,
    seed: int,
    *,
    start_times=None,
) -> ReleaseEventSeries:
    """Draw per-interval Poisson event counts with mean rate*dt.

    Reproducibility contract: counts are a pure function of (seed, interval
    index). The counter-based Philox generator keyed by (seed, 0) supplies one
    uniform per interval, consumed by sequential-search inversion for means
    below 10; intervals with larger means use a dedicated Philox substream
    keyed by (seed, 1 + index) for the rejection loop, so any interval can be
    resampled independently and in parallel.
    """
    if not dt > 0:
        raise ValueError("sample_events dt must be > 0")
    if seed < 0:
        raise ValueError("sample_events seed must be nonnegative")
    rates = np.asarray(rates_per_s, dtype=float)
    if np.any(rates < 0):
        raise ValueError("sample_events rates must be nonnegative")
    means = rates * dt
    n = means.size
    counts = np.zeros(n, dtype=np.int64)

    base = _philox(seed, 0)
    u = base.random(n)

    small = means < _PTRS_THRESHOLD
    if np.any(small):
        lam = means[small]
        us = u[small]
        k = np.zeros(lam.size, dtype=np.int64)
        p = np.exp(-lam)
        cdf = p.copy()
        active = us > cdf
        while np.any(active):
            k[active] += 1
            p[active] *= lam[active] / k[active]
            cdf[active] += p[active]
            active &= us > cdf
        counts[small] = k

    for idx in np.flatnonzero(~small):
        counts[idx] = _poisson_ptrs(_philox(seed, 1 + int(idx)), float(means[idx]))

    if start_times is None:
        start_times = np.arange(n, dtype=float) * dt
    return ReleaseEventSeries(
        interval_start_times=start_times, counts=counts, dt=float(dt), rng_seed=int(seed)
    )


def synth_calcium_drive(
    heart_rate_bpm: float,
    pulse_amplitude_um_per_s: float,
    pulse_duration_s: float,
    horizon_s: float,
    dt_s: float,
) -> CalciumDrive:
    """Deterministic pulse-train calcium drive at beat frequency.

    Stand-in for a measured/simulated calcium trace: one raised-sine bump per
    beat onset, with the channel-microdomain trace scaled to the accumulated
    influx (amplitude * duration, uM), the submembrane trace at 35% of that
    and the closed-channel residue at 2%. The gate follows the same bump and
    is zero when the control amplitude is zero (no depolarization).
    Overlapping bumps (duration > beat period) add; the gate is clipped to 1.
    """
    for name, value in (
        ("heart_rate_bpm", heart_rate_bpm),
        ("pulse_amplitude_um_per_s", pulse_amplitude_um_per_s),
        ("pulse_duration_s", pulse_duration_s),
        ("horizon_s", horizon_s),
        ("dt_s", dt_s),
    ):
        if name == "pulse_amplitude_um_per_s":
            if value < 0:
                raise ValueError(f"synth_calcium_drive {name} must be >= 0")
        elif not value > 0:
            raise ValueError(f"synth_calcium_drive {name} must be > 0")
    period = 60.0 / heart_rate_bpm
    if dt_s >= period:
        raise ValueError(f"dt_s={dt_s} must be smaller than the beat period {period}")

    times = np.arange(0.0, horizon_s, dt_s)
    shape = np.zeros_like(times)
    n_beats = int(math.ceil(horizon_s / period))
    for k in range(n_beats):
        phase = (times - k * period) / pulse_duration_s
        inside = (phase >= 0.0) & (phase < 1.0)
        shape[inside] += np.sin(np.pi * phase[inside]) ** 2

    peak_um = pulse_amplitude_um_per_s * pulse_duration_s
    gate = np.clip(shape, 0.0, 1.0) if pulse_amplitude_um_per_s > 0 else np.zeros_like(shape)
    return CalciumDrive(
        times=times,
        ca_sub=0.35 * peak_um * shape,
        ca_open=peak_um * shape,
        ca_close=0.02 * peak_um * shape,
        gate=gate,
    )


def drive_to_csv(drive: CalciumDrive, path) -> None:
    """Write a drive as CSV with header ``t,ca_sub,ca_open,ca_close,gate`` (s, uM)."""
    data = np.column_stack([drive.times, drive.ca_sub, drive.ca_open, drive.ca_close, drive.gate])
    np.savetxt(path, data, delimiter=",", header=DRIVE_CSV_HEADER, comments="", fmt="%.17g")


def drive_from_csv(path) -> CalciumDrive:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
    if header != DRIVE_CSV_HEADER:
        raise ValueError(f"drive CSV header must be {DRIVE_CSV_HEADER!r}, got {header!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return CalciumDrive(
        times=data[:, 0], ca_sub=data[:, 1], ca_open=data[:, 2], ca_close=data[:, 3], gate=data[:, 4]
    )


def events_to_csv(series: ReleaseEventSeries, path) -> None:
    """Write event counts as CSV with header ``t,count``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(EVENTS_CSV_HEADER + "\n")
        for t, c in zip(series.interval_start_times, series.counts):
            fh.write(f"{t:.17g},{int(c)}\n")
