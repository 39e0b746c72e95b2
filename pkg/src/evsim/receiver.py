"""Vesicle internalization at a target cell.

Two uptake routes run side by side, both driven by the probed extracellular
concentration at the cell location. The ligand-receptor route tracks bound
and internalized vesicle counts against a fixed pool of binding sites; the
clathrin-mediated route tracks bound and internalized concentrations against
a pit capacity, with intracellular degradation. Counts convert to molar
concentration through the cell volume. Integration is fixed-step RK4 for
reproducibility; trajectories are smooth, so adaptivity buys nothing here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantError
from .units import AVOGADRO

__all__ = [
    "LigandReceptorParams",
    "ClathrinParams",
    "ReceiverState",
    "ReceiverTrajectory",
    "lr_rhs",
    "cm_rhs",
    "count_to_concentration",
    "integrate",
    "trajectory_to_csv",
]

RECEIVER_CSV_HEADER = "t,eta_b,eta_int,c_lr_b,c_lr_int,c_cm_b,c_cm_int"

_INVARIANT_SLACK = 1e-9


@dataclass(frozen=True)
class LigandReceptorParams:
    """Ligand-receptor binding constants.

    The association rate is per molar; the driving concentration arrives in
    uM and is converted exactly once, inside the rate function.
    """

    assoc_rate_per_molar_s: float = 1e4
    dissoc_rate_per_s: float = 1e-10
    internalization_rate_per_s: float = 0.0027
    binding_sites: int = 53_000
    cell_radius_um: float = 82.5

    def __post_init__(self) -> None:
        if self.assoc_rate_per_molar_s < 0 or self.dissoc_rate_per_s < 0:
            raise ValueError("LigandReceptorParams rates must be nonnegative")
        if self.internalization_rate_per_s < 0:
            raise ValueError("LigandReceptorParams rates must be nonnegative")
        if not (isinstance(self.binding_sites, int) and self.binding_sites > 0):
            raise ValueError("LigandReceptorParams.binding_sites must be a positive integer")
        if not self.cell_radius_um > 0:
            raise ValueError("LigandReceptorParams.cell_radius_um must be > 0")


@dataclass(frozen=True)
class ClathrinParams:
    """Clathrin-mediated endocytosis constants.

    The effective binding rate is ``max_binding_rate / pit_coat_capacity``
    (per molar per second, same unit bridging as the ligand-receptor route).
    ``capacity_as_counts`` keeps the bound-state capacity in raw counts
    instead of converting it to concentration via the cell volume; the
    conversion is the default because the bound state itself is tracked as a
    concentration.
    """

    max_binding_rate_per_molar_s: float = 6.64e-17
    pit_coat_capacity: int = 200
    pit_count: int = 180
    internalization_rate_per_s: float = 0.0027
    degradation_rate_per_s: float = 0.0002
    capacity_as_counts: bool = False

    def __post_init__(self) -> None:
        if self.max_binding_rate_per_molar_s < 0:
            raise ValueError("ClathrinParams.max_binding_rate_per_molar_s must be >= 0")
        if self.pit_coat_capacity <= 0 or self.pit_count <= 0:
            raise ValueError("ClathrinParams pit counts must be positive")
        if self.internalization_rate_per_s < 0 or self.degradation_rate_per_s < 0:
            raise ValueError("ClathrinParams rates must be nonnegative")

    @property
    def binding_rate_per_molar_s(self) -> float:
        return self.max_binding_rate_per_molar_s / self.pit_coat_capacity

    def capacity_um(self, cell_radius_um: float) -> float:
        """Bound-state capacity in the units the bound state is tracked in."""
        total = float(self.pit_coat_capacity * self.pit_count)
        if self.capacity_as_counts:
            return total
        return count_to_concentration(total, cell_radius_um)


@dataclass
class ReceiverState:
    """Joint state of both uptake routes at one instant."""

    bound_count: float = 0.0
    internalized_count: float = 0.0
    clathrin_bound_um: float = 0.0
    clathrin_internalized_um: float = 0.0
    time_s: float = 0.0

    def free_sites(self, params: LigandReceptorParams) -> float:
        return params.binding_sites - self.bound_count


def count_to_concentration(count: float, cell_radius_um: float) -> float:
    """Convert a vesicle count at a spherical cell to uM: 3 n / (4 pi N_A R^3)."""
    if count < 0:
        raise ValueError("count_to_concentration count must be >= 0")
    if not cell_radius_um > 0:
        raise ValueError("count_to_concentration cell_radius_um must be > 0")
    radius_dm = cell_radius_um * 1e-6 * 10.0
    mol_per_liter = 3.0 * count / (4.0 * math.pi * AVOGADRO * radius_dm**3)
    return mol_per_liter * 1e6


def lr_rhs(
    bound_count: float, params: LigandReceptorParams, conc_at_cell_um: float
) -> tuple[float, float]:
    """Time derivatives (bound, internalized) of the ligand-receptor route.

    Free sites are eliminated exactly as sites - bound. The uM -> M
    conversion of the driving concentration happens here and nowhere else.
    """
    if conc_at_cell_um < 0:
        raise ValueError("lr_rhs concentration must be >= 0")
    conc_molar = conc_at_cell_um * 1e-6
    free = params.binding_sites - bound_count
    d_bound = (
        params.assoc_rate_per_molar_s * free * conc_molar
        - (params.dissoc_rate_per_s + params.internalization_rate_per_s) * bound_count
    )
    d_internal = params.internalization_rate_per_s * bound_count
    return d_bound, d_internal


def cm_rhs(
    bound_um: float,
    internalized_um: float,
    params: ClathrinParams,
    conc_at_cell_um: float,
    cell_radius_um: float,
) -> tuple[float, float]:
    """Time derivatives (bound, internalized) of the clathrin route."""
    if conc_at_cell_um < 0:
        raise ValueError("cm_rhs concentration must be >= 0")
    conc_molar = conc_at_cell_um * 1e-6
    capacity = params.capacity_um(cell_radius_um)
    d_bound = (
        params.binding_rate_per_molar_s * conc_molar * (capacity - bound_um)
        - params.internalization_rate_per_s * bound_um
    )
    d_internal = (
        params.internalization_rate_per_s * bound_um
        - params.degradation_rate_per_s * internalized_um
    )
    return d_bound, d_internal


@dataclass
class ReceiverTrajectory:
    """Sampled trajectories of both routes, one row per output time."""

    times_s: np.ndarray
    bound_count: np.ndarray
    internalized_count: np.ndarray
    clathrin_bound_um: np.ndarray
    clathrin_internalized_um: np.ndarray
    cell_radius_um: float

    def bound_lr_um(self) -> np.ndarray:
        return np.array([count_to_concentration(v, self.cell_radius_um) for v in self.bound_count])

    def internalized_lr_um(self) -> np.ndarray:
        return np.array(
            [count_to_concentration(v, self.cell_radius_um) for v in self.internalized_count]
        )

    def state_at(self, index: int) -> ReceiverState:
        return ReceiverState(
            bound_count=float(self.bound_count[index]),
            internalized_count=float(self.internalized_count[index]),
            clathrin_bound_um=float(self.clathrin_bound_um[index]),
            clathrin_internalized_um=float(self.clathrin_internalized_um[index]),
            time_s=float(self.times_s[index]),
        )


def _check_invariants(
    y: np.ndarray, params_lr: LigandReceptorParams, capacity: float, t: float, dt: float
) -> None:
    chi = params_lr.binding_sites
    slack_counts = _INVARIANT_SLACK * chi
    slack_cap = _INVARIANT_SLACK * max(capacity, 1.0)
    ok = (
        -slack_counts <= y[0] <= chi + slack_counts
        and y[1] >= -slack_counts
        and -slack_cap <= y[2] <= capacity + slack_cap
        and y[3] >= -slack_cap
    )
    if not ok:
        raise InvariantError(
            f"receiver state left its admissible region at t={t:.6g}s "
            f"(bound={y[0]:.6g}, internalized={y[1]:.6g}, cm_bound={y[2]:.6g}, "
            f"cm_internalized={y[3]:.6g}); reduce dt_ode below {dt:.3g}s"
        )


def integrate(
    params_lr: LigandReceptorParams,
    params_cm: ClathrinParams,
    conc_times_s,
    conc_um,
    t_span: tuple[float, float],
    dt_ode_s: float,
    initial: ReceiverState | None = None,
) -> ReceiverTrajectory:
    """Fixed-step RK4 integration of both routes over ``t_span``.

    The driving concentration is linearly interpolated from the sampled
    series, which must cover the span. State invariants (bound counts within
    the site pool, capacities respected, nonnegativity) are enforced at every
    step; a breach raises InvariantError with step-size advice.
    """
    if not dt_ode_s > 0:
        raise ValueError("integrate dt_ode_s must be > 0")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("integrate t_span must be increasing")
    conc_times = np.asarray(conc_times_s, dtype=float)
    conc = np.asarray(conc_um, dtype=float)
    if conc_times.shape != conc.shape:
        raise ValueError("integrate concentration series length mismatch")
    if conc_times[0] > t0 + 1e-12 or conc_times[-1] < t1 - 1e-12:
        raise ValueError("integrate concentration series does not cover t_span")
    if np.any(conc < 0):
        raise ValueError("integrate concentration series must be nonnegative")

    nsteps = int(math.ceil((t1 - t0) / dt_ode_s - 1e-12))
    dt = (t1 - t0) / nsteps
    # One interpolation pass at all half-step nodes covers every RK4 stage.
    stage_times = t0 + 0.5 * dt * np.arange(2 * nsteps + 1)
    stage_conc = np.interp(stage_times, conc_times, conc)

    radius = params_lr.cell_radius_um
    capacity = params_cm.capacity_um(radius)
    if initial is None:
        initial = ReceiverState(time_s=t0)
    y = np.array(
        [
            initial.bound_count,
            initial.internalized_count,
            initial.clathrin_bound_um,
            initial.clathrin_internalized_um,
        ]
    )
    _check_invariants(y, params_lr, capacity, t0, dt)

    def rhs(state: np.ndarray, c_um: float) -> np.ndarray:
        db, di = lr_rhs(state[0], params_lr, c_um)
        dcb, dci = cm_rhs(state[2], state[3], params_cm, c_um, radius)
        return np.array([db, di, dcb, dci])

    out = np.empty((nsteps + 1, 4))
    out[0] = y
    for k in range(nsteps):
        c0 = stage_conc[2 * k]
        ch = stage_conc[2 * k + 1]
        c1 = stage_conc[2 * k + 2]
        k1 = rhs(y, c0)
        k2 = rhs(y + 0.5 * dt * k1, ch)
        k3 = rhs(y + 0.5 * dt * k2, ch)
        k4 = rhs(y + dt * k3, c1)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_invariants(y, params_lr, capacity, t0 + (k + 1) * dt, dt)
        out[k + 1] = y

    times = t0 + dt * np.arange(nsteps + 1)
    return ReceiverTrajectory(
        times_s=times,
        bound_count=out[:, 0],
        internalized_count=out[:, 1],
        clathrin_bound_um=out[:, 2],
        clathrin_internalized_um=out[:, 3],
        cell_radius_um=radius,
    )


def trajectory_to_csv(traj: ReceiverTrajectory, path) -> None:
    """Write the trajectory with header ``t,eta_b,eta_int,c_lr_b,c_lr_int,c_cm_b,c_cm_int``."""
    c_lr_b = traj.bound_lr_um()
    c_lr_int = traj.internalized_lr_um()
    data = np.column_stack(
        [
            traj.times_s,
            traj.bound_count,
            traj.internalized_count,
            c_lr_b,
            c_lr_int,
            traj.clathrin_bound_um,
            traj.clathrin_internalized_um,
        ]
    )
    np.savetxt(path, data, delimiter=",", header=RECEIVER_CSV_HEADER, comments="", fmt="%.17g")
