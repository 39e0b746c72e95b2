"""End-to-end extracellular-vesicle delivery simulator.

Pipeline: calcium-gated release rates and Poisson release events ->
anisotropic advection-diffusion-degradation transport (closed-form spectral
solver cross-validated against a finite-difference Neumann-box solver) ->
receiver internalization ODEs. Internal units are micrometers, seconds and
micromolar throughout.

The transport solvers live in :mod:`evsim.analytic` (unbounded, spectral)
and :mod:`evsim.fdsolver` (Neumann cube, finite differences); their shared
types are re-exported here.
"""

__version__ = "0.1.0"

from .errors import ConfigError, GridError, InvariantError, StabilityError, UnitError
from .release import (
    CalciumDrive,
    ExocytosisParams,
    MvbParams,
    ReleaseEventSeries,
    ReleaseProfile,
    event_rate,
    hill,
    mvb_mean_concentration,
    release_rate,
    sample_events,
    synth_calcium_drive,
)
from .transport import ChannelParams, ConcentrationField
from .analytic import SpectralGrid, green_1d, kernel_spectrum, source_spectrum
from .fdsolver import BoxGrid, PdeState, stable_dt, total_mass
from .receiver import (
    ClathrinParams,
    LigandReceptorParams,
    ReceiverState,
    ReceiverTrajectory,
    cm_rhs,
    count_to_concentration,
    integrate,
    lr_rhs,
)
from .scenario import (
    RunReport,
    ScenarioConfig,
    compare_fields,
    load_config,
    load_config_text,
    run_scenario,
    serialize_config,
)
from .units import AVOGADRO, convert
