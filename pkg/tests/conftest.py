import numpy as np
import pytest

from evsim.release import (
    ExocytosisParams,
    MvbParams,
    ReleaseProfile,
    mvb_mean_concentration,
    release_rate,
    synth_calcium_drive,
)
from evsim.transport import ChannelParams


@pytest.fixture(scope="session")
def scenario_b_params() -> ChannelParams:
    return ChannelParams(
        velocity_um_s=(5.0, -5.0, 5.0),
        binding_rate_per_s=0.5,
        tortuosity=(1.1, 1.1, 1.1),
    )


def make_profile(horizon_s: float, dt_s: float = 0.005, scale: float = 1.0) -> ReleaseProfile:
    """Pulse-train release profile covering horizon_s inclusive (plus slack)."""
    drive = synth_calcium_drive(120.0, 25.0, 0.15, horizon_s + 2.0 * dt_s, dt_s)
    gamma = release_rate(drive, ExocytosisParams()) * scale
    return ReleaseProfile(
        times=drive.times,
        gamma=gamma,
        mvb_concentration_um=mvb_mean_concentration(MvbParams()),
    )


def impulse_profile(horizon_s: float, dt_s: float, amplitude: float = 1.0, index: int = 1) -> ReleaseProfile:
    """Single nonzero release sample, for impulse-response oracles."""
    nt = int(round(horizon_s / dt_s)) + 3
    times = dt_s * np.arange(nt)
    gamma = np.zeros(nt)
    gamma[index] = amplitude
    return ReleaseProfile(times=times, gamma=gamma, mvb_concentration_um=0.6)
