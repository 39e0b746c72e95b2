"""Acceptance suite: every release-gate criterion at its stated tolerance.

Each test prints one PASS line with the measured numbers (run with -s or
-rA to see them); a failing criterion fails its test.
"""
import time

import numpy as np
import pytest

from conftest import impulse_profile, make_profile
from evsim.analytic import (
    SpectralGrid,
    green_1d,
    kernel_spectrum,
    probe as analytic_probe,
    source_spectrum,
)
from evsim.fdsolver import BoxGrid, PdeState, run as grid_run, source_profile, step, total_mass
from evsim.receiver import ClathrinParams, LigandReceptorParams, integrate
from evsim.release import (
    ExocytosisParams,
    MvbParams,
    ReleaseProfile,
    event_rate,
    mvb_mean_concentration,
    release_rate,
    sample_events,
    synth_calcium_drive,
)
from evsim.scenario import load_config_text, relative_linf
from evsim.transport import ChannelParams

PROBES = [(2.0, 0.0, 20.0), (6.0, 0.0, 20.0), (10.0, 0.0, 20.0)]
DT = 0.005


def scenario_params(binding_rate: float = 0.5, **overrides) -> ChannelParams:
    base = dict(
        velocity_um_s=(5.0, -5.0, 5.0),
        binding_rate_per_s=binding_rate,
        tortuosity=(1.1, 1.1, 1.1),
    )
    base.update(overrides)
    return ChannelParams(**base)


def channel_profile(horizon_s: float, dt_s: float = DT) -> ReleaseProfile:
    profile = make_profile(horizon_s, dt_s)
    nt = int(round(horizon_s / dt_s)) + 1
    return ReleaseProfile(
        times=profile.times[:nt],
        gamma=profile.gamma[:nt],
        mvb_concentration_um=profile.mvb_concentration_um,
    )


@pytest.fixture(scope="module")
def fig6_cell_series():
    """Long-horizon uptake preset: C at the cell from the analytic solver."""
    cfg = load_config_text("preset = fig6\n")
    drive = synth_calcium_drive(
        cfg.heart_rate_bpm,
        cfg.pulse_amplitude_um_per_s,
        cfg.pulse_duration_s,
        cfg.horizon_s + 2.0 * cfg.release_dt_s,
        cfg.release_dt_s,
    )
    gamma = release_rate(drive, cfg.exocytosis) * cfg.gamma_scale
    profile = ReleaseProfile(
        times=drive.times, gamma=gamma, mvb_concentration_um=mvb_mean_concentration(cfg.mvb)
    )
    grid = SpectralGrid.for_params(
        cfg.channel,
        cfg.horizon_s,
        cfg.release_dt_s,
        points=cfg.spectral_points,
        align_um=cfg.spectral_align_um,
    )
    series = analytic_probe(cfg.channel, grid, profile, [cfg.cell_um])[0]
    return cfg, grid.times, series


def test_criterion_1_analytic_grid_cross_validation():
    """Scenario-B probes: relative Linf <= 5% over [0, 3] s, runtime bounded."""
    start = time.perf_counter()
    params = scenario_params()
    profile = channel_profile(3.0)
    sgrid = SpectralGrid.for_params(params, 3.0, DT, points=(128, 128, 128), align_um=2.0)
    analytic_series = analytic_probe(params, sgrid, profile, PROBES)
    grid_result = grid_run(params, BoxGrid(spacing_um=1.0), profile, probes=PROBES)
    elapsed = time.perf_counter() - start

    errors = [
        relative_linf(analytic_series[i], grid_result.probe_series[i]) for i in range(len(PROBES))
    ]
    assert max(errors) <= 0.05
    assert elapsed < 300.0
    print(
        f"\nACCEPTANCE 1 PASS: analytic-grid rel Linf per probe "
        f"{[f'{e:.3%}' for e in errors]} (<=5%), runtime {elapsed:.1f}s (<=300s)"
    )


def test_criterion_2_degradation_ordering():
    """Probe concentrations strictly pointwise nonincreasing in the binding rate."""
    profile = channel_profile(3.0)
    rates = (0.2, 0.5, 0.8)

    def assert_ordered(series_by_rate, onset):
        for lo, hi in ((0.2, 0.5), (0.5, 0.8)):
            diff = series_by_rate[lo] - series_by_rate[hi]
            assert np.all(diff >= 0.0)  # exact, no tolerance
            for row in diff:
                # The very first samples after onset tie exactly: no decay has
                # acted on mass of age zero. Once separated, ordering must be
                # strict for the rest of the horizon.
                positive = np.flatnonzero(row > 0.0)
                assert positive.size > 0
                assert positive[0] <= onset + 3
                assert np.all(row[positive[0] :] > 0.0)

    onset = int(np.argmax(profile.gamma > 0))
    analytic = {}
    for k_e in rates:
        params = scenario_params(k_e)
        sgrid = SpectralGrid.for_params(params, 3.0, DT, points=(64, 64, 64), align_um=2.0)
        analytic[k_e] = analytic_probe(params, sgrid, profile, PROBES)
    assert_ordered(analytic, onset)

    grid = {}
    for k_e in rates:
        result = grid_run(scenario_params(k_e), BoxGrid(spacing_um=2.0), profile, probes=PROBES)
        grid[k_e] = result.probe_series
    assert_ordered(grid, onset)
    print("\nACCEPTANCE 2 PASS: probe series strictly ordered in k_e on both solvers")


def test_criterion_3_scenario_phenomenology():
    """Plume centroid drift and peak ordering across the three presets."""
    profile = channel_profile(3.0)
    box = BoxGrid()
    snaps = [0.75, 1.5, 2.25, 3.0]
    scenarios = {
        "A": ChannelParams(
            velocity_um_s=(5.0, 0.0, 0.0), binding_rate_per_s=0.2, tortuosity=(1.1, 1.4, 1.7)
        ),
        "B": scenario_params(),
        "C": ChannelParams(
            velocity_um_s=(0.0, 0.0, 0.0), binding_rate_per_s=0.8, tortuosity=(1.4, 1.4, 1.4)
        ),
    }
    axes = [box.axis_coords(a) for a in range(3)]
    h = box.spacing_um
    centroids = {}
    peaks = {}
    for name, params in scenarios.items():
        vals = grid_run(params, box, profile, snapshot_times=snaps).snapshots.values_um
        peaks[name] = float(vals.max())
        per_snap = []
        for field in vals:
            mass = field.sum()
            per_snap.append(
                tuple(float((field.sum(axis=tuple({0, 1, 2} - {a})) * axes[a]).sum() / mass) for a in range(3))
            )
        centroids[name] = per_snap

    cx = [c[0] for c in centroids["A"]]
    assert all(b > a for a, b in zip(cx, cx[1:])), "A centroid must drift in +x"
    assert all(abs(c[1] - 0.0) <= h and abs(c[2] - 20.0) <= h for c in centroids["A"])
    assert all(
        abs(c[0]) <= h and abs(c[1]) <= h and abs(c[2] - 20.0) <= h for c in centroids["C"]
    ), "C centroid must stay at the source"
    assert peaks["C"] < peaks["B"] < peaks["A"]
    print(
        f"\nACCEPTANCE 3 PASS: A centroid x {cx[0]:.2f}->{cx[-1]:.2f} um (+x only), "
        f"C stationary, peaks C {peaks['C']:.3g} < B {peaks['B']:.3g} < A {peaks['A']:.3g}"
    )


def test_criterion_4_conservation_after_shutoff():
    """Neumann cube, no drift, no sinks: mass drift < 0.1% over 1000 steps."""
    params = ChannelParams(
        velocity_um_s=(0.0, 0.0, 0.0),
        binding_rate_per_s=0.0,
        tortuosity=(1.1, 1.4, 1.7),
        half_life_s=None,
    )
    grid = BoxGrid(spacing_um=1.0)
    n = grid.npoints
    state = PdeState(values_um=np.zeros((n, n, n)), time_s=0.0)
    src = source_profile(params, grid)
    dt = 0.05
    for _ in range(20):
        state = step(state, params, grid, gamma_t=1.0, dt_s=dt, source=src)
    start_mass = total_mass(state, grid)
    worst = 0.0
    for _ in range(1000):
        state = step(state, params, grid, gamma_t=0.0, dt_s=dt, source=src)
        worst = max(worst, abs(total_mass(state, grid) - start_mass) / start_mass)
    assert worst < 1e-3
    print(f"\nACCEPTANCE 4 PASS: mass drift over 1000 sourceless steps {worst:.2e} (<1e-3)")


def test_criterion_5_poisson_release_statistics():
    """Sampler moments at mean 0.5 over 1e6 intervals; peaks track the rate."""
    n = 1_000_000
    lam = 0.5
    series = sample_events(np.full(n, lam / DT), DT, seed=20240501)
    mean = series.counts.mean()
    var = series.counts.var()
    mean_tol = 4.0 * np.sqrt(lam / n)
    var_tol = 4.0 * np.sqrt((lam + 2.0 * lam**2) / n)
    assert abs(mean - lam) < mean_tol
    assert abs(var - lam) < var_tol

    # single-beat drive; the max-count interval must sit within one pulse
    # width of the rate peak in at least 95 of 100 seeded runs
    pulse = 0.15
    drive = synth_calcium_drive(80.0, 25.0, pulse, 0.75, DT)
    gamma = release_rate(drive, ExocytosisParams())
    profile = ReleaseProfile(
        times=drive.times, gamma=gamma, mvb_concentration_um=mvb_mean_concentration(MvbParams())
    )
    rates = event_rate(profile)
    rates = rates * (12.0 / (rates.max() * DT))  # scale the peak to mean 12
    t_gamma_peak = drive.times[np.argmax(gamma)]
    hits = 0
    for seed in range(100):
        counts = sample_events(rates, DT, seed=seed).counts
        t_count_peak = drive.times[np.argmax(counts)]
        hits += abs(t_count_peak - t_gamma_peak) <= pulse
    assert hits >= 95
    print(
        f"\nACCEPTANCE 5 PASS: mean {mean:.5f} (|d|<{mean_tol:.1e}), "
        f"var {var:.5f} (|d|<{var_tol:.1e}), peak co-occurrence {hits}/100 (>=95)"
    )


def test_criterion_6_receiver_fixed_points_and_uptake(fig6_cell_series):
    """Constant-C steady states to 0.1%; long-horizon uptake phenomenology."""
    lr, cm = LigandReceptorParams(), ClathrinParams()
    c_um = 1e-3
    times = np.array([0.0, 5000.0])
    series = np.array([c_um, c_um])
    traj = integrate(lr, cm, times, series, (0.0, 5000.0), 0.5)

    c_molar = c_um * 1e-6
    eta_star = (
        lr.assoc_rate_per_molar_s
        * lr.binding_sites
        * c_molar
        / (lr.assoc_rate_per_molar_s * c_molar + lr.dissoc_rate_per_s + lr.internalization_rate_per_s)
    )
    eta_err = abs(traj.bound_count[-1] - eta_star) / eta_star
    assert eta_err < 1e-3

    a = cm.binding_rate_per_molar_s
    cap = cm.capacity_um(lr.cell_radius_um)
    cb_star = a * c_molar * cap / (a * c_molar + cm.internalization_rate_per_s)
    cb_err = abs(traj.clathrin_bound_um[-1] - cb_star) / cb_star
    assert cb_err < 1e-3

    cfg, c_times, c_series = fig6_cell_series
    uptake = integrate(cfg.lr, cfg.cm, c_times, c_series, (0.0, 5000.0), cfg.receiver_dt_ode_s)
    lr_internal_um = uptake.internalized_lr_um()
    assert lr_internal_um[-1] >= uptake.clathrin_internalized_um[-1]

    lr_crossed = uptake.internalized_count > uptake.bound_count
    cm_crossed = uptake.clathrin_internalized_um > uptake.clathrin_bound_um
    assert lr_crossed.any() and cm_crossed.any()
    t_lr = float(uptake.times_s[np.argmax(lr_crossed)])
    t_cm = float(uptake.times_s[np.argmax(cm_crossed)])
    assert 1e2 <= t_lr <= 1e3 and 1e2 <= t_cm <= 1e3
    print(
        f"\nACCEPTANCE 6 PASS: steady-state errors {eta_err:.2e}/{cb_err:.2e} (<1e-3); "
        f"internalized-over-bound crossings at {t_lr:.0f}s / {t_cm:.0f}s (1e2..1e3); "
        f"LR internalized {lr_internal_um[-1]:.3g} uM >= CM {uptake.clathrin_internalized_um[-1]:.3g} uM"
    )


def test_criterion_7_half_life_negligibility():
    """Half-life 2 min on vs off: probe series differ < 2% up to 3 s."""
    profile = channel_profile(3.0)
    box = BoxGrid(spacing_um=1.0)
    off = grid_run(scenario_params(half_life_s=None), box, profile, probes=PROBES)
    on = grid_run(scenario_params(half_life_s=120.0), box, profile, probes=PROBES)
    diffs = [
        relative_linf(on.probe_series[i], off.probe_series[i]) for i in range(len(PROBES))
    ]
    assert max(diffs) < 0.02
    print(f"\nACCEPTANCE 7 PASS: half-life on/off probe differences {[f'{d:.3%}' for d in diffs]} (<2%)")


def test_criterion_8_numerical_self_checks(fig6_cell_series):
    """Spectra vs quadrature 1e-6; RK4 Richardson 1e-4; spatial order >= 1.8."""
    # closed-form spectra against independent quadrature of the transforms
    worst_kernel = 0.0
    for beta, t, diff, vel in ((0.5, 1.0, 1.0, 2.0), (0.9, 2.0, 0.7, -1.0), (0.1, 3.0, 0.83, 5.0)):
        half = abs(vel) * t + 14.0 * np.sqrt(2.0 * diff * t) + 10.0
        nu = np.linspace(vel * t - half, vel * t + half, 60001)
        oracle = np.trapezoid(green_1d(nu, t, diff, vel) * np.exp(-1j * beta * nu), nu)
        worst_kernel = max(worst_kernel, abs(kernel_spectrum(beta, t, diff, vel) - oracle))
    worst_source = 0.0
    for beta, sigma, center in ((0.1, 7.0, 20.0), (0.4, 3.0, -5.0)):
        nu = np.linspace(center - 16 * sigma, center + 16 * sigma, 60001)
        oracle = np.trapezoid(
            np.exp(-((nu - center) ** 2) / (2 * sigma**2)) * np.exp(-1j * beta * nu), nu
        )
        worst_source = max(worst_source, abs(source_spectrum(beta, sigma, center) - oracle))
    assert worst_kernel < 1e-6 and worst_source < 1e-6

    # RK4 halving on the long-horizon uptake preset
    cfg, c_times, c_series = fig6_cell_series
    coarse = integrate(cfg.lr, cfg.cm, c_times, c_series, (0.0, 5000.0), cfg.receiver_dt_ode_s)
    fine = integrate(cfg.lr, cfg.cm, c_times, c_series, (0.0, 5000.0), cfg.receiver_dt_ode_s / 2.0)
    rk4_change = max(
        abs(coarse.bound_count[-1] - fine.bound_count[-1]) / abs(fine.bound_count[-1]),
        abs(coarse.internalized_count[-1] - fine.internalized_count[-1])
        / abs(fine.internalized_count[-1]),
        abs(coarse.clathrin_bound_um[-1] - fine.clathrin_bound_um[-1])
        / abs(fine.clathrin_bound_um[-1]),
    )
    assert rk4_change < 1e-4

    # observed spatial order on a smooth impulse response, measured over
    # interior nodes: the drift piles mass into a wall layer of width
    # diffusivity/velocity (under a micrometer), which the smoothness
    # assumption excludes
    params = ChannelParams(
        velocity_um_s=(2.0, 0.0, 0.0), binding_rate_per_s=0.0, tortuosity=(1.1, 1.4, 1.7)
    )
    dt = 0.004
    profile = impulse_profile(1.0, dt)
    fields = {}
    for h in (2.0, 1.0, 0.5):
        box = BoxGrid(spacing_um=h, dt_s=dt)
        result = grid_run(params, box, profile, snapshot_times=[1.0])
        stride = int(round(2.0 / h))
        fields[h] = result.snapshots.values_um[0][::stride, ::stride, ::stride]
    common = BoxGrid(spacing_um=2.0)
    margin = 4.0
    keep = []
    for a in range(3):
        coords = common.axis_coords(a)
        keep.append(np.where((coords >= coords[0] + margin) & (coords <= coords[-1] - margin))[0])
    interior = np.ix_(*keep)
    e_coarse = np.linalg.norm(fields[2.0][interior] - fields[1.0][interior])
    e_fine = np.linalg.norm(fields[1.0][interior] - fields[0.5][interior])
    order = np.log2(e_coarse / e_fine)
    assert order >= 1.8
    print(
        f"\nACCEPTANCE 8 PASS: spectra vs quadrature {max(worst_kernel, worst_source):.2e} (<1e-6), "
        f"RK4 Richardson {rk4_change:.2e} (<1e-4), spatial order {order:.2f} (>=1.8)"
    )
