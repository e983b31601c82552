import math

import numpy as np
import pytest

from fxtsp import gradflow as gf
from fxtsp import highorder as ho
from fxtsp import sim
from fxtsp.errors import CapabilityError, DivergenceError, IntegrationError, InvalidParameterError
from fxtsp.model import SystemModel, decay_model


def _synthetic(times, norms):
    times = np.asarray(times, dtype=float)
    states = np.zeros((len(times), 2))
    states[:, 0] = norms
    z = np.zeros(len(times))
    return sim.Trajectory(times, states, 1, z, z, z, None, 0, len(times), 1.0)


def test_exponential_decay_matches_closed_form():
    cfg = sim.IntegratorConfig(rel_tol=1e-8, t_max=10.0, settle_radius=1e-300)
    traj = sim.integrate(decay_model(1.0, 1.0), 1.0, [1.0], [1.0], cfg)
    assert traj.times[-1] == pytest.approx(10.0)
    exact = np.exp(-traj.times)
    assert np.max(np.abs(traj.x[:, 0] - exact)) <= 10 * cfg.rel_tol
    assert np.max(np.abs(traj.z[:, 0] - exact)) <= 10 * cfg.rel_tol


def test_settling_time_synthetic_cases():
    t = np.linspace(0, 3, 31)
    assert sim.settling_time(_synthetic(t, np.zeros(31)), 1e-6, 1.0) == 0.0
    # Inside, briefly out at t = 1, back in from t = 1.1.
    norms = np.zeros(31)
    norms[10] = 1.0
    assert sim.settling_time(_synthetic(t, norms), 1e-6, 1.0) == pytest.approx(1.1)
    # Never stays inside long enough.
    assert sim.settling_time(_synthetic(t, np.where(t < 2.5, 1.0, 0.0)), 1e-6, 1.0) is None
    t = np.linspace(0, 10, 100_001)
    assert sim.settling_time(_synthetic(t, np.exp(-t)), math.exp(-5), 1.0) == pytest.approx(5.0, abs=1e-4)
    with pytest.raises(InvalidParameterError):
        sim.settling_time(_synthetic([], []), 1.0, 1.0)


def test_integrator_settle_time_agrees_with_recomputed_value():
    cfg = sim.IntegratorConfig(t_max=20.0, settle_radius=1e-3)
    traj = sim.integrate(decay_model(1.0, 5.0), 0.1, [1.0], [0.0], cfg)
    assert traj.settle_time == pytest.approx(sim.settling_time(traj, 1e-3, 1.0))
    # Entry is detected at the first accepted step inside, so it lags by at most one step.
    assert 0 <= traj.settle_time - math.log(1e3) <= cfg.dt_max_per_eps * 0.1


def test_zero_initial_state_settles_immediately():
    model = gf.build_system(gf.GradFlowParams())
    traj = sim.integrate(model, 1e-3, np.zeros(2), np.zeros(2), sim.IntegratorConfig(t_max=3.0))
    assert traj.settle_time == 0.0
    assert np.all(traj.states == 0)


def test_step_size_is_capped_by_eps():
    eps = 1e-2
    cfg = sim.IntegratorConfig(t_max=5.0, settle_radius=1e-300)
    traj = sim.integrate(decay_model(0.1, 0.1), eps, [1.0], [1.0], cfg)
    assert np.max(np.diff(traj.times)) <= cfg.dt_max_per_eps * eps * (1 + 1e-12)


def test_integration_is_bit_identical_across_runs():
    model = ho.build_system(ho.HighOrderParams())
    cfg = sim.IntegratorConfig(t_max=1.0)
    a = sim.integrate(model, 1e-3, [1.0, -0.5], [2.0], cfg)
    b = sim.integrate(model, 1e-3, [1.0, -0.5], [2.0], cfg)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.states, b.states)


def test_gradflow_fast_state_tracks_slow_manifold():
    eps = 1e-3
    model = gf.build_system(gf.GradFlowParams())
    traj = sim.integrate(model, eps, [1.0, 1.0], [0.0, 0.0], sim.IntegratorConfig(t_max=3.0))
    late = traj.times >= 20 * eps * abs(math.log(eps))
    assert late.sum() > 100
    gap = np.linalg.norm(traj.z[late] - model.h(traj.x[late]), axis=1)
    assert np.all(gap <= 1e-2 * np.linalg.norm(traj.x[late], axis=1) + 1e-6)


def test_halving_tolerance_changes_settle_time_little():
    model = ho.build_system(ho.HighOrderParams())
    a = sim.integrate(model, 1e-3, [1.0, 1.0], [1.0], sim.IntegratorConfig(rel_tol=1e-6))
    b = sim.integrate(model, 1e-3, [1.0, 1.0], [1.0], sim.IntegratorConfig(rel_tol=5e-7))
    assert abs(a.settle_time - b.settle_time) <= 0.01 * b.settle_time


def test_divergence_is_reported():
    with pytest.raises(DivergenceError) as info:
        sim.integrate(decay_model(-50.0, 1.0), 1.0, [1.0], [0.0], sim.IntegratorConfig(t_max=50.0))
    assert info.value.t > 0


def test_step_budget_is_reported():
    with pytest.raises(IntegrationError):
        sim.integrate(decay_model(1.0, 1.0), 1e-3, [1.0], [1.0], sim.IntegratorConfig(max_steps=5))


def test_models_without_kernel_cannot_be_integrated():
    model = SystemModel(slow_dim=1, fast_dim=1, f=lambda x, z: -x, g=lambda x, z: -z,
                        h=lambda x: 0 * x, dh=lambda x: np.zeros(np.shape(x) + (1,)))
    with pytest.raises(CapabilityError):
        sim.integrate(model, 1.0, [1.0], [1.0])


def test_invalid_arguments():
    for bad in ({"rel_tol": 0.0}, {"t_max": math.inf}, {"dwell": 100.0}, {"max_steps": 0},
                {"dt_init": -1.0}, {"settle_radius": -1e-6}):
        with pytest.raises(InvalidParameterError):
            sim.IntegratorConfig(**bad)
    with pytest.raises(InvalidParameterError):
        sim.integrate(decay_model(), 0.0, [1.0], [1.0])
    with pytest.raises(InvalidParameterError):
        sim.sweep(decay_model(), 1.0, [10.0, 1.0])
    with pytest.raises(InvalidParameterError):
        sim.sweep(decay_model(), 1.0, [-1.0])


def test_sweep_rows_and_zero_magnitude():
    model = decay_model(1.0, 2.0)
    table = sim.sweep(model, 0.5, [0.0, 1.0, 10.0], directions=4,
                      cfg=sim.IntegratorConfig(t_max=30.0, settle_radius=1e-3))
    assert len(table["rows"]) == 12
    assert table["max_by_magnitude"][0.0] == 0.0
    # Linear decay is not fixed-time: settling keeps growing with magnitude.
    assert table["max_by_magnitude"][10.0] > table["max_by_magnitude"][1.0] + 2.0
    assert sim.sweep(model, 0.5, [1.0], 4, sim.IntegratorConfig(t_max=30.0, settle_radius=1e-3)) == \
        sim.sweep(model, 0.5, [1.0], 4, sim.IntegratorConfig(t_max=30.0, settle_radius=1e-3))


def test_sweep_records_per_cell_failures():
    table = sim.sweep(decay_model(), 1e-3, [1.0], 2, sim.IntegratorConfig(max_steps=3))
    assert all(r[2] is None and "budget" in r[3] for r in table["rows"])
    assert table["max_by_magnitude"][1.0] is None


def test_thread_count_from_environment(monkeypatch):
    monkeypatch.setenv(sim.THREADS_ENV, "3")
    assert sim._thread_count() == 3
    monkeypatch.setenv(sim.THREADS_ENV, "many")
    with pytest.raises(InvalidParameterError):
        sim._thread_count()


def test_threaded_sweep_matches_serial(monkeypatch):
    cfg = sim.IntegratorConfig(t_max=30.0, settle_radius=1e-3)
    serial = sim.sweep(decay_model(1.0, 2.0), 0.5, [1.0, 5.0], 3, cfg)
    monkeypatch.setenv(sim.THREADS_ENV, "2")
    assert sim.sweep(decay_model(1.0, 2.0), 0.5, [1.0, 5.0], 3, cfg) == serial


def test_boundary_layer_sweep_saturates_below_its_bound():
    params = ho.HighOrderParams()
    model = ho.boundary_layer_system(params)
    bound = ho.layer_settling_bound(params)
    assert bound == pytest.approx(1 / (2 ** 0.625 * 0.375) + 0.25)
    table = sim.sweep(model, 1.0, [1.0, 1e2, 1e4, 1e6], directions=4)
    maxima = [table["max_by_magnitude"][m] for m in (1.0, 1e2, 1e4, 1e6)]
    assert all(v is not None and v <= bound for v in maxima)
    assert maxima[-1] - maxima[-2] <= 1e-3 * maxima[-1]
    # The scalar layer law takes integral dy / (y^(1/4) + y^3) to fall from infinity to the ball.
    u = np.linspace(math.log(1e-6), math.log(1e8), 200_001)
    y = np.exp(u)
    integrand = y / (y ** 0.25 + y ** 3)
    travel = np.sum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(u))
    assert maxima[-1] <= travel * (1 + 1e-4)


def test_monitor_on_equilibrium_and_reference_run():
    params = ho.HighOrderParams()
    model = ho.build_system(params)
    rc, bc = ho.certificates(params)
    traj = sim.integrate(model, 1e-3, np.zeros(2), np.zeros(1), sim.IntegratorConfig(t_max=2.0))
    rep = sim.monitor_lyapunov(model, rc, bc, 0.5, 0.8, 1.2, 0.1, traj)
    assert rep["violations"] == 0 and rep["worst_increase"] == 0.0

    report = ho.reproduce_reference_example()
    assert report["settle_time"] is not None and report["settle_time"] < 10.0
    mono = report["monotonicity"]
    assert mono["samples"] > 1000 and mono["monotonicity_violations"] == 0


def test_monitor_flags_increases():
    params = ho.HighOrderParams()
    model = ho.build_system(params)
    rc, bc = ho.certificates(params)
    t = np.linspace(0, 1, 11)
    states = np.zeros((11, 3))
    states[:, 0] = np.where(t > 0.5, 2.0, 1.0)
    z = np.zeros(11)
    traj = sim.Trajectory(t, states, 2, z, z, z, None, 0, 11, 1e-3)
    assert sim.monitor_lyapunov(model, rc, bc, 0.5, 0.8, 1.2, 0.1, traj)["monotonicity_violations"] == 1
