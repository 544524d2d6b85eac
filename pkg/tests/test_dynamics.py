import numpy as np
import pytest

from cqec.codes_and_maps import (
    SCENARIOS,
    ModelParams,
    pair_hamiltonian,
    scenario_rho0,
    total_generator,
    trivial_code,
)
from cqec.dynamics import (
    IntegratorConfig,
    Trajectory,
    integrate,
    jump_monte_carlo,
    propagate_linear,
    step_weak_map,
)
from cqec.analysis import fidelity_weight_series, fit_power_law, fit_quadratic
from cqec.closed_forms import (
    alpha_nonmarkov_1q,
    markov3q_exact_leak,
    zeno_coefficient,
)
from cqec import reduced_model


def _fidelity(traj, scenario):
    f, _ = fidelity_weight_series(traj, SCENARIOS[scenario].code())
    return f


def test_integrator_config_validation():
    IntegratorConfig()
    with pytest.raises(ValueError):
        IntegratorConfig(method="leapfrog")
    with pytest.raises(ValueError):
        IntegratorConfig(rtol=0.0)


def test_trajectory_requires_increasing_times():
    states = np.zeros((2, 2, 2), dtype=complex)
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), states)


# ---------------------------------------------------------------------------
# integrate
# ---------------------------------------------------------------------------


def test_markovian_point_value_both_methods():
    """lambda=1, kappa=2, t=1: fidelity = 0.75 + 0.25 e^-4, reproduced by
    the adaptive integrator and the independent fixed-step RK4."""
    gen = total_generator("markovian-1q", ModelParams(lam=1.0, kappa=2.0))
    rho0 = scenario_rho0("markovian-1q")
    expected = 0.75 + 0.25 * np.exp(-4.0)
    for method in ("adaptive-RK", "fixed-RK4"):
        traj = integrate(gen, rho0, 1.0, IntegratorConfig(method=method), n_samples=11)
        f = _fidelity(traj, "markovian-1q")
        assert f[-1] == pytest.approx(expected, abs=1e-8)


def test_spectral_matches_adaptive():
    gen = total_generator("markovian-1q", ModelParams(lam=1.0, kappa=2.0))
    rho0 = scenario_rho0("markovian-1q")
    t1 = integrate(gen, rho0, 2.0, IntegratorConfig(method="adaptive-RK"), n_samples=21)
    t2 = integrate(gen, rho0, 2.0, IntegratorConfig(method="spectral"), n_samples=21)
    assert np.max(np.abs(t1.states - t2.states)) < 1e-8


def test_uncorrected_pair_is_cosine_squared():
    gen = total_generator("hamiltonian-1q", ModelParams(gamma=1.0, kappa=0.0))
    traj = integrate(gen, scenario_rho0("hamiltonian-1q"), np.pi / 2, n_samples=51)
    f = _fidelity(traj, "hamiltonian-1q")
    assert np.max(np.abs(f - np.cos(traj.times) ** 2)) < 1e-9
    assert f[-1] == pytest.approx(0.0, abs=1e-9)


def test_zero_horizon_returns_initial_state():
    gen = total_generator("markovian-1q", ModelParams(lam=1.0))
    rho0 = scenario_rho0("markovian-1q")
    traj = integrate(gen, rho0, 0.0)
    assert len(traj) == 1
    assert np.array_equal(traj.states[0], rho0)


def test_trace_conserved_along_trajectories():
    for scenario, params in (
        ("markovian-3q", ModelParams(lam=1.0, kappa=5.0)),
        ("hamiltonian-1q", ModelParams(gamma=1.0, kappa=3.0)),
    ):
        gen = total_generator(scenario, params)
        traj = integrate(gen, scenario_rho0(scenario), 3.0, n_samples=31)
        traces = np.einsum("tii->t", traj.states)
        assert np.max(np.abs(traces - 1.0)) < 1e-8


def test_integrate_rejects_negative_horizon():
    gen = total_generator("markovian-1q", ModelParams(lam=1.0))
    with pytest.raises(ValueError):
        integrate(gen, scenario_rho0("markovian-1q"), -1.0)


# ---------------------------------------------------------------------------
# propagate_linear
# ---------------------------------------------------------------------------


def test_propagate_zero_matrix():
    x0 = np.array([1.0, 2.0, 3.0])
    xs = propagate_linear(np.zeros((3, 3)), x0, [0.0, 1.0, 10.0])
    assert np.allclose(xs, np.tile(x0, (3, 1)))


def test_propagate_reduced_slow_mode_value():
    """13-dim propagation at R=100 evaluated at gamma t = pi R^2 / 24."""
    m = reduced_model.build_reduced_matrix(100.0, 1.0)
    x0 = reduced_model.initial_reduced_state().coeffs
    t_star = np.pi * 100.0**2 / 24.0
    xs = propagate_linear(m, x0, [t_star])
    assert xs[0][0].real == pytest.approx(0.0859, abs=1e-3)
    assert xs[0][0].real == pytest.approx(0.08547354809622165, abs=1e-9)


def test_propagate_matches_markovian_leak():
    """Dense superoperator propagation reproduces the exact 4-level leak
    formula at r = 96."""
    from cqec.tensor_core import vectorize, devectorize

    gen = total_generator("markovian-3q", ModelParams(lam=1.0, kappa=96.0))
    xs = propagate_linear(gen.matrix, vectorize(scenario_rho0("markovian-3q")), [1.0])
    rho = devectorize(xs[0])
    code = SCENARIOS["markovian-3q"].code()
    p_cs = np.real(np.trace(code.code_projector() @ rho))
    assert 1.0 - p_cs == pytest.approx(markov3q_exact_leak(1.0, 1.0, 96.0), abs=1e-10)
    assert 1.0 - p_cs == pytest.approx(0.03, abs=1e-6)


def test_propagate_defective_matrix_falls_back():
    # Jordan block: eigenbasis is singular, expm fallback must kick in
    m = np.array([[0.0, 1.0], [0.0, 0.0]])
    xs = propagate_linear(m, np.array([0.0, 1.0]), [0.0, 2.0])
    assert np.allclose(xs[1], [2.0, 1.0])


# ---------------------------------------------------------------------------
# weak-map stepping
# ---------------------------------------------------------------------------


def test_weak_map_eps_zero_is_unitary():
    code = trivial_code()
    h = pair_hamiltonian(code, 1.0)
    rho0 = scenario_rho0("hamiltonian-1q")
    traj = step_weak_map(rho0, h, code, 0.0, 1e-2, 300, sample_stride=10)
    f, _ = fidelity_weight_series(traj, code)
    assert np.max(np.abs(f - np.cos(traj.times) ** 2)) < 1e-10


def test_weak_map_tracks_continuous_solution():
    """kappa = eps/tau_c = 5: discrete stepping within 5e-3 of the closed
    form over gamma t in [0, 10], halving tau_c halves the error."""
    code = trivial_code()
    h = pair_hamiltonian(code, 1.0)
    rho0 = scenario_rho0("hamiltonian-1q")
    devs = []
    for tau in (1e-3, 5e-4):
        n = int(round(10.0 / tau))
        traj = step_weak_map(rho0, h, code, 5.0 * tau, tau, n, sample_stride=n // 200)
        f, _ = fidelity_weight_series(traj, code)
        ref = alpha_nonmarkov_1q(traj.times, 1.0, 5.0)
        devs.append(np.max(np.abs(f - ref)))
    assert devs[0] < 5e-3
    assert 1.5 < devs[0] / devs[1] < 2.5


def test_weak_map_validates_eps():
    code = trivial_code()
    h = pair_hamiltonian(code, 1.0)
    with pytest.raises(ValueError):
        step_weak_map(scenario_rho0("hamiltonian-1q"), h, code, 1.5, 1e-3, 10)


# ---------------------------------------------------------------------------
# jump Monte Carlo
# ---------------------------------------------------------------------------


def test_monte_carlo_no_jumps_is_deterministic():
    code = trivial_code()
    h = pair_hamiltonian(code, 1.0)
    rho0 = scenario_rho0("hamiltonian-1q")
    t1 = jump_monte_carlo(rho0, h, code, 0.0, 1.0, 3, seed=1, n_samples=5)
    t2 = jump_monte_carlo(rho0, h, code, 0.0, 1.0, 3, seed=99, n_samples=5)
    assert np.allclose(t1.states, t2.states)
    f, _ = fidelity_weight_series(t1, code)
    assert np.max(np.abs(f - np.cos(t1.times) ** 2)) < 1e-10


def test_monte_carlo_seed_determinism():
    code = trivial_code()
    h = pair_hamiltonian(code, 1.0)
    rho0 = scenario_rho0("hamiltonian-1q")
    t1 = jump_monte_carlo(rho0, h, code, 5.0, 1.0, 50, seed=42, n_samples=5)
    t2 = jump_monte_carlo(rho0, h, code, 5.0, 1.0, 50, seed=42, n_samples=5)
    assert np.array_equal(t1.states, t2.states)
    assert np.array_equal(t1.observables["F_cw_mean"], t2.observables["F_cw_mean"])


def test_monte_carlo_mean_within_errors():
    code = trivial_code()
    h = pair_hamiltonian(code, 1.0)
    rho0 = scenario_rho0("hamiltonian-1q")
    traj = jump_monte_carlo(rho0, h, code, 5.0, 2.0, 2000, seed=0, n_samples=9)
    mean = traj.observables["F_cw_mean"]
    se = traj.observables["F_cw_se"]
    ref = alpha_nonmarkov_1q(traj.times, 1.0, 5.0)
    z = np.abs(mean - ref)[1:] / se[1:]
    assert np.max(z) < 4.0  # 9 samples; 4 sigma keeps the false-alarm rate tiny


# ---------------------------------------------------------------------------
# short-time structure
# ---------------------------------------------------------------------------


def test_zeno_quadratic_coefficient_single_qubit():
    gen = total_generator("hamiltonian-1q", ModelParams(gamma=1.0, kappa=0.0))
    traj = integrate(gen, scenario_rho0("hamiltonian-1q"), 1e-2, n_samples=101)
    f = _fidelity(traj, "hamiltonian-1q")
    fit = fit_quadratic(traj.times, 1.0 - f)
    c_ref = zeno_coefficient(
        pair_hamiltonian(trivial_code(), 1.0), np.diag([1.0, 0.0]), np.eye(2) / 2
    )
    assert fit.params["c2"] == pytest.approx(c_ref, rel=0.01)


def test_markovian_short_time_exponents():
    """Single-error weight grows linearly, three-error weight cubically."""
    gen = total_generator("markovian-3q", ModelParams(lam=1.0, kappa=0.0))
    cfg = IntegratorConfig(method="spectral")
    traj = integrate(gen, scenario_rho0("markovian-3q"), 1e-2, cfg, n_samples=41)
    diag = np.real(np.einsum("tii->ti", traj.states))
    weight = np.array([bin(s).count("1") for s in range(8)])
    b = diag[:, weight == 1].sum(axis=1)
    d = diag[:, weight == 3].sum(axis=1)
    mask = traj.times >= 1e-4
    slope_b = fit_power_law(list(zip(traj.times[mask], b[mask]))).params["slope"]
    slope_d = fit_power_law(list(zip(traj.times[mask], d[mask]))).params["slope"]
    assert slope_b == pytest.approx(1.0, abs=0.02)
    assert slope_d >= 2.9
