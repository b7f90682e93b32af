"""Reduction squares, the Kepler unfolding pipeline, Calogero-Moser,
and descent of constants through the gauge quotient."""

import numpy as np
import pytest

from ksunfold import (
    DegenerateStructureError,
    DomainError,
    OBSERVABLES,
    check_equivariance,
    fiber_momentum,
    kepler_period_from_unfold,
    kepler_setup,
    ks_lift,
    project_constants,
    projection_ratio,
    radial_setup,
    reduce_calogero,
    unfold_kepler,
)
from ksunfold.integrate import integrate
from ksunfold.symplectic import quadratic_observable
from ksunfold.sampling import rng_from_seed, sample_states3


# --- radial reduction of free motion ---------------------------------------

def test_radial_square_commutes_and_matches_analytic_orbit():
    # x(t) = (1, t, 0):  r(t) = sqrt(1 + t^2), energy 1/2
    setup = radial_setup(E=0.5)
    s0 = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    rep = check_equivariance(setup, s0, T=3.0, tol=1e-8)
    assert rep["pass"], rep
    # and the reduced flow itself reproduces the closed form
    traj = integrate(setup.downstairs, setup.projection(s0), 3.0)
    ts = np.linspace(0.0, 3.0, 301)
    r = np.array([traj.eval(t)[0] for t in ts])
    assert np.max(np.abs(r - np.sqrt(1.0 + ts**2))) < 1e-9


def test_radial_angular_variant_matches_same_orbit():
    # the fixed-l reduction of the same motion: l = |x0 x v0| = 1
    from ksunfold import radial_reduced_field

    sys_l = radial_reduced_field(l=1.0, variant="angular")
    traj = integrate(sys_l, np.array([1.0, 0.0]), 3.0)
    ts = np.linspace(0.0, 3.0, 301)
    r = np.array([traj.eval(t)[0] for t in ts])
    assert np.max(np.abs(r - np.sqrt(1.0 + ts**2))) < 1e-9


def test_equivariance_zero_horizon():
    setup = radial_setup(E=0.5)
    rep = check_equivariance(setup, np.array([1.0, 0, 0, 0, 1.0, 0]), T=0.0)
    assert rep["pass"] and rep["max_divergence"] == 0.0


def test_equivariance_rejects_off_level_states():
    setup = radial_setup(E=0.5)
    bad = np.array([1.0, 0.0, 0.0, 0.0, 1.1, 0.0])  # energy != 1/2
    with pytest.raises(DomainError):
        check_equivariance(setup, bad, T=1.0)


# --- Kepler square ----------------------------------------------------------

def test_kepler_square_circular_orbit():
    y0, u0 = ks_lift(np.array([1.0, 0, 0]), np.array([0, 1.0, 0]))
    s0 = np.concatenate([y0, u0])
    rep = check_equivariance(kepler_setup(), s0, T=2 * np.pi, tol=1e-7)
    assert rep["pass"], rep
    assert rep["constraint_residual"] < 1e-12


def test_kepler_square_random_gauge_and_eccentricity():
    y0, u0 = ks_lift(np.array([1.0, 0, 0]), np.array([0, 0.8, 0]), 2.1)
    s0 = np.concatenate([y0, u0])
    rep = check_equivariance(kepler_setup(), s0, T=3.0, tol=1e-7)
    assert rep["pass"], rep


# --- unfolding pipeline ------------------------------------------------------

def test_unfold_circular_orbit():
    res = unfold_kepler(np.array([1.0, 0, 0, 0, 1.0, 0]), 2 * np.pi)
    assert abs(res.E + 0.5) < 1e-12
    assert res.divergence["compared"]
    assert not res.collision
    assert res.divergence["max_position_divergence"] < 1e-7
    assert res.divergence["max_velocity_divergence"] < 1e-7
    # the projected radius stays on the unit circle
    r = np.linalg.norm(res.xs, axis=1)
    assert np.max(np.abs(r - 1.0)) < 1e-7


def test_unfold_eccentric_orbit_conserves_downstairs_constants():
    # e = |A| = 0.36, p = |L|^2 = 0.64: perihelion p/(1+e)
    res = unfold_kepler(np.array([1.0, 0, 0, 0, 0.8, 0]), 4 * np.pi, n_samples=4096)
    states = np.concatenate([res.xs, res.vs], axis=1)
    for name in ("L1", "L2", "L3", "A1", "A2", "A3", "kepler_energy"):
        vals = OBSERVABLES[name](states)
        assert np.max(vals) - np.min(vals) < 1e-8, name
    peri = 0.64 / 1.36
    assert abs(np.min(np.linalg.norm(res.xs, axis=1)) - peri) < 1e-5


def test_unfold_gauge_independence_downstairs():
    # the same orbit unfolded at different fiber angles projects identically
    p0 = np.array([1.0, 0, 0, 0, 0.9, 0.1])
    base = unfold_kepler(p0, 5.0, compare=False)
    for lam in (1.0, 2.5, 4.4):
        other = unfold_kepler(p0, 5.0, gauge=lam, compare=False)
        assert np.max(np.abs(other.xs - base.xs)) < 1e-8
        assert np.max(np.abs(other.vs - base.vs)) < 1e-8
        assert abs(other.E - base.E) < 1e-13


def test_unfold_time_map_is_monotone_and_invertible():
    res = unfold_kepler(np.array([1.0, 0, 0, 0, 1.0, 0]), 2 * np.pi, compare=False)
    assert np.all(np.diff(res.ts) > 0)
    # t_of and tau_of are mutually inverse on the span
    for tau in (0.3, 2.0, 5.1):
        t = float(res.t_of(tau))
        assert abs(float(res.tau_of(t)) - tau) < 1e-10
    # circular orbit at r = 1: dt/dtau = 2 R^2 = 2, so t(tau) = 2 tau
    assert np.max(np.abs(res.ts - 2.0 * res.taus)) < 1e-9


def test_unfold_monitors_hold_invariant_and_gauge_level():
    res = unfold_kepler(np.array([1.0, 0, 0, 0, 0.8, 0]), 10.0, compare=False)
    inv = res.upstairs.monitors["oscillator_invariant"]
    assert np.max(inv) - np.min(inv) < 1e-9
    h = res.upstairs.monitors["h"]
    assert np.max(np.abs(h)) < 1e-10


def test_unfold_period_family():
    # Kepler's third law through the unfolding, three energies
    for a in (1.0, 2.0, 4.0):
        p0 = np.array([a, 0, 0, 0, 1.0 / np.sqrt(a), 0])
        E = -0.5 / a
        tau_ref = 2 * np.pi / np.sqrt(-2 * E)
        res = unfold_kepler(p0, 2.2 * tau_ref, compare=False)
        periods = kepler_period_from_unfold(res)
        T_kepler = 2 * np.pi * a**1.5
        assert abs(periods["tau_period"] - tau_ref) < 1e-8
        assert abs(periods["t_half"] - T_kepler) < 1e-6 * T_kepler
        # the chart state double-covers the orbit: full tau-period spans
        # two Kepler periods downstairs
        assert abs(periods["t_full"] - 2 * T_kepler) < 1e-6 * T_kepler


def test_unfold_through_collision():
    # radial infall: direct integration dies, the unfolded flow continues
    p0 = np.array([1.0, 0, 0, -0.5, 0, 0])
    res = unfold_kepler(p0, 6.0)
    assert res.collision
    assert res.divergence["compared"]
    # wherever both legs exist they agree
    assert res.divergence["max_position_divergence"] < 1e-8
    # the upstairs trajectory crosses (close to) the origin and keeps going
    R2 = np.sum(res.chart[:, :4] ** 2, axis=1)
    assert np.min(R2) < 1e-3
    assert res.taus[-1] == 6.0


def test_unfold_csv_and_sidecar(tmp_path):
    res = unfold_kepler(np.array([1.0, 0, 0, 0, 1.0, 0]), 1.0, compare=False,
                        n_samples=16)
    path = tmp_path / "unfold.csv"
    res.to_csv(path)
    header = open(path).readline().strip()
    assert header == "tau,t,Y1,Y2,Y3,Y0,U1,U2,U3,U0,x1,x2,x3,v1,v2,v3"
    assert len(open(path).read().splitlines()) == 18
    side = res.sidecar()
    assert side["samples"] == 17
    assert side["scaling"] == "unit"
    assert not side["collision"]


def test_unfold_rejects_origin():
    from ksunfold import LiftError

    with pytest.raises(LiftError):
        unfold_kepler(np.zeros(6), 1.0)


# --- Calogero-Moser ----------------------------------------------------------

def test_calogero_preset_matches_eigenvalue_flow():
    a = -1.0 / np.sqrt(2.0)
    X0 = np.diag([0.0, 1.0])
    V0 = np.array([[0.0, a], [a, 0.0]])
    rep = reduce_calogero(X0, V0, T=2.0)
    assert rep["pass"], rep
    assert rep["max_divergence"] < 1e-6
    assert abs(rep["l"] - 1.0 / np.sqrt(2.0)) < 1e-12
    assert rep["commutator_drift"] < 1e-12


def test_calogero_eigenvalues_hand_oracle():
    # X(t) = [[0, t a], [t a, 1]]: eigenvalues (1 +- sqrt(1 + 4 t^2 a^2))/2;
    # at t = 2, a = 1/sqrt(2): (1 +- 3)/2 = {-1, 2}
    from ksunfold import calogero_moser_field

    a = 1.0 / np.sqrt(2.0)
    X0 = np.diag([0.0, 1.0])
    V0 = np.array([[0.0, a], [a, 0.0]])
    sys = calogero_moser_field(a)
    rep = reduce_calogero(X0, V0, T=2.0, n_grid=1000)
    traj = integrate(sys, np.array(rep["initial_q"] + rep["initial_qdot"]), 2.0)
    q_end = traj.states[-1][:2]
    assert np.max(np.abs(np.sort(q_end) - np.array([-1.0, 2.0]))) < 1e-6


def test_calogero_zero_coupling_is_free_motion():
    X0 = np.diag([0.0, 1.0])
    V0 = np.diag([0.25, 1.5])  # commutes with X0: l = 0
    rep = reduce_calogero(X0, V0, T=2.0, tol=1e-10)
    assert abs(rep["l"]) < 1e-14
    assert rep["max_divergence"] < 1e-10


def test_calogero_input_validation():
    with pytest.raises(ValueError):
        reduce_calogero(np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2), 1.0)
    with pytest.raises(DegenerateStructureError):
        reduce_calogero(np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]]), 1.0)


# --- descent of constants ----------------------------------------------------

def test_projected_angular_momentum_is_proportional_to_downstairs():
    rep = projection_ratio(
        ("J1", "J2", "J3"), ("L1", "L2", "L3"), samples=100, seed=5
    )
    assert rep["max_residual"] < 1e-9
    # the global factor is exactly one half
    assert abs(rep["ratio"] - 0.5) < 1e-10


def test_projected_runge_lenz_same_factor():
    rep = projection_ratio(
        ("Q1", "Q2", "Q3"), ("A1", "A2", "A3"), samples=100, seed=7
    )
    assert rep["max_residual"] < 1e-9
    assert abs(rep["ratio"] - 0.5) < 1e-10


def test_gauge_momentum_projects_to_zero():
    f = project_constants(OBSERVABLES["h"], samples=50, seed=9)
    pts = sample_states3(50, seed=11)
    assert np.max(np.abs(f.fn(pts))) < 1e-10


def test_chart_energy_projects_to_kepler_energy():
    f = project_constants(OBSERVABLES["chart_energy"], samples=50, seed=13)
    pts = sample_states3(50, seed=15)
    assert np.max(np.abs(f.fn(pts) - OBSERVABLES["kepler_energy"](pts))) < 1e-10


def test_non_commuting_observable_is_rejected():
    # a random quadratic form does not commute with the gauge momentum
    rng = rng_from_seed(17)
    P = rng.normal(size=(8, 8))
    bad = quadratic_observable(P + P.T, "bad_quadratic")
    with pytest.raises(ValueError, match="commute"):
        project_constants(bad, samples=30, seed=19)


def test_tangency_of_conformal_field_to_gauge_level():
    # grad h . rhs = 0 on the h = 0 level: the flow never leaves the level set
    from ksunfold import conformal_kepler_field
    from ksunfold.sampling import sample_states_sigma0

    con = conformal_kepler_field()
    states = sample_states_sigma0(1000, seed=21)
    grad_h = OBSERVABLES["h_yu"].gradient(states)
    dot = np.abs(np.sum(grad_h * con.rhs(states), axis=1))
    assert np.max(dot) < 1e-10
    assert np.max(np.abs(fiber_momentum(states[:, :4], states[:, 4:]))) < 1e-12
