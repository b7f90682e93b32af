"""Reduction machinery: invariant submanifolds with compatible projections,
the flow-equivariance checker, and three end-to-end pipelines (radial
reduction of free motion, Calogero-Moser from a free matrix flow, and the
Kepler unfolding into the oscillator family).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateStructureError, DomainError, IntegrationError
from .integrate import IntegratorConfig, Trajectory, integrate
from .phase_geometry import (
    fiber_act,
    ks_lift,
    ks_project,
    ks_tangent_velocity,
    to_oscillator_chart,
)
from .sampling import rng_from_seed, sample_states3
from .symplectic import chart_structure, poisson_bracket
from .systems import (
    DynamicalSystem,
    EnergyScaling,
    Observable,
    OBSERVABLES,
    calogero_moser_field,
    conformal_kepler_field,
    free3d_field,
    kepler_field,
    oscillator_invariant,
    radial_reduced_field,
    scaling_preset,
)

__all__ = [
    "ReductionSetup",
    "radial_setup",
    "kepler_setup",
    "check_equivariance",
    "UnfoldResult",
    "unfold_kepler",
    "kepler_period_from_unfold",
    "reduce_calogero",
    "project_constants",
    "projection_ratio",
    "project_tangent_state",
]


# ---------------------------------------------------------------------------
# setups and the equivariance checker
# ---------------------------------------------------------------------------

def project_tangent_state(s):
    """(y, u) upstairs state(s) -> (x, v) downstairs through the tangent map."""
    s = np.asarray(s, dtype=float)
    y, u = s[..., :4], s[..., 4:8]
    return np.concatenate(
        [ks_project(y), ks_tangent_velocity(y, u)], axis=-1
    )


@dataclass(frozen=True)
class ReductionSetup:
    """Upstairs system + constraint level set + projection + downstairs system.

    The constraint observable pins the invariant submanifold (value ==
    `target`), and the projection must send the upstairs flow restricted to
    that set onto the downstairs flow.
    """

    upstairs: DynamicalSystem
    constraint: Observable
    target: float
    projection: Callable[[np.ndarray], np.ndarray]
    downstairs: DynamicalSystem


def radial_setup(E: float) -> ReductionSetup:
    """Free 3-D motion at energy E reduced to the radial equation
    r'' = 2E/r - vr^2/r."""

    def proj(s):
        s = np.asarray(s, dtype=float)
        x, v = s[..., :3], s[..., 3:6]
        r = np.linalg.norm(x, axis=-1)
        return np.stack([r, np.sum(x * v, axis=-1) / r], axis=-1)

    free = free3d_field()
    return ReductionSetup(
        upstairs=free,
        constraint=free.energy,
        target=float(E),
        projection=proj,
        downstairs=radial_reduced_field(E=E, variant="energy"),
    )


def kepler_setup(k: float = 1.0) -> ReductionSetup:
    """Conformal Kepler flow on the zero level of the fiber momentum,
    projected through the tangent map onto the Kepler flow (same physical
    time on both legs)."""
    return ReductionSetup(
        upstairs=conformal_kepler_field(k=k),
        constraint=OBSERVABLES["h_yu"],
        target=0.0,
        projection=project_tangent_state,
        downstairs=kepler_field(k=k),
    )


def check_equivariance(
    setup: ReductionSetup,
    s0,
    T: float,
    tol: float = 1e-7,
    n_grid: int = 512,
    config: Optional[IntegratorConfig] = None,
) -> dict:
    """Integrate both legs of the reduction square from s0 over [0, T] and
    report the maximum pointwise divergence of downstairs states on a
    uniform comparison grid."""
    s0 = np.asarray(s0, dtype=float)
    resid = float(np.abs(setup.constraint(s0) - setup.target))
    if resid > 1e-10:
        raise DomainError(
            f"state violates {setup.constraint.name} = {setup.target} "
            f"(residual {resid:.3e})",
            state=s0,
        )
    report = {
        "upstairs": setup.upstairs.name,
        "downstairs": setup.downstairs.name,
        "T": float(T),
        "n_grid": int(n_grid),
        "constraint_residual": resid,
        "tolerance": float(tol),
    }
    if T == 0.0:
        report.update(max_divergence=0.0, samples=0)
        report["pass"] = True
        return report
    up = integrate(setup.upstairs, s0, T, config=config)
    down = integrate(setup.downstairs, setup.projection(s0), T, config=config)
    grid = np.linspace(0.0, T, n_grid + 1)
    path_up = setup.projection(up.eval(grid))
    path_down = down.eval(grid)
    div = float(np.max(np.linalg.norm(path_up - path_down, axis=-1)))
    report.update(max_divergence=div, samples=len(grid))
    report["pass"] = div <= tol
    return report


# ---------------------------------------------------------------------------
# Kepler unfolding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnfoldResult:
    """A Kepler initial condition lifted, integrated upstairs in the
    oscillator parameter, and projected back with the accumulated physical
    time.  Sampled columns live on a uniform tau grid."""

    E: float
    gauge: float
    scaling: str
    lift: np.ndarray                  # (Y0, U0) chart state, 8-vector
    taus: np.ndarray                  # (n,)
    ts: np.ndarray                    # (n,) accumulated physical time
    chart: np.ndarray                 # (n, 8) chart states on the grid
    xs: np.ndarray                    # (n, 3)
    vs: np.ndarray                    # (n, 3)
    upstairs: Trajectory              # augmented 9-dim trajectory
    divergence: dict
    collision: bool
    config: IntegratorConfig

    def t_of(self, tau):
        """Physical time at oscillator parameter tau (dense output)."""
        return np.asarray(self.upstairs.eval(tau))[..., 8]

    def tau_of(self, t):
        """Invert the time map on the integrated span (scalar or array)."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        t_nodes = self.upstairs.states[:, 8]
        tau_nodes = self.upstairs.times
        out = np.empty_like(t_arr)
        for i, tv in enumerate(t_arr):
            j = int(np.clip(np.searchsorted(t_nodes, tv), 1, len(t_nodes) - 1))
            lo, hi = tau_nodes[j - 1], tau_nodes[j]
            if tv <= t_nodes[0]:
                out[i] = tau_nodes[0]
            elif tv >= t_nodes[-1]:
                out[i] = tau_nodes[-1]
            else:
                out[i] = brentq(
                    lambda tau: float(self.upstairs.eval(tau)[8]) - tv,
                    lo, hi, xtol=1e-13,
                )
        return out[0] if np.isscalar(t) or np.ndim(t) == 0 else out

    def to_csv(self, path):
        cols = (
            ["tau", "t"]
            + ["Y1", "Y2", "Y3", "Y0", "U1", "U2", "U3", "U0"]
            + ["x1", "x2", "x3", "v1", "v2", "v3"]
        )
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for i in range(len(self.taus)):
                row = [self.taus[i], self.ts[i], *self.chart[i],
                       *self.xs[i], *self.vs[i]]
                w.writerow([f"{val:.16e}" for val in row])

    def sidecar(self) -> dict:
        return {
            "E": self.E,
            "gauge_lambda": self.gauge,
            "scaling": self.scaling,
            "collision": self.collision,
            "rel_tol": self.config.rel_tol,
            "abs_tol": self.config.abs_tol,
            "tau_end": float(self.taus[-1]),
            "t_end": float(self.ts[-1]),
            "samples": int(len(self.taus)),
            "divergence": self.divergence,
        }


def _augmented_oscillator(E: float, g: float) -> DynamicalSystem:
    """(Y, U, t) with dY/dtau = g U, dU/dtau = 2 g E Y, dt/dtau = 2 g R^2.
    Linear in (Y, U), complete through Y = 0."""
    E, g = float(E), float(g)

    def rhs(s):
        s = np.asarray(s, dtype=float)
        Y, U = s[..., :4], s[..., 4:8]
        dt = 2.0 * g * np.sum(Y * Y, axis=-1)
        return np.concatenate(
            [g * U, (2.0 * g * E) * Y, dt[..., None]], axis=-1
        )

    inv = oscillator_invariant(E)
    mon = (
        Observable("oscillator_invariant", 9, lambda s: inv.fn(s[..., :8])),
        Observable("h", 9, lambda s: OBSERVABLES["h"].fn(s[..., :8])),
        # the energy read off the chart; 0/0 at Y = 0 itself but finite (and
        # conserved) everywhere the integrator actually lands
        Observable(
            "chart_energy", 9,
            lambda s: OBSERVABLES["chart_energy"].fn(s[..., :8]),
        ),
    )
    return DynamicalSystem(
        name="unfold",
        dim=9,
        rhs=rhs,
        energy=None,
        monitors=mon,
        state_names=("Y1", "Y2", "Y3", "Y0", "U1", "U2", "U3", "U0", "t"),
    )


def unfold_kepler(
    p0,
    tau_end: float,
    scaling: Optional[EnergyScaling] = None,
    gauge: float = 0.0,
    config: Optional[IntegratorConfig] = None,
    k: float = 1.0,
    n_samples: int = 512,
    compare: bool = True,
    compare_points: int = 512,
) -> UnfoldResult:
    """Lift a Kepler state, flow the completed oscillator field in tau with
    the accumulated time quadrature, and project back downstairs.

    `p0` is a State3 or a (x, v) pair / 6-vector.  The returned result
    samples everything on a uniform tau grid of n_samples+1 points and, when
    `compare` is set, holds the divergence against direct Kepler integration
    on a shared physical-time grid (truncated to wherever direct integration
    survives; radial collisions downstairs set the `collision` flag while
    the upstairs trajectory continues through Y = 0).
    """
    cfg = config or IntegratorConfig()
    if hasattr(p0, "x") and hasattr(p0, "v"):
        x0, v0 = np.asarray(p0.x, float), np.asarray(p0.v, float)
    else:
        arr = np.asarray(p0, dtype=float).reshape(-1)
        x0, v0 = arr[:3], arr[3:6]
    y0, u0 = ks_lift(x0, v0, gauge)
    Y0, U0 = to_oscillator_chart(y0, u0)
    E = float((0.5 * np.dot(U0, U0) - k) / np.dot(Y0, Y0))
    scaling = scaling or scaling_preset("unit")
    g = float(scaling(E))

    system = _augmented_oscillator(E, g)
    s0 = np.concatenate([Y0, U0, [0.0]])
    up = integrate(system, s0, float(tau_end), config=cfg)

    taus = np.linspace(0.0, float(tau_end), int(n_samples) + 1)
    samples = up.eval(taus)
    chart = samples[:, :8]
    ts = samples[:, 8]
    xs = ks_project(chart[:, :4])
    r2 = np.sum(chart[:, :4] ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        u_nat = chart[:, 4:8] / (2.0 * r2)[:, None]
        vs = ks_tangent_velocity(chart[:, :4], u_nat)

    result = UnfoldResult(
        E=E,
        gauge=float(gauge),
        scaling=scaling.name,
        lift=np.concatenate([Y0, U0]),
        taus=taus,
        ts=ts,
        chart=chart,
        xs=xs,
        vs=vs,
        upstairs=up,
        divergence={"compared": False},
        collision=False,
        config=cfg,
    )
    if not compare:
        return result

    divergence, collision = _compare_downstairs(
        result, x0, v0, k, cfg, compare_points
    )
    return UnfoldResult(
        **{**result.__dict__, "divergence": divergence, "collision": collision}
    )


def _compare_downstairs(result, x0, v0, k, cfg, compare_points):
    """Integrate Kepler directly and measure divergence from the projected
    unfold on a shared physical-time grid."""
    t_total = float(result.ts[-1])
    kepler = kepler_field(k=k)
    s0 = np.concatenate([x0, v0])
    collision = False
    t_cmp = t_total
    direct = None
    for _ in range(8):
        if t_cmp <= 0.0:
            break
        try:
            direct = integrate(kepler, s0, t_cmp, config=cfg)
            break
        except IntegrationError as exc:
            collision = True
            reached = exc.t if exc.t is not None else 0.0
            t_cmp = 0.95 * reached
    if direct is None:
        return {"compared": False, "collision": True, "t_compared": 0.0}, True

    grid = np.linspace(0.0, t_cmp, int(compare_points) + 1)
    taus = result.tau_of(grid)
    states = result.upstairs.eval(taus)
    Y, U = states[..., :4], states[..., 4:8]
    xs = ks_project(Y)
    r2 = np.sum(Y * Y, axis=-1)
    vs = ks_tangent_velocity(Y, U / (2.0 * r2)[..., None])
    down = direct.eval(grid)
    dx = np.linalg.norm(down[:, :3] - xs, axis=-1)
    dv = np.linalg.norm(down[:, 3:6] - vs, axis=-1)
    return {
        "compared": True,
        "collision": collision,
        "t_compared": float(t_cmp),
        "n_points": int(len(grid)),
        "max_position_divergence": float(np.max(dx)),
        "max_velocity_divergence": float(np.max(dv)),
    }, collision


def kepler_period_from_unfold(result: UnfoldResult, tol: float = 1e-6) -> dict:
    """Extract periods from an unfold: the upstairs tau-period (first return
    of the chart state) and the physical times of the half and full
    tau-period.  The flow downstairs closes after HALF the upstairs period
    (the lift double-covers the orbit), so `t_half` is the Kepler period."""
    from .integrate import find_return_time

    tau_period = find_return_time(
        result.upstairs,
        result.upstairs.states[0],
        tol,
        components=range(8),
    )
    t_half = float(result.t_of(tau_period / 2.0))
    t_full = float(result.t_of(tau_period))
    return {"tau_period": tau_period, "t_half": t_half, "t_full": t_full}


# ---------------------------------------------------------------------------
# Calogero-Moser
# ---------------------------------------------------------------------------

_SIGMA = np.array([[0.0, 1.0], [-1.0, 0.0]])


def reduce_calogero(
    X0,
    V0,
    T: float,
    n_grid: int = 512,
    tol: float = 1e-6,
    gap_min: float = 1e-9,
    config: Optional[IntegratorConfig] = None,
) -> dict:
    """Compare the eigenvalue flow of the free matrix motion X(t) = X0 + t V0
    with the two-body Calogero-Moser equations at the coupling read off the
    initial matrices.

    The conserved commutator M = [X, Xdot] determines the coupling through
    l = -Tr(M sigma)/2; eigenvalues are kept in ascending order with a
    nearest-match swap check between grid points, and a gap below `gap_min`
    is reported as a degeneracy.
    """
    X0 = np.asarray(X0, dtype=float)
    V0 = np.asarray(V0, dtype=float)
    for name, A in (("X0", X0), ("V0", V0)):
        if A.shape != (2, 2) or abs(A[0, 1] - A[1, 0]) > 1e-12:
            raise ValueError(f"{name} must be symmetric 2x2")
    M = X0 @ V0 - V0 @ X0
    l = -0.5 * float(np.trace(M @ _SIGMA))

    q0, G = np.linalg.eigh(X0)
    if q0[1] - q0[0] < gap_min:
        raise DegenerateStructureError(
            f"X0 eigenvalue gap {q0[1] - q0[0]:.3e} below {gap_min:g}",
            state=X0,
        )
    qd0 = np.diag(G.T @ V0 @ G)

    grid = np.linspace(0.0, float(T), int(n_grid) + 1)
    eigs = np.empty((len(grid), 2))
    prev = q0
    m_drift = 0.0
    for i, t in enumerate(grid):
        Xt = X0 + t * V0
        m_drift = max(m_drift, float(np.max(np.abs((Xt @ V0 - V0 @ Xt) - M))))
        w = np.linalg.eigh(Xt)[0]
        # continuity tracking: prefer the assignment closest to the last point
        if (abs(w[0] - prev[0]) + abs(w[1] - prev[1])
                > abs(w[1] - prev[0]) + abs(w[0] - prev[1])):
            w = w[::-1]
        if abs(w[1] - w[0]) < gap_min:
            raise DegenerateStructureError(
                f"eigenvalue collision at t={t:.6g} "
                f"(gap {abs(w[1] - w[0]):.3e})",
                state=Xt,
            )
        eigs[i] = w
        prev = w

    system = calogero_moser_field(l, gap_min=gap_min)
    s0 = np.array([q0[0], q0[1], qd0[0], qd0[1]])
    if T > 0:
        traj = integrate(system, s0, float(T), config=config)
        q_path = traj.eval(grid)[:, :2]
    else:
        q_path = s0[None, :2]
    div = float(np.max(np.abs(q_path - eigs)))
    return {
        "l": l,
        "T": float(T),
        "n_grid": int(n_grid),
        "max_divergence": div,
        "commutator_drift": m_drift,
        "tolerance": float(tol),
        "pass": bool(div <= tol),
        "initial_q": [float(v) for v in q0],
        "initial_qdot": [float(v) for v in qd0],
    }


# ---------------------------------------------------------------------------
# projecting constants of motion
# ---------------------------------------------------------------------------

def project_constants(
    obs: Observable,
    samples: int = 100,
    seed: int = 0,
    tol: float = 1e-10,
) -> Observable:
    """Turn a chart observable that commutes with the fiber momentum into a
    function of the downstairs state: f_down(p) = f(lift(p)).

    Commutation {f, h} = 0 and fiber-invariance are verified numerically at
    random states first; a failing observable is rejected with the measured
    residual, since without those properties the value would depend on the
    choice of lift.
    """
    struct = chart_structure()
    states = np.asarray(
        sample_states3(samples, seed=seed), dtype=float
    )
    lam = rng_from_seed(seed + 1).uniform(0.0, 2.0 * np.pi, size=samples)
    y, u = ks_lift(states[:, :3], states[:, 3:], lam)
    chart = np.concatenate([y, 2.0 * np.sum(y * y, axis=-1)[:, None] * u], axis=1)

    resid = float(np.max(np.abs(
        poisson_bracket(struct, obs, OBSERVABLES["h"], chart)
    )))
    if resid > tol:
        raise ValueError(
            f"{obs.name} does not commute with the fiber momentum "
            f"(max residual {resid:.3e} > {tol:g})"
        )
    lam2 = rng_from_seed(seed + 2).uniform(0.0, 2.0 * np.pi, size=samples)
    y2, u2 = fiber_act(y, u, lam2)
    chart2 = np.concatenate(
        [y2, 2.0 * np.sum(y2 * y2, axis=-1)[:, None] * u2], axis=1
    )
    fiber_dev = float(np.max(np.abs(obs.fn(chart) - obs.fn(chart2))))
    if fiber_dev > tol:
        raise ValueError(
            f"{obs.name} is not constant along fibers "
            f"(max deviation {fiber_dev:.3e} > {tol:g})"
        )

    def fn(s):
        s = np.asarray(s, dtype=float)
        yl, ul = ks_lift(s[..., :3], s[..., 3:6])
        r2 = np.sum(yl * yl, axis=-1)
        return obs.fn(
            np.concatenate([yl, 2.0 * r2[..., None] * ul], axis=-1)
        )

    return Observable(f"{obs.name}_down", 6, fn)


def projection_ratio(
    up_names,
    down_names,
    samples: int = 200,
    seed: int = 0,
) -> dict:
    """Least-squares constant c with f_up(lift(p)) = c * f_down(p) across
    random downstairs states and all listed components; reports the fitted c
    and the worst absolute residual, which is small only if a single global
    constant works for every component at every state."""
    states = sample_states3(samples, seed=seed)
    ups, downs = [], []
    for un, dn in zip(up_names, down_names):
        f_down = project_constants(OBSERVABLES[un], samples=50, seed=seed)
        ups.append(f_down.fn(states))
        downs.append(OBSERVABLES[dn].fn(states))
    up = np.concatenate(ups)
    down = np.concatenate(downs)
    c = float(np.dot(up, down) / np.dot(down, down))
    resid = float(np.max(np.abs(up - c * down)))
    return {
        "pairs": list(zip(up_names, down_names)),
        "ratio": c,
        "max_residual": resid,
        "samples": samples,
    }
