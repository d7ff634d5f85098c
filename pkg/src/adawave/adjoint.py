"""Reverse-time adjoint solver, the exact transpose of the forward march.

The backward recursion is derived by differentiating the Lagrangian of the
discrete leapfrog equations, so the resulting multiplier field makes the
parameter gradient exact at the discrete level (finite differences of the
objective match to solver precision, not just to discretization order).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .mesh import TriMesh
from .wave import BoundaryTraceMatrix, WaveConfig, WaveHistory, _Stepper


@dataclass(frozen=True)
class CutoffSpec:
    """Temporal cutoff that is 1 on [0, T-2s], 0 on [T-s, T], smooth between.

    zeta == 0 disables the cutoff entirely (the factor is 1 everywhere),
    which matches runs where the field is already quiet at the final time.
    """

    zeta: float = 0.0
    profile: int = 3        # transition polynomial degree; cubic implemented

    def __post_init__(self):
        if self.zeta < 0:
            raise ConfigError("cutoff width must be nonnegative")
        if self.profile != 3:
            raise ConfigError("only the cubic transition profile is implemented")

    @property
    def enabled(self):
        return self.zeta > 0

    def weights(self, times, t_final):
        if not self.enabled:
            return np.ones_like(times)
        return np.array([cutoff_value(self, t, t_final) for t in times])


def cutoff_value(spec: CutoffSpec, t: float, t_final: float) -> float:
    """Cutoff factor at time t; cubic smoothstep on the transition band."""
    if spec.zeta <= 0:
        raise ConfigError("cutoff width must be positive")
    if 2 * spec.zeta >= t_final:
        raise ConfigError("cutoff width too large: 2*zeta must be below T")
    if not (0.0 <= t <= t_final * (1 + 1e-12)):
        raise ConfigError("time outside [0, T]")
    if t <= t_final - 2 * spec.zeta:
        return 1.0
    if t >= t_final - spec.zeta:
        return 0.0
    s = (t - (t_final - 2 * spec.zeta)) / spec.zeta
    return 1.0 - s * s * (3.0 - 2.0 * s)


def trapezoid_weights(n_steps, dt):
    w = np.full(n_steps + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def solve_adjoint(mesh: TriMesh, c, misfit: BoundaryTraceMatrix, cfg: WaveConfig,
                  cutoff: CutoffSpec, dt=None, n_steps=None, use_bc=True) -> WaveHistory:
    """Backward-in-time multiplier field loaded by the cut-off data misfit.

    `misfit` holds (g - v) on the solver's boundary/time grid.  The load at
    step j is w_j z_j M_S misfit_j with trapezoid weights w_j, and the
    recursion transposes the forward stepping exactly (including the
    time-switched absorbing terms when use_bc is set, mirroring the state
    solve mode).
    """
    c_values = getattr(c, "values", c)
    if dt is None or n_steps is None:
        from .wave import resolve_time_grid
        dt, n_steps = resolve_time_grid(mesh, float(np.min(c_values)), cfg)
    stepper = _Stepper(mesh, c_values, cfg, dt, n_steps)
    times = dt * np.arange(n_steps + 1)
    if (len(misfit.times) != len(times)
            or not np.allclose(misfit.times, times, atol=1e-9 * dt)):
        raise ConfigError("misfit time grid does not match the solver; resample first")
    if not np.array_equal(misfit.node_ids, stepper.b_ids):
        raise ConfigError("misfit detectors must be the sorted mesh boundary nodes")

    w = trapezoid_weights(n_steps, dt) * cutoff.weights(times, cfg.t_final)
    lam = _adjoint_sweep(stepper, misfit.values, w, use_bc=use_bc)
    return WaveHistory(mesh=mesh, snapshots=lam, dt=dt, n_steps=n_steps)


def _adjoint_sweep(stepper: _Stepper, misfit_values, step_weights, use_bc=True):
    """Core backward recursion; returns the (K+1, N) multiplier snapshots."""
    mesh, dt, K = stepper.mesh, stepper.dt, stepper.n_steps
    N = mesh.n_nodes
    m = stepper.m
    A = stepper.A
    mdt2 = m / (dt * dt)

    def damping(k):
        if not use_bc:
            return np.zeros(N)
        return stepper.damping(k)

    def load(j):
        F = np.zeros(N)
        F[stepper.b_ids] = stepper.MS @ (step_weights[j] * misfit_values[:, j])
        return F

    lam = np.zeros((K + 1, N))
    if K < 1:
        return lam
    lam[K] = load(K) / (mdt2 + damping(K - 1) / (2 * dt))
    for j in range(K - 1, 1, -1):
        lam_j2 = lam[j + 2] if j + 2 <= K else np.zeros(N)
        rhs = ((2.0 * mdt2) * lam[j + 1] - A @ lam[j + 1]
               - (mdt2 - damping(j + 1) / (2 * dt)) * lam_j2 + load(j))
        lam[j] = rhs / (mdt2 + damping(j - 1) / (2 * dt))
    if K >= 2:
        lam_3 = lam[3] if K >= 3 else np.zeros(N)
        rhs = ((2.0 * mdt2) * lam[2] - A @ lam[2]
               - (mdt2 - damping(2) / (2 * dt)) * lam_3 + load(1))
        lam[1] = rhs / (2.0 * mdt2)
    else:
        lam[1] = load(1) / (2.0 * mdt2)
    return lam
