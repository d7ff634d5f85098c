"""Tikhonov functional for the coefficient inverse problem and its gradient.

E_alpha(c) = 1/2 int_{S_T} (v|_S - g)^2 z(t) ds dt + alpha/2 int (c - c_glob)^2 dx

with the boundary integral evaluated by the consistent boundary mass matrix
in space and the trapezoid rule in time, and the regularization term by exact
P1 mass quadrature.  The gradient pairs the adjoint field with the discrete
second time difference of the state, which is the exact derivative of the
discrete functional; it is returned in the L2 (Riesz) representation, so the
directional derivative along e is the mass-weighted inner product with e.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import CutoffSpec, _adjoint_sweep, trapezoid_weights
from .errors import ConfigError, MeshError
from .mesh import NodalField, TriMesh
from .wave import BoundaryTraceMatrix, WaveConfig, WaveHistory, _Stepper, resolve_time_grid


@dataclass(frozen=True)
class CoefficientBounds:
    """Admissible box for the coefficient, (1 - omega, d + omega)."""

    d: float = 4.0
    omega: float = 0.2

    def __post_init__(self):
        if not (self.d > 1):
            raise ConfigError("d must exceed 1")
        if not (0 < self.omega < 1):
            raise ConfigError("omega must lie in (0, 1)")

    @property
    def lower(self):
        return 1.0 - self.omega

    @property
    def upper(self):
        return self.d + self.omega


@dataclass
class CoefficientField:
    """P1 coefficient with hard box bounds; construction rejects violations.

    Clamping is deliberate and explicit (see `clamp`), never silent.
    """

    mesh: TriMesh
    values: np.ndarray
    bounds: CoefficientBounds

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_nodes,):
            raise MeshError("value count does not match mesh node count")
        if (self.values < self.bounds.lower - 1e-12).any() or \
           (self.values > self.bounds.upper + 1e-12).any():
            raise ConfigError("coefficient values outside the admissible box")

    @property
    def field(self):
        return NodalField(self.mesh, self.values)


def clamp(values, bounds: CoefficientBounds):
    """Project nodal values onto the box; returns (clamped, n_changed)."""
    out = np.clip(values, bounds.lower, bounds.upper)
    return out, int(np.count_nonzero(out != np.asarray(values)))


@dataclass(frozen=True)
class RegularizationPolicy:
    """alpha = delta^(2 mu) unless an explicit override is given."""

    delta: float
    mu: float = 0.2
    alpha_override: float | None = None

    def __post_init__(self):
        if self.alpha_override is None:
            if not (0 < self.delta < 1):
                raise ConfigError("noise level delta must lie in (0, 1)")
            if not (0 < self.mu < 0.25):
                raise ConfigError("exponent mu must lie in (0, 1/4)")

    @property
    def alpha(self):
        if self.alpha_override is not None:
            return float(self.alpha_override)
        return float(self.delta ** (2.0 * self.mu))


def alpha_from_delta(policy: RegularizationPolicy) -> float:
    return policy.alpha


def aposteriori_bound(grad_norm: float, delta: float, mu: float) -> float:
    """Distance bound to the regularized solution, (2 / delta^(2 mu)) |E'|."""
    if not (0 < delta < 1):
        raise ConfigError("delta must lie in (0, 1)")
    return 2.0 / (delta ** (2.0 * mu)) * float(grad_norm)


@dataclass
class EvalResult:
    value: float
    v_trace: BoundaryTraceMatrix
    v_history: WaveHistory


class TikhonovObjective:
    """Value/gradient engine bound to one mesh, data trace and settings.

    The time grid is fixed at construction from the lower coefficient bound,
    so every iterate of an optimization run sees the same discretization.
    The data trace must already live on this mesh's sorted boundary nodes
    and on the solver time grid (use BoundaryTraceMatrix.resample).
    """

    def __init__(self, mesh: TriMesh, g: BoundaryTraceMatrix, c_glob,
                 alpha: float, cfg: WaveConfig, cutoff: CutoffSpec,
                 bounds: CoefficientBounds):
        self.mesh = mesh
        self.cfg = cfg
        self.cutoff = cutoff
        self.bounds = bounds
        self.alpha = float(alpha)
        self.c_glob = np.asarray(getattr(c_glob, "values", c_glob), dtype=float)
        self.dt, self.n_steps = resolve_time_grid(mesh, bounds.lower, cfg)
        self.times = self.dt * np.arange(self.n_steps + 1)
        b_ids = mesh.boundary_nodes()
        if (len(g.times) != len(self.times)
                or not np.allclose(g.times, self.times, atol=1e-9 * self.dt)):
            raise ConfigError("data trace is not on the solver time grid; resample first")
        if not np.array_equal(g.node_ids, b_ids):
            raise ConfigError("data trace detectors must be the sorted boundary nodes")
        self.g = g
        self.weights = (trapezoid_weights(self.n_steps, self.dt)
                        * cutoff.weights(self.times, cfg.t_final))
        self._mass = mesh.mass_matrix()

    def _check_bounds(self, c_values):
        if (c_values < self.bounds.lower - 1e-12).any() or \
           (c_values > self.bounds.upper + 1e-12).any():
            raise ConfigError("coefficient outside the admissible box")

    def _stepper(self, c_values):
        return _Stepper(self.mesh, c_values, self.cfg, self.dt, self.n_steps)

    def _misfit_energy(self, stepper, u):
        r = u[:, stepper.b_ids].T - self.g.values        # (nd, K+1)
        MSr = stepper.MS @ r
        return 0.5 * float(np.einsum("dj,dj,j->", r, MSr, self.weights)), r

    def _reg(self, c_values):
        dc = c_values - self.c_glob
        return 0.5 * self.alpha * float(dc @ (self._mass @ dc))

    def value(self, c_values) -> float:
        c_values = np.asarray(getattr(c_values, "values", c_values), dtype=float)
        self._check_bounds(c_values)
        stepper = self._stepper(c_values)
        u = stepper.run()
        e_mis, _ = self._misfit_energy(stepper, u)
        return e_mis + self._reg(c_values)

    def evaluate(self, c_values) -> EvalResult:
        c_values = np.asarray(getattr(c_values, "values", c_values), dtype=float)
        self._check_bounds(c_values)
        stepper = self._stepper(c_values)
        u = stepper.run()
        e_mis, _ = self._misfit_energy(stepper, u)
        trace = BoundaryTraceMatrix(times=self.times, node_ids=stepper.b_ids,
                                    coords=self.mesh.nodes[stepper.b_ids],
                                    values=u[:, stepper.b_ids].T)
        hist = WaveHistory(mesh=self.mesh, snapshots=u, dt=self.dt, n_steps=self.n_steps)
        return EvalResult(value=e_mis + self._reg(c_values), v_trace=trace, v_history=hist)

    def value_and_gradient(self, c_values):
        """Objective value and its L2-represented gradient (nodal array)."""
        c_values = np.asarray(getattr(c_values, "values", c_values), dtype=float)
        self._check_bounds(c_values)
        stepper = self._stepper(c_values)
        u = stepper.run()
        e_mis, r = self._misfit_energy(stepper, u)
        lam = _adjoint_sweep(stepper, -r, self.weights)   # load carries (g - v)
        # exact derivative of the discrete misfit: adjoint against the second
        # time difference of the state, plus the first-step term
        du2 = u[2:] - 2.0 * u[1:-1] + u[:-2]
        S = np.einsum("kn,kn->n", lam[2:], du2) + 2.0 * lam[1] * u[1]
        grad_eucl = self.alpha * (self._mass @ (c_values - self.c_glob))
        grad_eucl += stepper.V * S / (self.dt * self.dt)
        grad_l2 = self.mesh.mass_solve(grad_eucl)
        return e_mis + self._reg(c_values), grad_l2


def evaluate(c: CoefficientField, g: BoundaryTraceMatrix, c_glob, alpha,
             cutoff: CutoffSpec, cfg: WaveConfig) -> EvalResult:
    """Tikhonov functional at c; returns the value with the state trace and
    history for reuse."""
    obj = TikhonovObjective(c.mesh, g, c_glob, alpha, cfg, cutoff, c.bounds)
    return obj.evaluate(c.values)


def gradient(c: CoefficientField, g: BoundaryTraceMatrix, c_glob, alpha,
             cutoff: CutoffSpec, cfg: WaveConfig) -> NodalField:
    """L2-represented gradient of the Tikhonov functional at c."""
    obj = TikhonovObjective(c.mesh, g, c_glob, alpha, cfg, cutoff, c.bounds)
    _, grad = obj.value_and_gradient(c.values)
    return NodalField(c.mesh, grad)
