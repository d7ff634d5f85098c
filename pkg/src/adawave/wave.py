"""Explicit time-stepping P1 solver for c(x) u_tt = div(grad u).

Central-difference leapfrog with a coefficient-weighted lumped mass matrix,
so each step is a diagonal solve.  Side conditions:

  'source'        Neumann pulse f(t) while the pulse is active, then a
                  first-order absorbing condition d_n u = -u_t.
  'absorbing'     first-order absorbing for all t.
  'neumann_zero'  homogeneous Neumann.
  'neumann_data'  nodal Neumann flux supplied per time step.

The absorbing term enters through a lumped boundary mass matrix multiplying
(u^{k+1} - u^{k-1}) / (2 dt), which keeps the update explicit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConfigError, MeshError, NumericalError
from .mesh import TriMesh

_CONDITIONS = ("source", "absorbing", "neumann_zero", "neumann_data")


@dataclass(frozen=True)
class SourcePulse:
    """One-period raised-sine Neumann pulse, f(t) = A [sin(w t - pi/2) + 1]."""

    amplitude: float = 0.1
    angular_frequency: float = 7.45

    @property
    def t1(self):
        return 2.0 * np.pi / self.angular_frequency

    def __call__(self, t):
        if 0.0 <= t <= self.t1:
            return self.amplitude * (np.sin(self.angular_frequency * t - np.pi / 2) + 1.0)
        return 0.0


@dataclass
class WaveConfig:
    t_final: float
    dt: float | None = None          # None: choose from the CFL bound
    cfl_safety: float = 0.5
    source: SourcePulse = field(default_factory=SourcePulse)
    bc_map: dict = field(default_factory=lambda: {
        "top": "source", "bottom": "absorbing",
        "left": "neumann_zero", "right": "neumann_zero"})

    def validate(self, mesh=None):
        if self.t_final <= 0:
            raise ConfigError("t_final must be positive")
        if not (0 < self.cfl_safety <= 1):
            raise ConfigError("cfl_safety must lie in (0, 1]")
        for side, cond in self.bc_map.items():
            if cond not in _CONDITIONS:
                raise ConfigError(f"unknown boundary condition '{cond}' on side '{side}'")


@dataclass
class WaveHistory:
    """Full space-time solution: one nodal snapshot per time step."""

    mesh: TriMesh
    snapshots: np.ndarray        # (n_steps + 1, n_nodes)
    dt: float
    n_steps: int

    @property
    def times(self):
        return self.dt * np.arange(self.n_steps + 1)


@dataclass
class BoundaryTraceMatrix:
    """Detector-by-timestep samples of the wave field on the boundary."""

    times: np.ndarray            # (nt,), strictly increasing
    node_ids: np.ndarray         # (nd,)
    coords: np.ndarray           # (nd, 2)
    values: np.ndarray           # (nd, nt)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.node_ids = np.asarray(self.node_ids, dtype=np.int64)
        self.coords = np.asarray(self.coords, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ConfigError("trace time samples must be strictly increasing")
        if self.values.shape != (len(self.node_ids), len(self.times)):
            raise ConfigError("trace value matrix shape mismatch")
        if self.coords.shape != (len(self.node_ids), 2):
            raise ConfigError("trace coords shape mismatch")

    def save_csv(self, path):
        with open(path, "w") as f:
            f.write("t, " + ", ".join(str(i) for i in self.node_ids) + "\n")
            for j, t in enumerate(self.times):
                row = ", ".join(repr(float(v)) for v in self.values[:, j])
                f.write(f"{float(t)!r}, {row}\n")

    @classmethod
    def load_csv(cls, path, mesh: TriMesh):
        with open(path) as f:
            header = f.readline().strip().split(",")
            ids = np.array([int(tok) for tok in header[1:]], dtype=np.int64)
            rows = [[float(tok) for tok in line.split(",")] for line in f if line.strip()]
        data = np.array(rows)
        return cls(times=data[:, 0], node_ids=ids, coords=mesh.nodes[ids],
                   values=data[:, 1:].T)

    def resample(self, target_coords, target_times, domain):
        """Linear interpolation to new boundary points and sample instants.

        Spatial interpolation runs independently along each side of the
        rectangular `domain` = (x0, x1, y0, y1); corners are shared.
        """
        target_coords = np.asarray(target_coords, dtype=float)
        target_times = np.asarray(target_times, dtype=float)
        x0, x1, y0, y1 = map(float, domain)
        tol = 1e-9 * max(x1 - x0, y1 - y0)

        def side_mask(coords, side):
            x, y = coords[:, 0], coords[:, 1]
            if side == "bottom":
                return np.abs(y - y0) <= tol
            if side == "top":
                return np.abs(y - y1) <= tol
            if side == "left":
                return np.abs(x - x0) <= tol
            return np.abs(x - x1) <= tol

        space = np.full((len(target_coords), self.values.shape[1]), np.nan)
        filled = np.zeros(len(target_coords), dtype=bool)
        for side in ("bottom", "top", "left", "right"):
            src = np.nonzero(side_mask(self.coords, side))[0]
            tgt = np.nonzero(side_mask(target_coords, side) & ~filled)[0]
            if len(tgt) == 0:
                continue
            if len(src) < 2:
                raise MeshError(f"trace has fewer than two detectors on side '{side}'")
            axis = 0 if side in ("bottom", "top") else 1
            order = np.argsort(self.coords[src, axis])
            src = src[order]
            s = self.coords[src, axis]
            q = np.clip(target_coords[tgt, axis], s[0], s[-1])
            hi = np.clip(np.searchsorted(s, q), 1, len(s) - 1)
            lo = hi - 1
            w = (q - s[lo]) / (s[hi] - s[lo])
            space[tgt] = ((1 - w)[:, None] * self.values[src[lo]]
                          + w[:, None] * self.values[src[hi]])
            filled[tgt] = True
        if not filled.all():
            raise MeshError("target point not on any side of the domain rectangle")

        tq = np.clip(target_times, self.times[0], self.times[-1])
        hi = np.clip(np.searchsorted(self.times, tq), 1, len(self.times) - 1)
        lo = hi - 1
        w = (tq - self.times[lo]) / (self.times[hi] - self.times[lo])
        out = (1 - w)[None, :] * space[:, lo] + w[None, :] * space[:, hi]
        return out


# -- boundary assembly ------------------------------------------------------

def boundary_mass(mesh: TriMesh):
    """Consistent 1D mass matrix over all boundary edges.

    Returns (sorted boundary node ids, sparse matrix in that ordering).
    """
    b_ids = mesh.boundary_nodes()
    pos = {int(n): i for i, n in enumerate(b_ids)}
    rows, cols, vals = [], [], []
    for i, j, _ in mesh.boundary_edges:
        L = float(np.linalg.norm(mesh.nodes[i] - mesh.nodes[j]))
        a, b = pos[i], pos[j]
        rows += [a, a, b, b]
        cols += [a, b, a, b]
        vals += [L / 3.0, L / 6.0, L / 6.0, L / 3.0]
    M = sp.csr_matrix((vals, (rows, cols)), shape=(len(b_ids), len(b_ids)))
    return b_ids, M


def _side_lumped(mesh: TriMesh, labels):
    """Diagonal (full-size) lumped boundary mass over the given side labels."""
    d = np.zeros(mesh.n_nodes)
    for i, j, lab in mesh.boundary_edges:
        if lab in labels:
            L = float(np.linalg.norm(mesh.nodes[i] - mesh.nodes[j]))
            d[i] += 0.5 * L
            d[j] += 0.5 * L
    return d


def stable_dt(mesh: TriMesh, c_min: float, cfg: WaveConfig):
    """Largest safe time step: the configured CFL formula capped by a
    power-iteration estimate of the stiffness/mass spectral bound."""
    formula = cfg.cfl_safety * mesh.h_min * np.sqrt(c_min)
    A = mesh.stiffness_matrix()
    d = mesh.lumped_volumes() * c_min
    x = np.ones(mesh.n_nodes) + 1e-3 * np.arange(mesh.n_nodes) / mesh.n_nodes
    lam = 1.0
    for _ in range(40):
        y = A @ x / d
        lam = float(np.linalg.norm(y))
        if lam == 0:
            return formula
        x = y / lam
    spectral = 0.9 * 2.0 / np.sqrt(1.05 * lam)
    return min(formula, spectral)


def resolve_time_grid(mesh: TriMesh, c_min: float, cfg: WaveConfig):
    """(dt, n_steps) with n_steps * dt == t_final exactly."""
    dt = cfg.dt if cfg.dt is not None else stable_dt(mesh, c_min, cfg)
    if cfg.dt is not None:
        bound = cfg.cfl_safety * mesh.h_min * np.sqrt(c_min)
        if cfg.dt > bound * (1 + 1e-12):
            raise ConfigError(
                f"dt = {cfg.dt:g} violates the CFL bound {bound:g}")
    n_steps = int(np.ceil(cfg.t_final / dt - 1e-12))
    return cfg.t_final / n_steps, n_steps


class _Stepper:
    """Assembled operators for one (mesh, coefficient, config) triple."""

    def __init__(self, mesh, c_values, cfg, dt, n_steps):
        cfg.validate()
        self.mesh = mesh
        self.cfg = cfg
        self.dt = float(dt)
        self.n_steps = int(n_steps)
        self.c = np.asarray(c_values, dtype=float)
        if self.c.shape != (mesh.n_nodes,):
            raise MeshError("coefficient length does not match mesh")
        self.A = mesh.stiffness_matrix()
        self.V = mesh.lumped_volumes()
        self.m = self.V * self.c
        labels = set(lab for _, _, lab in mesh.boundary_edges)
        for side in cfg.bc_map:
            if side not in labels:
                raise ConfigError(f"bc side '{side}' not present on the mesh")
        src_sides = [s for s, c_ in cfg.bc_map.items() if c_ == "source"]
        abs_sides = [s for s, c_ in cfg.bc_map.items() if c_ == "absorbing"]
        self.damp_static = _side_lumped(mesh, abs_sides)
        self.damp_switch = _side_lumped(mesh, src_sides)
        self.src_vec = _side_lumped(mesh, src_sides)  # int phi_i ds on source sides
        self.b_ids, self.MS = boundary_mass(mesh)
        self._ms_lu = None

    def damping(self, k):
        """Diagonal damping at step k (source sides absorb once the pulse ends)."""
        t = k * self.dt
        if t > self.cfg.source.t1 + 1e-12:
            return self.damp_static + self.damp_switch
        return self.damp_static

    def load(self, k, neumann=None, interior=None):
        """Assembled load vector F^k."""
        F = np.zeros(self.mesh.n_nodes)
        ft = self.cfg.source(k * self.dt)
        if ft != 0.0:
            F += ft * self.src_vec
        if neumann is not None:
            F[self.b_ids] += self.MS @ neumann[:, k]
        if interior is not None:
            F += interior[k]
        return F

    def boundary_mass_solve(self, rhs):
        if self._ms_lu is None:
            self._ms_lu = splu(self.MS.tocsc())
        return self._ms_lu.solve(rhs)

    def run(self, u0=None, v0=None, neumann=None, interior=None, use_bc=True):
        """March the leapfrog scheme; returns the (K+1, N) snapshot array.

        With use_bc=False the source and absorbing terms are dropped and the
        field is driven purely by the supplied loads (measured-flux mode).
        """
        N, K, dt = self.mesh.n_nodes, self.n_steps, self.dt
        u = np.zeros((K + 1, N))
        if u0 is not None:
            u[0] = u0
        v0 = np.zeros(N) if v0 is None else np.asarray(v0, dtype=float)

        def damping(k):
            return self.damping(k) if use_bc else np.zeros(N)

        def load(k):
            if use_bc:
                return self.load(k, neumann=neumann, interior=interior)
            F = np.zeros(N)
            if neumann is not None:
                F[self.b_ids] += self.MS @ neumann[:, k]
            if interior is not None:
                F += interior[k]
            return F

        inv2m = dt * dt / (2.0 * self.m)
        u[1] = u[0] + dt * v0 + inv2m * (load(0) - self.A @ u[0] - damping(0) * v0)
        for k in range(1, K):
            Ck = damping(k) / (2.0 * dt)
            mdt2 = self.m / (dt * dt)
            rhs = (2.0 * mdt2) * u[k] - self.A @ u[k] - (mdt2 - Ck) * u[k - 1] + load(k)
            u[k + 1] = rhs / (mdt2 + Ck)
            if k % 50 == 0 and not np.isfinite(u[k + 1]).all():
                raise NumericalError(f"solution diverged at step {k + 1}", step=k + 1)
        if not np.isfinite(u[K]).all():
            raise NumericalError("solution diverged at the final step", step=K)
        return u


def solve_forward(mesh: TriMesh, c, cfg: WaveConfig, u0=None, v0=None) -> WaveHistory:
    """Forward simulation with the configured side conditions.

    `c` may be a CoefficientField, NodalField or plain array.  Optional u0/v0
    give the direct initial-condition mode (energy tests, smoothed point
    source); boundary-driven problems keep homogeneous initial data.
    """
    c_values = getattr(c, "values", c)
    dt, n_steps = resolve_time_grid(mesh, float(np.min(c_values)), cfg)
    stepper = _Stepper(mesh, c_values, cfg, dt, n_steps)
    snaps = stepper.run(u0=u0, v0=v0)
    return WaveHistory(mesh=mesh, snapshots=snaps, dt=dt, n_steps=n_steps)


def solve_state(mesh: TriMesh, c, neumann_data: BoundaryTraceMatrix | None,
                cfg: WaveConfig, interior_load=None, dt=None, n_steps=None) -> WaveHistory:
    """State problem on the inversion domain.

    With `neumann_data` the measured flux drives all sides and the configured
    side conditions are ignored.  Without it the Test-1 side configuration of
    `cfg.bc_map` is reused inside the domain (the simplified mode; callers
    record the choice in their run manifest).
    """
    c_values = getattr(c, "values", c)
    if dt is None or n_steps is None:
        dt, n_steps = resolve_time_grid(mesh, float(np.min(c_values)), cfg)
    stepper = _Stepper(mesh, c_values, cfg, dt, n_steps)
    neumann = None
    use_bc = True
    if neumann_data is not None:
        times = dt * np.arange(n_steps + 1)
        if (len(neumann_data.times) != len(times)
                or not np.allclose(neumann_data.times, times, atol=1e-9 * dt)):
            raise ConfigError("neumann data time grid does not match the solver; resample first")
        if not np.array_equal(neumann_data.node_ids, stepper.b_ids):
            raise ConfigError("neumann data detectors must be the mesh boundary nodes")
        neumann = neumann_data.values
        use_bc = False
    snaps = stepper.run(neumann=neumann, interior=interior_load, use_bc=use_bc)
    return WaveHistory(mesh=mesh, snapshots=snaps, dt=dt, n_steps=n_steps)


def extract_trace(history: WaveHistory, detectors, sample_dt=None) -> BoundaryTraceMatrix:
    """Sample nodal values at boundary detectors, nearest step in time."""
    mesh = history.mesh
    detectors = np.asarray(sorted(int(d) for d in detectors), dtype=np.int64)
    bset = set(int(n) for n in mesh.boundary_nodes())
    for d in detectors:
        if int(d) not in bset:
            raise MeshError(f"detector {d} is not a boundary node")
    if sample_dt is None:
        idx = np.arange(history.n_steps + 1)
    else:
        if sample_dt < history.dt * (1 - 1e-12):
            raise ConfigError("sample_dt must be at least the solver dt")
        n = int(np.floor(history.n_steps * history.dt / sample_dt + 1e-9))
        idx = np.unique(np.rint(np.arange(n + 1) * sample_dt / history.dt).astype(int))
        idx = idx[idx <= history.n_steps]
    return BoundaryTraceMatrix(
        times=history.dt * idx,
        node_ids=detectors,
        coords=mesh.nodes[detectors],
        values=history.snapshots[np.ix_(idx, detectors)].T)


def equivalent_neumann_trace(mesh: TriMesh, c, cfg: WaveConfig,
                             history: WaveHistory) -> BoundaryTraceMatrix:
    """Nodal Neumann flux that reproduces `history` when fed to solve_state.

    Converts the discrete boundary terms of the forward run (pulse load and
    absorbing damping) into pointwise flux samples via the boundary mass
    matrix, realizing the measured-flux pathway on matching grids.
    """
    c_values = getattr(c, "values", c)
    stepper = _Stepper(mesh, c_values, cfg, history.dt, history.n_steps)
    u = history.snapshots
    K = history.n_steps
    loads = np.zeros((len(stepper.b_ids), K + 1))
    for k in range(K + 1):
        F = stepper.load(k)
        if k == 0:
            damp_term = stepper.damping(0) * 0.0   # zero initial velocity
        elif k < K:
            damp_term = stepper.damping(k) * (u[k + 1] - u[k - 1]) / (2 * history.dt)
        else:
            damp_term = None   # last load never enters the march
        if damp_term is not None:
            L = (F - damp_term)[stepper.b_ids]
            loads[:, k] = stepper.boundary_mass_solve(L)
    return BoundaryTraceMatrix(
        times=history.dt * np.arange(K + 1),
        node_ids=stepper.b_ids,
        coords=mesh.nodes[stepper.b_ids],
        values=loads)


def discrete_energy(history: WaveHistory, c) -> np.ndarray:
    """Energy trace 0.5 (u_t, M_c u_t) + 0.5 (u, A u) at half steps."""
    c_values = getattr(c, "values", c)
    mesh = history.mesh
    A = mesh.stiffness_matrix()
    m = mesh.lumped_volumes() * np.asarray(c_values, dtype=float)
    u = history.snapshots
    ut = (u[1:] - u[:-1]) / history.dt
    kin = 0.5 * np.einsum("kn,n,kn->k", ut, m, ut)
    umid = 0.5 * (u[1:] + u[:-1])
    pot = 0.5 * np.einsum("kn,kn->k", umid, (A @ umid.T).T)
    return kin + pot


def point_source_velocity(mesh: TriMesh, x0, kappa) -> np.ndarray:
    """Nodal initial velocity for the smoothed point source delta_kappa."""
    from scipy.integrate import quad
    kappa = float(kappa)
    if kappa <= 0:
        raise ConfigError("kappa must be positive")
    mass, _ = quad(lambda r: np.exp(1.0 / (r * r - kappa * kappa)) * 2 * np.pi * r,
                   0.0, kappa)
    r = np.linalg.norm(mesh.nodes - np.asarray(x0, dtype=float), axis=1)
    out = np.zeros(mesh.n_nodes)
    inside = r < kappa
    out[inside] = np.exp(1.0 / (r[inside] ** 2 - kappa ** 2)) / mass
    return out
