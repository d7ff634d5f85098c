"""Synthetic test-problem construction: exact coefficient, simulated boundary
data on an independent grid, multiplicative time-indexed noise, and a
degraded stand-in for the first-stage reconstruction used as the prior.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .errors import ConfigError
from .mesh import TriMesh, load_field
from .objective import CoefficientBounds, CoefficientField
from .wave import BoundaryTraceMatrix, WaveConfig, extract_trace, solve_forward


@dataclass(frozen=True)
class Inclusion:
    """Axis-aligned square of constant coefficient value."""

    center: tuple
    side: float = 0.5
    value: float = 4.0

    def bbox(self):
        cx, cy = self.center
        h = 0.5 * self.side
        return cx - h, cx + h, cy - h, cy + h


@dataclass(frozen=True)
class Phantom:
    """Exact coefficient: unit background outside the target domain, a slow
    sine bump inside it, and constant-value squares."""

    domain: tuple = (-3.0, 3.0, -3.0, 3.0)
    inclusions: tuple = (Inclusion((-1.5, 1.0)), Inclusion((1.5, 1.0)))
    background_amplitude: float = 0.5
    background_scale: float = 2.875

    def background(self, points):
        """1 + b(x) inside the domain, 1 outside; b vanishes on the lower-left
        quadrant of the scale square."""
        pts = np.atleast_2d(points)
        x, y = pts[:, 0], pts[:, 1]
        x0, x1, y0, y1 = self.domain
        s = self.background_scale
        b = (self.background_amplitude
             * np.sin(np.pi * x / s) ** 2 * np.sin(np.pi * y / s) ** 2)
        quadrant = (x > -s) & (x < 0.0) & (y > -s) & (y < 0.0)
        b[quadrant] = 0.0
        inside = (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
        return np.where(inside, 1.0 + b, 1.0)

    def __call__(self, points):
        pts = np.atleast_2d(points)
        vals = self.background(pts)
        x, y = pts[:, 0], pts[:, 1]
        for inc in self.inclusions:
            ax0, ax1, ay0, ay1 = inc.bbox()
            hit = (x >= ax0) & (x <= ax1) & (y >= ay0) & (y <= ay1)
            vals = np.where(hit, inc.value, vals)
        return vals

    @property
    def d(self):
        return max(inc.value for inc in self.inclusions)

    def bounds(self, omega=0.2):
        return CoefficientBounds(d=self.d, omega=omega)


@dataclass(frozen=True)
class NoiseSpec:
    """Multiplicative noise g_ij * (1 + level * a_j * (g_max - g_min)) with
    a_j drawn uniformly from [-1, 1] once per time index (shared across
    detectors); per_sample=True draws an independent a_ij per entry."""

    level: float = 0.02
    seed: int = 0
    per_sample: bool = False

    def __post_init__(self):
        if self.level < 0:
            raise ConfigError("noise level must be nonnegative")


def sample_phantom(phantom: Phantom, mesh: TriMesh, omega=0.2) -> CoefficientField:
    """Nodal sampling; square borders belong to the square."""
    return CoefficientField(mesh, phantom(mesh.nodes), phantom.bounds(omega))


def generate_data(phantom: Phantom, sim_mesh: TriMesh, cfg: WaveConfig,
                  omega=0.2, sample_dt=None) -> BoundaryTraceMatrix:
    """Forward-simulate the exact coefficient on `sim_mesh` and record the
    boundary trace.  The returned trace carries the simulation mesh checksum
    so the inversion can enforce grid disjointness (no inverse crime)."""
    c_exact = sample_phantom(phantom, sim_mesh, omega=omega)
    history = solve_forward(sim_mesh, c_exact, cfg)
    trace = extract_trace(history, sim_mesh.boundary_nodes(), sample_dt=sample_dt)
    trace.source_checksum = sim_mesh.checksum
    return trace


def add_noise(g: BoundaryTraceMatrix, spec: NoiseSpec) -> BoundaryTraceMatrix:
    if spec.level == 0:
        factors = np.ones_like(g.values)
    else:
        rng = np.random.default_rng(spec.seed)
        g_span = float(g.values.max() - g.values.min())
        if spec.per_sample:
            a = rng.uniform(-1.0, 1.0, g.values.shape)
        else:
            a = rng.uniform(-1.0, 1.0, g.values.shape[1])[None, :]
        factors = 1.0 + spec.level * a * g_span
    noisy = BoundaryTraceMatrix(times=g.times.copy(), node_ids=g.node_ids.copy(),
                                coords=g.coords.copy(), values=g.values * factors)
    noisy.source_checksum = getattr(g, "source_checksum", None)
    return noisy


def _smoothed_square(points, bbox, sigma):
    x, y = points[:, 0], points[:, 1]
    ax0, ax1, ay0, ay1 = bbox
    if sigma == 0:
        return ((x >= ax0) & (x <= ax1) & (y >= ay0) & (y <= ay1)).astype(float)
    s = sigma * np.sqrt(2.0)
    return 0.25 * ((erf((x - ax0) / s) - erf((x - ax1) / s))
                   * (erf((y - ay0) / s) - erf((y - ay1) / s)))


def make_c_glob(phantom: Phantom, mesh: TriMesh, mode="blur", sigma=0.4,
                target_max=3.2, scale=None, shift=(0.0, 0.0), shift_inclusion=0,
                omega=0.2, path=None) -> CoefficientField:
    """Degraded approximation of the exact coefficient, standing in for the
    first-stage output.

    blur     Gaussian-smeared inclusions on the exact background, rescaled so
             the nodal peak hits `target_max` (or multiplied by an explicit
             `scale`; sigma=0 and scale=1 reproduce the phantom sampling).
    shifted  blur with one inclusion displaced by `shift` before smearing.
    file     a previously saved nodal field (checksum-checked against mesh).
    """
    if mode == "file":
        if path is None:
            raise ConfigError("mode='file' requires a path")
        f = load_field(path, mesh)
        return CoefficientField(mesh, f.values, phantom.bounds(omega))
    if mode not in ("blur", "shifted"):
        raise ConfigError(f"unknown c_glob mode '{mode}'")

    inclusions = list(phantom.inclusions)
    if mode == "shifted":
        inc = inclusions[shift_inclusion]
        moved = Inclusion((inc.center[0] + shift[0], inc.center[1] + shift[1]),
                          inc.side, inc.value)
        inclusions[shift_inclusion] = moved

    pts = mesh.nodes
    vals = phantom.background(pts)
    for inc in inclusions:
        bump = _smoothed_square(pts, inc.bbox(), sigma)
        vals = vals + (inc.value - vals) * bump
    if scale is None:
        peak = float(vals.max())
        if peak <= 1.0:
            raise ConfigError("degraded field has no peak to rescale")
        scale = (target_max - 1.0) / (peak - 1.0)
    out = 1.0 + (vals - 1.0) * scale
    return CoefficientField(mesh, out, phantom.bounds(omega))
