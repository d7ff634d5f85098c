"""Outer adaptive loop: minimize on a mesh, mark by indicator, refine
locally, transfer fields, and track the relaxation ratios that drive the
stopping rule.

Marking follows two thresholding recommendations: by the magnitude of the
gradient of the objective, and optionally by the magnitude of the coefficient
itself; a triangle is marked when any of its vertices qualifies.  The run
records, per refinement transition, the ratio

    eta_n = |c_{n+1} - c_ref| / |c_n - c_ref|   (L2, on the finest mesh)

against a reference minimizer.  Retrospective mode runs all levels, takes the
final minimizer as reference and then picks the stopping index as the first
rise of eta; online mode uses consecutive-difference ratios and stops as soon
as they increase.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .adjoint import CutoffSpec
from .errors import ConfigError, InverseCrimeError
from .mesh import NodalField, TriMesh, l2_norm, save_field, save_mesh
from .objective import (CoefficientBounds, CoefficientField, RegularizationPolicy,
                        TikhonovObjective, aposteriori_bound)
from .optimize import OptimizeSettings, minimize_on_mesh
from .wave import BoundaryTraceMatrix, WaveConfig, resolve_time_grid


@dataclass
class RefineSettings:
    beta1: float = 0.2
    beta2: float = 0.6
    use_second: bool = False
    refine_region: tuple | None = None   # (x0, x1, y0, y1) restriction
    max_refinements: int = 4
    growth_factor: float = 1.6           # locality watermark per refinement
    eta_tie_tol: float = 0.05
    mode: str = "retrospective"          # or "online"

    def validate(self):
        for name, b in (("beta1", self.beta1), ("beta2", self.beta2)):
            if not (0.0 < b < 1.0):
                raise ConfigError(f"{name} must lie strictly inside (0, 1)")
        if self.max_refinements < 0:
            raise ConfigError("max_refinements must be nonnegative")
        if self.mode not in ("retrospective", "online"):
            raise ConfigError(f"unknown adaptive mode '{self.mode}'")


@dataclass
class LevelRecord:
    level: int
    mesh: TriMesh
    c_values: np.ndarray
    value: float
    grad_norm: float
    aposteriori: float
    n_elements: int
    iterations: list
    opt_reason: str
    grad_values: np.ndarray
    grad_linf_h: float


@dataclass
class AdaptiveRun:
    levels: list
    eta: list                    # retrospective ratios, eta[i]: level i+1 -> i+2
    eta_online: list             # consecutive-difference ratios
    distances: list              # |c_n - c_ref| on the finest mesh
    reference_choice: str
    stopped_at: int              # stopping index n0 (level numbering), 0 if none
    stop_reason: str
    c_final_level: int
    growth: list
    warnings: list = field(default_factory=list)

    @property
    def c_final(self):
        return self.levels[self.c_final_level - 1].c_values

    @property
    def final_mesh(self):
        return self.levels[self.c_final_level - 1].mesh


def _region_triangle_mask(mesh: TriMesh, region):
    if region is None:
        return np.ones(mesh.n_triangles, dtype=bool)
    x0, x1, y0, y1 = region
    c = mesh.centroids()
    return (c[:, 0] >= x0) & (c[:, 0] <= x1) & (c[:, 1] >= y0) & (c[:, 1] <= y1)


def _mark(mesh: TriMesh, node_values, beta, region, absolute):
    vals = np.abs(node_values) if absolute else np.asarray(node_values, dtype=float)
    per_tri = vals[mesh.triangles].max(axis=1)
    mask = _region_triangle_mask(mesh, region)
    if not mask.any():
        return set()
    peak = per_tri[mask].max()
    if peak <= 0:
        return set()
    hits = np.nonzero(mask & (per_tri >= beta * peak))[0]
    return set(int(t) for t in hits)


def indicator_gradient(grad_field: NodalField, beta1: float, region=None) -> set:
    """Triangles where |E'(c)| reaches beta1 times its regional maximum."""
    return _mark(grad_field.mesh, grad_field.values, beta1, region, absolute=True)


def indicator_coefficient(c_field, beta2: float, region=None) -> set:
    """Triangles where the coefficient reaches beta2 times its regional maximum."""
    mesh = c_field.mesh
    values = getattr(c_field, "values", c_field)
    return _mark(mesh, values, beta2, region, absolute=False)


def _prolong_to(values, src_mesh: TriMesh, dst_mesh: TriMesh):
    chain = dst_mesh.lineage()
    out = np.asarray(values, dtype=float)
    for m in chain[chain.index(src_mesh) + 1:]:
        out = m.prolong(out)
    return out


def run_adaptive(c_glob: CoefficientField, data: BoundaryTraceMatrix,
                 settings: RefineSettings, opt: OptimizeSettings,
                 policy: RegularizationPolicy, cfg: WaveConfig,
                 cutoff: CutoffSpec, data_checksum=None) -> AdaptiveRun:
    """Full adaptive reconstruction starting from the first-stage field.

    `data` is the (possibly noisy) boundary trace from the simulation grid;
    it is resampled onto each level's boundary nodes and time grid.  The
    inverse-crime guard refuses any inversion mesh whose checksum equals
    `data_checksum` (defaults to the checksum recorded on the trace).
    """
    settings.validate()
    opt.validate()
    bounds = c_glob.bounds
    alpha = policy.alpha
    mesh = c_glob.mesh
    domain = (mesh.nodes[:, 0].min(), mesh.nodes[:, 0].max(),
              mesh.nodes[:, 1].min(), mesh.nodes[:, 1].max())
    if data_checksum is None:
        data_checksum = getattr(data, "source_checksum", None)

    c_glob_values = c_glob.values.copy()
    c_cur = c_glob_values.copy()
    levels = []
    eta_online = []
    growth = []
    warnings = []
    stop_reason = "max_refinements"

    while True:
        if data_checksum is not None and mesh.checksum == data_checksum:
            raise InverseCrimeError(
                f"inversion mesh collides with the data-generation mesh "
                f"(checksum {mesh.checksum[:12]})")
        dt, n_steps = resolve_time_grid(mesh, bounds.lower, cfg)
        times = dt * np.arange(n_steps + 1)
        b_ids = mesh.boundary_nodes()
        g_here = BoundaryTraceMatrix(
            times=times, node_ids=b_ids, coords=mesh.nodes[b_ids],
            values=data.resample(mesh.nodes[b_ids], times, domain))
        objective = TikhonovObjective(mesh, g_here, c_glob_values, alpha,
                                      cfg, cutoff, bounds)
        result = minimize_on_mesh(c_cur, objective, opt)
        grad_norm = float(np.sqrt(max(result.grad @ (mesh.mass_matrix() @ result.grad), 0.0)))
        eg = mesh.gradient_per_element(result.x)
        grad_linf_h = float(np.linalg.norm(eg, axis=1).max() * mesh.h_max)
        levels.append(LevelRecord(
            level=len(levels) + 1, mesh=mesh, c_values=result.x,
            value=result.value, grad_norm=grad_norm,
            aposteriori=aposteriori_bound(grad_norm, policy.delta, policy.mu),
            n_elements=mesh.n_triangles, iterations=result.history,
            opt_reason=result.reason, grad_values=result.grad,
            grad_linf_h=grad_linf_h))

        n = len(levels)
        if n >= 3:
            prev = levels[-2]
            prev2 = levels[-3]
            d1 = l2_norm(NodalField(mesh, result.x - _prolong_to(prev.c_values, prev.mesh, mesh)))
            d0 = l2_norm(NodalField(prev.mesh,
                                    prev.c_values - _prolong_to(prev2.c_values, prev2.mesh, prev.mesh)))
            eta_online.append(d1 / d0 if d0 > 0 else np.inf)
            if settings.mode == "online" and len(eta_online) >= 2 \
                    and eta_online[-1] > eta_online[-2]:
                stop_reason = "eta_online_increase"
                break

        if n > settings.max_refinements:
            stop_reason = "max_refinements"
            break

        marks = indicator_gradient(NodalField(mesh, result.grad),
                                   settings.beta1, settings.refine_region)
        if settings.use_second:
            marks = marks | indicator_coefficient(
                CoefficientField(mesh, result.x, bounds),
                settings.beta2, settings.refine_region)
        if not marks:
            stop_reason = "no_marks"
            break
        new_mesh = mesh.refine(marks)
        factor = new_mesh.n_triangles / mesh.n_triangles
        growth.append(factor)
        if factor > settings.growth_factor:
            warnings.append(
                f"level {n}: element growth {factor:.2f} exceeds "
                f"{settings.growth_factor:.2f}")
        c_glob_values = new_mesh.prolong(c_glob_values)
        c_cur = new_mesh.prolong(result.x)
        mesh = new_mesh

    # retrospective relaxation ratios against the final-level minimizer
    final = levels[-1]
    distances = []
    for rec in levels[:-1]:
        lifted = _prolong_to(rec.c_values, rec.mesh, final.mesh)
        distances.append(l2_norm(NodalField(final.mesh, lifted - final.c_values)))
    eta = []
    for i in range(len(distances) - 1):
        eta.append(distances[i + 1] / distances[i] if distances[i] > 0 else np.inf)

    stopped_at = 0
    c_final_level = len(levels)
    for i in range(1, len(eta)):
        if eta[i] > eta[i - 1]:
            stopped_at = i + 1          # eta index i corresponds to eta_{i+1}
            tie = abs(eta[i] - eta[i - 1]) <= settings.eta_tie_tol * eta[i - 1]
            c_final_level = stopped_at if tie else stopped_at + 1
            break
    if stopped_at and stop_reason == "max_refinements":
        stop_reason = "eta_increase"

    return AdaptiveRun(levels=levels, eta=eta, eta_online=eta_online,
                       distances=distances,
                       reference_choice=f"minimizer at level {final.level}",
                       stopped_at=stopped_at, stop_reason=stop_reason,
                       c_final_level=c_final_level, growth=growth,
                       warnings=warnings)


def write_run_artifacts(run: AdaptiveRun, out_dir, manifest: dict | None = None):
    """Per-level mesh/field/iteration files plus the top-level run.csv."""
    os.makedirs(out_dir, exist_ok=True)
    for rec in run.levels:
        lvl_dir = os.path.join(out_dir, f"level_{rec.level}")
        os.makedirs(lvl_dir, exist_ok=True)
        save_mesh(rec.mesh, os.path.join(lvl_dir, "mesh.txt"))
        save_field(NodalField(rec.mesh, rec.c_values), os.path.join(lvl_dir, "c.txt"))
        save_field(NodalField(rec.mesh, rec.grad_values),
                   os.path.join(lvl_dir, "gradient.txt"))
        with open(os.path.join(lvl_dir, "iters.csv"), "w") as f:
            f.write("iter, E, grad_norm, step, clamped_nodes\n")
            for r in rec.iterations:
                f.write(f"{r.iteration}, {r.value!r}, {r.grad_norm!r}, "
                        f"{r.step!r}, {r.clamped}\n")
    with open(os.path.join(out_dir, "run.csv"), "w") as f:
        f.write("level, elements, E, grad_norm, aposteriori_bound, eta\n")
        for i, rec in enumerate(run.levels):
            eta = repr(run.eta[i]) if i < len(run.eta) else ""
            f.write(f"{rec.level}, {rec.n_elements}, {rec.value!r}, "
                    f"{rec.grad_norm!r}, {rec.aposteriori!r}, {eta}\n")
    if manifest is not None:
        import yaml
        summary = dict(manifest)
        summary["result"] = {
            "levels": len(run.levels),
            "stopped_at": run.stopped_at,
            "stop_reason": run.stop_reason,
            "c_final_level": run.c_final_level,
            "reference_choice": run.reference_choice,
            "eta": [float(e) for e in run.eta],
            "eta_online": [float(e) for e in run.eta_online],
            "distances": [float(d) for d in run.distances],
            "growth": [float(g) for g in run.growth],
            "warnings": run.warnings,
        }
        with open(os.path.join(out_dir, "manifest.yaml"), "w") as f:
            yaml.safe_dump(summary, f, sort_keys=False)
