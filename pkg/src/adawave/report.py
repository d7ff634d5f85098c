"""Report generation for completed runs: summary tables as CSV plus rendered
figures (relaxation ratios, convergence, coefficient slices and heat map)."""

from __future__ import annotations

import os

import numpy as np
import yaml

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import ConfigError
from .mesh import NodalField, load_field, load_mesh


def _load_run(run_dir):
    manifest_path = os.path.join(run_dir, "manifest.yaml")
    if not os.path.exists(manifest_path):
        raise ConfigError(f"{run_dir} does not look like a run directory "
                          f"(missing manifest.yaml)")
    with open(manifest_path) as f:
        manifest = yaml.safe_load(f)
    if "result" not in manifest:
        raise ConfigError("run manifest has no result block (incomplete run)")
    return manifest


def _read_run_csv(run_dir):
    rows = []
    with open(os.path.join(run_dir, "run.csv")) as f:
        header = [h.strip() for h in f.readline().split(",")]
        for line in f:
            parts = [p.strip() for p in line.split(",")]
            if len(parts) < len(header):
                continue
            rows.append(dict(zip(header, parts)))
    return rows


def write_report(run_dir, out_dir, slice_y=None, slice_points=241):
    """Emit eta.csv, convergence.csv, a coefficient slice and figures."""
    manifest = _load_run(run_dir)
    result = manifest["result"]
    os.makedirs(out_dir, exist_ok=True)

    eta = result.get("eta", [])
    eta_online = result.get("eta_online", [])
    with open(os.path.join(out_dir, "eta.csv"), "w") as f:
        f.write("transition, eta, eta_online\n")
        for i in range(max(len(eta), len(eta_online))):
            e = repr(eta[i]) if i < len(eta) else ""
            eo = repr(eta_online[i]) if i < len(eta_online) else ""
            f.write(f"{i + 1}, {e}, {eo}\n")

    rows = _read_run_csv(run_dir)
    distances = result.get("distances", [])
    with open(os.path.join(out_dir, "convergence.csv"), "w") as f:
        f.write("level, elements, E, grad_norm, aposteriori_bound, distance_to_ref\n")
        for i, row in enumerate(rows):
            d = repr(distances[i]) if i < len(distances) else ""
            f.write(f"{row['level']}, {row['elements']}, {row['E']}, "
                    f"{row['grad_norm']}, {row['aposteriori_bound']}, {d}\n")

    final_level = int(result["c_final_level"])
    lvl_dir = os.path.join(run_dir, f"level_{final_level}")
    mesh = load_mesh(os.path.join(lvl_dir, "mesh.txt"))
    c = load_field(os.path.join(lvl_dir, "c.txt"), mesh)

    domain = manifest["config"]["domain"]
    if slice_y is None:
        incs = manifest["config"]["phantom"]["inclusions"]
        slice_y = float(incs[0]["center"][1]) if incs else 0.5 * (domain[2] + domain[3])
    xs = np.linspace(domain[0], domain[1], slice_points)
    pts = np.column_stack([xs, np.full_like(xs, slice_y)])
    cs = c(pts)
    slice_name = f"slice_y={slice_y:g}"
    with open(os.path.join(out_dir, slice_name + ".csv"), "w") as f:
        f.write("x, c\n")
        for x, v in zip(xs, cs):
            f.write(f"{float(x)!r}, {float(v)!r}\n")

    _fig_eta(eta, eta_online, os.path.join(out_dir, "eta.png"))
    _fig_convergence(rows, distances, os.path.join(out_dir, "convergence.png"))
    _fig_slice(xs, cs, slice_y, os.path.join(out_dir, slice_name + ".png"))
    _fig_field(mesh, c.values, os.path.join(out_dir, "c_final.png"),
               title=f"reconstructed coefficient, level {final_level}")
    return out_dir


def _fig_eta(eta, eta_online, path):
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    if eta:
        ax.plot(range(1, len(eta) + 1), eta, "o-", label="vs final-level reference")
    if eta_online:
        ax.plot(range(2, len(eta_online) + 2), eta_online, "s--",
                label="consecutive differences")
    ax.axhline(1.0, color="gray", lw=0.8)
    ax.set_xlabel("refinement transition n")
    ax.set_ylabel(r"relaxation ratio $\eta_n$")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _fig_convergence(rows, distances, path):
    fig, axes = plt.subplots(1, 2, figsize=(8.2, 3.4))
    levels = [int(r["level"]) for r in rows]
    axes[0].semilogy(levels, [float(r["E"]) for r in rows], "o-", label="E")
    axes[0].semilogy(levels, [float(r["grad_norm"]) for r in rows], "s--",
                     label="|gradient|")
    axes[0].set_xlabel("level")
    axes[0].legend(fontsize=8)
    if distances:
        axes[1].semilogy(range(1, len(distances) + 1), distances, "o-")
    axes[1].set_xlabel("level n")
    axes[1].set_ylabel(r"$\|c_n - c_{ref}\|_{L_2}$")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _fig_slice(xs, cs, slice_y, path):
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.plot(xs, cs, "-")
    ax.set_xlabel("x")
    ax.set_ylabel(f"c(x, y={slice_y:g})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _fig_field(mesh, values, path, title=""):
    fig, ax = plt.subplots(figsize=(5.4, 4.6))
    t = ax.tricontourf(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.triangles,
                       values, levels=24, cmap="viridis")
    fig.colorbar(t, ax=ax, shrink=0.9)
    ax.triplot(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.triangles,
               color="k", lw=0.1, alpha=0.35)
    ax.set_aspect("equal")
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
