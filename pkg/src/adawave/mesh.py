"""Conforming 2D triangulations with nested local refinement and P1 fields.

A mesh hierarchy starts from a structured triangulation of an axis-aligned
rectangle and grows by red refinement of marked triangles with green-closure
bisections.  Every child triangle lies inside exactly one parent triangle, so
the piecewise-linear spaces are nested and coarse functions prolong exactly
onto finer meshes.  All L2 quantities use exact P1 quadrature.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import MeshError, MeshQualityError

# Shape bounds enforced on every generated mesh.  The diameter floor is an
# absolute guard against runaway refinement; the aspect bound admits the
# right-isosceles elements of the structured grid (h/r ~ 4.83) and the
# bisected closure elements they produce under deep local refinement.
DEFAULT_A1 = 1e-4
DEFAULT_A2 = 24.0
DEFAULT_CT = 64.0

_SIDES = ("bottom", "right", "top", "left")


def _edge_key(i, j):
    return (i, j) if i < j else (j, i)


class TriMesh:
    """Immutable conforming triangulation.

    Attributes
    ----------
    nodes : (N, 2) float array of vertex coordinates.
    triangles : (M, 3) int array of CCW vertex indices.
    boundary_edges : list of (i, j, label) with labels from
        {'bottom', 'right', 'top', 'left'}.
    elem_diameter : (M,) longest side per triangle.
    elem_inradius : (M,) inscribed-circle radius per triangle.
    level : refinement generation, 1 for a structured root mesh.
    parent : the coarser mesh this one refines, or None.
    parent_map : (M,) index of the parent triangle each child lies in.
    """

    def __init__(self, nodes, triangles, boundary_edges, level=1,
                 parent=None, parent_map=None, edge_origin=None,
                 green=None, a1=DEFAULT_A1, a2=DEFAULT_A2, ct=DEFAULT_CT):
        self.nodes = np.ascontiguousarray(nodes, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.boundary_edges = [(int(i), int(j), str(lab)) for i, j, lab in boundary_edges]
        self.level = int(level)
        self.parent = parent
        self.parent_map = None if parent_map is None else np.asarray(parent_map, dtype=np.int64)
        # For each node created by refinement: the pair of parent-mesh node
        # indices whose midpoint it is.  Enables exact nested prolongation.
        self.edge_origin = None if edge_origin is None else np.asarray(edge_origin, dtype=np.int64)
        self.green = (np.zeros(len(self.triangles), dtype=bool)
                      if green is None else np.asarray(green, dtype=bool))
        self.a1, self.a2, self.ct = float(a1), float(a2), float(ct)

        self._validate_geometry()
        self._mass = None
        self._mass_solve = None
        self._trifinder = None

    # -- geometry ---------------------------------------------------------

    def _validate_geometry(self):
        tri = self.triangles
        if tri.min() < 0 or tri.max() >= len(self.nodes):
            raise MeshError("triangle index out of range")
        p0 = self.nodes[tri[:, 0]]
        p1 = self.nodes[tri[:, 1]]
        p2 = self.nodes[tri[:, 2]]
        cross = ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                 - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))
        self.elem_area = 0.5 * cross
        if np.any(self.elem_area <= 0):
            raise MeshError("non-positive triangle area (orientation or degeneracy)")
        a = np.linalg.norm(p1 - p0, axis=1)
        b = np.linalg.norm(p2 - p1, axis=1)
        c = np.linalg.norm(p0 - p2, axis=1)
        self.elem_diameter = np.maximum(np.maximum(a, b), c)
        s = 0.5 * (a + b + c)
        self.elem_inradius = self.elem_area / s
        self.h_max = float(self.elem_diameter.max())
        self.h_min = float(self.elem_diameter.min())
        if self.h_min < self.a1:
            raise MeshQualityError(
                f"element diameter {self.h_min:.3e} below floor a1={self.a1:.3e}")
        ratio = self.elem_diameter / self.elem_inradius
        worst = float(ratio.max())
        if worst > self.a2:
            raise MeshQualityError(
                f"shape ratio h/r = {worst:.2f} exceeds a2 = {self.a2:.2f}")
        if self.h_max / self.h_min > self.ct:
            raise MeshQualityError(
                f"h_max/h_min = {self.h_max / self.h_min:.1f} exceeds c_T = {self.ct:.1f}")

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def checksum(self):
        h = hashlib.sha256()
        h.update(self.nodes.tobytes())
        h.update(self.triangles.tobytes())
        return h.hexdigest()

    def boundary_nodes(self):
        """Sorted indices of all nodes on the boundary."""
        ids = set()
        for i, j, _ in self.boundary_edges:
            ids.add(i)
            ids.add(j)
        return np.array(sorted(ids), dtype=np.int64)

    def side_edges(self, label):
        return [(i, j) for i, j, lab in self.boundary_edges if lab == label]

    def node_to_triangles(self):
        """List of incident triangle indices per node."""
        adj = [[] for _ in range(self.n_nodes)]
        for t, (i, j, k) in enumerate(self.triangles):
            adj[i].append(t)
            adj[j].append(t)
            adj[k].append(t)
        return adj

    def centroids(self):
        return self.nodes[self.triangles].mean(axis=1)

    # -- construction -----------------------------------------------------

    @classmethod
    def structured(cls, domain, target_h, **shape_kwargs):
        """Level-1 mesh of the rectangle `domain` = (x0, x1, y0, y1).

        Each cell of a regular quad grid is split along its diagonal into two
        triangles, so h_max <= sqrt(2) * target_h.
        """
        x0, x1, y0, y1 = map(float, domain)
        if not (x1 > x0 and y1 > y0):
            raise MeshError("degenerate rectangle")
        if target_h <= 0:
            raise MeshError("target_h must be positive")
        if target_h > min(x1 - x0, y1 - y0):
            raise MeshError("target_h larger than the shorter rectangle side")
        nx = int(np.ceil((x1 - x0) / target_h))
        ny = int(np.ceil((y1 - y0) / target_h))
        xs = np.linspace(x0, x1, nx + 1)
        ys = np.linspace(y0, y1, ny + 1)
        X, Y = np.meshgrid(xs, ys, indexing="xy")
        nodes = np.column_stack([X.ravel(), Y.ravel()])

        def nid(ix, iy):
            return iy * (nx + 1) + ix

        tris = []
        for iy in range(ny):
            for ix in range(nx):
                n00 = nid(ix, iy)
                n10 = nid(ix + 1, iy)
                n01 = nid(ix, iy + 1)
                n11 = nid(ix + 1, iy + 1)
                tris.append((n00, n10, n11))
                tris.append((n00, n11, n01))
        bedges = []
        for ix in range(nx):
            bedges.append((nid(ix, 0), nid(ix + 1, 0), "bottom"))
            bedges.append((nid(ix, ny), nid(ix + 1, ny), "top"))
        for iy in range(ny):
            bedges.append((nid(0, iy), nid(0, iy + 1), "left"))
            bedges.append((nid(nx, iy), nid(nx, iy + 1), "right"))
        return cls(nodes, np.array(tris), bedges, level=1, **shape_kwargs)

    # -- refinement -------------------------------------------------------

    def refine(self, marked):
        """Conforming local refinement; returns the level+1 mesh.

        Marked triangles are red-refined into four similar children.  The
        closure pass upgrades to red any triangle with two or more split
        edges, and any green-born triangle with a split edge (greens are
        never bisected twice).  Remaining single-split triangles are
        green-bisected.
        """
        marked = sorted({int(t) for t in marked})
        if not marked:
            raise MeshError("empty mark set")
        if marked[0] < 0 or marked[-1] >= self.n_triangles:
            raise MeshError("marked triangle index out of range")

        M = self.n_triangles
        tri = self.triangles
        tri_edges = [[_edge_key(tri[t, 0], tri[t, 1]),
                      _edge_key(tri[t, 1], tri[t, 2]),
                      _edge_key(tri[t, 2], tri[t, 0])] for t in range(M)]

        RED = 1
        state = np.zeros(M, dtype=np.int8)
        split = set()
        for t in marked:
            state[t] = RED
            split.update(tri_edges[t])
        quality_cap = 0.5 * self.a2
        changed = True
        while changed:
            changed = False
            for t in range(M):
                if state[t] == RED:
                    continue
                hits = [e for e in tri_edges[t] if e in split]
                if len(hits) >= 2 or (len(hits) == 1 and self.green[t]):
                    state[t] = RED
                    split.update(tri_edges[t])
                    changed = True
                elif len(hits) == 1 and self._green_quality(t, hits[0]) > quality_cap:
                    # a bisection here would degrade shape; refine red instead
                    state[t] = RED
                    split.update(tri_edges[t])
                    changed = True

        nodes = list(map(tuple, self.nodes))
        n_parent = len(nodes)
        midpoint = {}
        edge_origin = []
        for e in sorted(split):
            i, j = e
            midpoint[e] = len(nodes)
            nodes.append(tuple(0.5 * (self.nodes[i] + self.nodes[j])))
            edge_origin.append(e)

        new_tris = []
        new_green = []
        new_parent = []
        for t in range(M):
            v0, v1, v2 = (int(v) for v in tri[t])
            if state[t] == RED:
                m01 = midpoint[_edge_key(v0, v1)]
                m12 = midpoint[_edge_key(v1, v2)]
                m20 = midpoint[_edge_key(v2, v0)]
                children = [(v0, m01, m20), (m01, v1, m12),
                            (m20, m12, v2), (m01, m12, m20)]
                flags = [False] * 4
            else:
                hits = [e for e in tri_edges[t] if e in split]
                if not hits:
                    children = [(v0, v1, v2)]
                    flags = [self.green[t]]
                else:
                    e = hits[0]
                    m = midpoint[e]
                    # relabel so the split edge is (a, b) with opposite c
                    if e == _edge_key(v0, v1):
                        a, b, c = v0, v1, v2
                    elif e == _edge_key(v1, v2):
                        a, b, c = v1, v2, v0
                    else:
                        a, b, c = v2, v0, v1
                    children = [(a, m, c), (m, b, c)]
                    flags = [True, True]
            for ch, fl in zip(children, flags):
                new_tris.append(ch)
                new_green.append(fl)
                new_parent.append(t)

        new_bedges = []
        for i, j, lab in self.boundary_edges:
            e = _edge_key(i, j)
            if e in split:
                m = midpoint[e]
                new_bedges.append((i, m, lab))
                new_bedges.append((m, j, lab))
            else:
                new_bedges.append((i, j, lab))

        return TriMesh(np.array(nodes), np.array(new_tris), new_bedges,
                       level=self.level + 1, parent=self,
                       parent_map=np.array(new_parent),
                       edge_origin=np.array(edge_origin).reshape(-1, 2),
                       green=np.array(new_green),
                       a1=self.a1, a2=self.a2, ct=self.ct)

    def _green_quality(self, t, split_edge):
        """Worst h/r ratio of the two children a bisection of `t` would make."""
        v0, v1, v2 = (int(v) for v in self.triangles[t])
        if split_edge == _edge_key(v0, v1):
            a, b, c = v0, v1, v2
        elif split_edge == _edge_key(v1, v2):
            a, b, c = v1, v2, v0
        else:
            a, b, c = v2, v0, v1
        pm = 0.5 * (self.nodes[a] + self.nodes[b])
        worst = 0.0
        for p, q, r in (((self.nodes[a]), pm, self.nodes[c]),
                        (pm, self.nodes[b], self.nodes[c])):
            sa = np.linalg.norm(q - p)
            sb = np.linalg.norm(r - q)
            sc = np.linalg.norm(p - r)
            area = 0.5 * abs((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
            inr = area / (0.5 * (sa + sb + sc))
            worst = max(worst, max(sa, sb, sc) / inr)
        return worst

    def prolong(self, coarse_values):
        """Exact values on this mesh of a P1 function given on the parent."""
        if self.parent is None or self.edge_origin is None:
            raise MeshError("mesh has no parent to prolong from")
        coarse_values = np.asarray(coarse_values, dtype=float)
        if len(coarse_values) != self.parent.n_nodes:
            raise MeshError("value count does not match parent node count")
        out = np.empty(self.n_nodes)
        out[:self.parent.n_nodes] = coarse_values
        mids = 0.5 * (coarse_values[self.edge_origin[:, 0]]
                      + coarse_values[self.edge_origin[:, 1]])
        out[self.parent.n_nodes:] = mids
        return out

    def lineage(self):
        """Chain of meshes from the root down to self."""
        chain = [self]
        while chain[-1].parent is not None:
            chain.append(chain[-1].parent)
        return chain[::-1]

    def is_descendant_of(self, other):
        m = self
        while m is not None:
            if m is other:
                return True
            m = m.parent
        return False

    # -- P1 algebra -------------------------------------------------------

    def mass_matrix(self):
        """Consistent P1 mass matrix (exact quadrature), cached."""
        if self._mass is None:
            tri = self.triangles
            area = self.elem_area
            local = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
            rows = np.repeat(tri, 3, axis=1).ravel()
            cols = np.tile(tri, (1, 3)).ravel()
            vals = (area[:, None, None] * local[None, :, :]).reshape(len(tri), 9).ravel()
            self._mass = sp.csr_matrix((vals, (rows, cols)),
                                       shape=(self.n_nodes, self.n_nodes))
        return self._mass

    def mass_solve(self, rhs):
        """Solve M x = rhs with the consistent mass matrix (cached factor)."""
        if self._mass_solve is None:
            self._mass_solve = splu(self.mass_matrix().tocsc())
        return self._mass_solve.solve(np.asarray(rhs, dtype=float))

    def lumped_volumes(self):
        """Row-sum lumped mass weights V_i = sum of area/3 over incident triangles."""
        V = np.zeros(self.n_nodes)
        np.add.at(V, self.triangles.ravel(), np.repeat(self.elem_area / 3.0, 3))
        return V

    def stiffness_matrix(self):
        """P1 stiffness matrix for the (unweighted) Laplacian."""
        tri = self.triangles
        p = self.nodes[tri]  # (M, 3, 2)
        # gradients of barycentric coordinates: grad lambda_i = rot90(edge_i)/(2A)
        e0 = p[:, 2] - p[:, 1]
        e1 = p[:, 0] - p[:, 2]
        e2 = p[:, 1] - p[:, 0]
        edges = np.stack([e0, e1, e2], axis=1)
        grads = np.empty_like(edges)
        grads[:, :, 0] = -edges[:, :, 1]
        grads[:, :, 1] = edges[:, :, 0]
        grads /= (2.0 * self.elem_area)[:, None, None]
        local = np.einsum("tid,tjd->tij", grads, grads) * self.elem_area[:, None, None]
        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        return sp.csr_matrix((local.reshape(len(tri), 9).ravel(), (rows, cols)),
                             shape=(self.n_nodes, self.n_nodes))

    def gradient_per_element(self, values):
        """(M, 2) constant gradient of a P1 field on each triangle."""
        tri = self.triangles
        p = self.nodes[tri]
        e0 = p[:, 2] - p[:, 1]
        e1 = p[:, 0] - p[:, 2]
        e2 = p[:, 1] - p[:, 0]
        edges = np.stack([e0, e1, e2], axis=1)
        grads = np.empty_like(edges)
        grads[:, :, 0] = -edges[:, :, 1]
        grads[:, :, 1] = edges[:, :, 0]
        grads /= (2.0 * self.elem_area)[:, None, None]
        v = np.asarray(values)[tri]
        return np.einsum("ti,tid->td", v, grads)

    def _get_trifinder(self):
        if self._trifinder is None:
            from matplotlib.tri import Triangulation
            t = Triangulation(self.nodes[:, 0], self.nodes[:, 1], self.triangles)
            self._trifinder = (t, t.get_trifinder())
        return self._trifinder

    def locate(self, points, tol=None):
        """Triangle index and barycentric coordinates for each query point."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if tol is None:
            diam = np.linalg.norm(self.nodes.max(axis=0) - self.nodes.min(axis=0))
            tol = 1e-12 * diam
        _, finder = self._get_trifinder()
        idx = np.asarray(finder(points[:, 0], points[:, 1]), dtype=np.int64)
        miss = np.nonzero(idx < 0)[0]
        for q in miss:
            idx[q] = self._locate_fallback(points[q], tol)
        bar = self._barycentric(idx, points)
        return idx, bar

    def _locate_fallback(self, pt, tol):
        best, best_d = -1, np.inf
        p0 = self.nodes[self.triangles[:, 0]]
        p1 = self.nodes[self.triangles[:, 1]]
        p2 = self.nodes[self.triangles[:, 2]]
        v0, v1 = p1 - p0, p2 - p0
        d = pt[None, :] - p0
        det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
        l1 = (d[:, 0] * v1[:, 1] - d[:, 1] * v1[:, 0]) / det
        l2 = (v0[:, 0] * d[:, 1] - v0[:, 1] * d[:, 0]) / det
        l0 = 1.0 - l1 - l2
        slack = -np.minimum(np.minimum(l0, l1), l2) * self.elem_diameter
        t = int(np.argmin(slack))
        if slack[t] <= tol:
            return t
        raise MeshError(f"point {pt} outside mesh domain (distance ~ {slack[t]:.3e})")

    def _barycentric(self, tri_idx, points):
        tri = self.triangles[tri_idx]
        p0, p1, p2 = self.nodes[tri[:, 0]], self.nodes[tri[:, 1]], self.nodes[tri[:, 2]]
        v0, v1 = p1 - p0, p2 - p0
        d = points - p0
        det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
        l1 = (d[:, 0] * v1[:, 1] - d[:, 1] * v1[:, 0]) / det
        l2 = (v0[:, 0] * d[:, 1] - v0[:, 1] * d[:, 0]) / det
        return np.column_stack([1.0 - l1 - l2, l1, l2])


@dataclass
class NodalField:
    """Continuous piecewise-linear function given by one value per node."""

    mesh: TriMesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_nodes,):
            raise MeshError("value count does not match mesh node count")

    def __call__(self, points):
        idx, bar = self.mesh.locate(points)
        return np.einsum("qi,qi->q", bar, self.values[self.mesh.triangles[idx]])


def l2_inner(a: NodalField, b: NodalField) -> float:
    if a.mesh is not b.mesh:
        raise MeshError("inner product requires fields on the same mesh")
    return float(a.values @ (a.mesh.mass_matrix() @ b.values))


def l2_norm(a: NodalField) -> float:
    return float(np.sqrt(max(l2_inner(a, a), 0.0)))


def interpolate(field: NodalField, target: TriMesh) -> NodalField:
    """P1 interpolant of `field` onto `target`.

    Exact (pure index arithmetic) when `target` is a descendant of the
    field's mesh; otherwise nodes are located in the source mesh and
    evaluated barycentrically.
    """
    if target.is_descendant_of(field.mesh):
        chain = target.lineage()
        start = chain.index(field.mesh)
        values = field.values
        for m in chain[start + 1:]:
            values = m.prolong(values)
        return NodalField(target, values)
    values = field(target.nodes)
    return NodalField(target, values)


def l2_project(field: NodalField, coarse: TriMesh) -> NodalField:
    """L2-orthogonal projection of a fine-mesh field onto a coarse ancestor.

    Assembled exactly: on each fine triangle both the field and the coarse
    basis functions are linear, so the three-midpoint rule integrates their
    product without quadrature error.
    """
    fine = field.mesh
    if fine is coarse:
        return NodalField(coarse, field.values.copy())
    if not fine.is_descendant_of(coarse):
        raise MeshError("projection target must be an ancestor mesh")

    # ancestor triangle on the coarse mesh for every fine triangle: walk the
    # parent maps from the fine mesh up to the child of `coarse`
    chain = fine.lineage()
    start = chain.index(coarse)
    anc = np.arange(fine.n_triangles, dtype=np.int64)
    for m in reversed(chain[start + 1:]):
        anc = m.parent_map[anc]

    tri_f = fine.triangles
    pts_f = fine.nodes[tri_f]                      # (Mf, 3, 2)
    mids = 0.5 * (pts_f + np.roll(pts_f, -1, axis=1))   # edge midpoints
    vals_f = field.values[tri_f]
    vals_mid = 0.5 * (vals_f + np.roll(vals_f, -1, axis=1))

    tri_c = coarse.triangles[anc]
    p0 = coarse.nodes[tri_c[:, 0]]
    p1 = coarse.nodes[tri_c[:, 1]]
    p2 = coarse.nodes[tri_c[:, 2]]
    v0, v1 = p1 - p0, p2 - p0
    det = (v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0])[:, None]

    rhs = np.zeros(coarse.n_nodes)
    w = (fine.elem_area / 3.0)[:, None]
    d = mids - p0[:, None, :]
    l1 = (d[:, :, 0] * v1[:, None, 1] - d[:, :, 1] * v1[:, None, 0]) / det
    l2 = (v0[:, None, 0] * d[:, :, 1] - v0[:, None, 1] * d[:, :, 0]) / det
    bar = np.stack([1.0 - l1 - l2, l1, l2], axis=2)     # (Mf, 3pts, 3basis)
    contrib = w[:, :, None] * vals_mid[:, :, None] * bar
    np.add.at(rhs, tri_c[:, None, :].repeat(3, axis=1).ravel(), contrib.ravel())

    return NodalField(coarse, coarse.mass_solve(rhs))


def check_conforming(mesh: TriMesh):
    """Raise MeshError unless every interior edge is shared by exactly two
    triangles and every boundary edge by exactly one."""
    count = {}
    for i, j, k in mesh.triangles:
        for e in (_edge_key(i, j), _edge_key(j, k), _edge_key(k, i)):
            count[e] = count.get(e, 0) + 1
    bset = {_edge_key(i, j) for i, j, _ in mesh.boundary_edges}
    for e, c in count.items():
        if c == 2:
            if e in bset:
                raise MeshError(f"boundary edge {e} shared by two triangles")
        elif c == 1:
            if e not in bset:
                raise MeshError(f"hanging or unlabeled boundary edge {e}")
        else:
            raise MeshError(f"edge {e} shared by {c} triangles")
    for e in bset:
        if count.get(e, 0) != 1:
            raise MeshError(f"labeled boundary edge {e} not on the mesh boundary")


# -- plain-text file formats ----------------------------------------------

def save_mesh(mesh: TriMesh, path):
    with open(path, "w") as f:
        f.write("tri-mesh v1\n")
        f.write(f"nodes {mesh.n_nodes}\n")
        for x, y in mesh.nodes:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        f.write(f"tris {mesh.n_triangles}\n")
        for i, j, k in mesh.triangles:
            f.write(f"{i} {j} {k}\n")
        f.write(f"bedges {len(mesh.boundary_edges)}\n")
        for i, j, lab in mesh.boundary_edges:
            f.write(f"{i} {j} {lab}\n")


def load_mesh(path, **shape_kwargs) -> TriMesh:
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if lines[0] != "tri-mesh v1":
        raise MeshError(f"not a tri-mesh v1 file: {path}")
    pos = 1

    def expect(tag):
        nonlocal pos
        word, n = lines[pos].split()
        if word != tag:
            raise MeshError(f"expected '{tag}' section, got '{word}'")
        pos += 1
        return int(n)

    n = expect("nodes")
    nodes = np.array([[float(v) for v in lines[pos + i].split()] for i in range(n)])
    pos += n
    m = expect("tris")
    tris = np.array([[int(v) for v in lines[pos + i].split()] for i in range(m)])
    pos += m
    b = expect("bedges")
    bedges = []
    for i in range(b):
        parts = lines[pos + i].split()
        bedges.append((int(parts[0]), int(parts[1]), parts[2]))
    return TriMesh(nodes, tris, bedges, **shape_kwargs)


def save_field(field: NodalField, path):
    with open(path, "w") as f:
        f.write("field v1\n")
        f.write(f"checksum {field.mesh.checksum}\n")
        for v in field.values:
            f.write(f"{float(v)!r}\n")


def load_field(path, mesh: TriMesh) -> NodalField:
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if lines[0] != "field v1":
        raise MeshError(f"not a field v1 file: {path}")
    tag, checksum = lines[1].split()
    if tag != "checksum":
        raise MeshError("missing checksum line")
    if checksum != mesh.checksum:
        raise MeshError("field file checksum does not match the mesh")
    values = np.array([float(v) for v in lines[2:]])
    return NodalField(mesh, values)
