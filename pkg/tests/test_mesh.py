import numpy as np
import pytest

from adawave.errors import MeshError, MeshQualityError
from adawave.mesh import (NodalField, TriMesh, check_conforming, interpolate,
                          l2_inner, l2_norm, l2_project, load_field, load_mesh,
                          save_field, save_mesh)


class TestStructured:
    def test_counts_48x48(self):
        m = TriMesh.structured((-3, 3, -3, 3), 0.125)
        assert m.n_triangles == 48 * 48 * 2 == 4608
        assert m.n_nodes == 49 * 49 == 2401

    def test_minimal_split(self):
        m = TriMesh.structured((0, 1, 0, 1), 1.0)
        assert m.n_triangles == 2
        assert m.n_nodes == 4

    def test_outer_domain_rectangle(self):
        m = TriMesh.structured((-4, 4, -5, 5), 0.125)
        assert m.h_max <= np.sqrt(2) * 0.125 + 1e-12
        check_conforming(m)

    def test_rejects_oversized_h(self):
        with pytest.raises(MeshError):
            TriMesh.structured((0, 1, 0, 2), 1.5)

    def test_rejects_degenerate(self):
        with pytest.raises(MeshError):
            TriMesh.structured((0, 0, 0, 1), 0.1)

    def test_boundary_labels(self):
        m = TriMesh.structured((0, 1, 0, 1), 0.25)
        labels = {lab for _, _, lab in m.boundary_edges}
        assert labels == {"bottom", "right", "top", "left"}
        for i, j, lab in m.boundary_edges:
            if lab == "bottom":
                assert m.nodes[i, 1] == 0.0 and m.nodes[j, 1] == 0.0


class TestRefine:
    def test_uniform_red(self):
        m = TriMesh.structured((0, 1, 0, 1), 1.0)
        r = m.refine([0, 1])
        assert r.n_triangles == 8
        assert not r.green.any()
        check_conforming(r)
        # children similar to parents: identical shape ratios
        assert np.allclose(sorted(r.elem_diameter / r.elem_inradius),
                           sorted(np.repeat(m.elem_diameter / m.elem_inradius, 4)))

    def test_single_mark_locality(self, unit_mesh):
        c = unit_mesh.centroids()
        t = int(np.argmin(np.abs(c[:, 0] - 0.5) + np.abs(c[:, 1] - 0.5)))
        r = unit_mesh.refine([t])
        check_conforming(r)
        # marked triangle -> 4 children; three closure neighbors bisect
        assert r.n_triangles == unit_mesh.n_triangles + 6
        assert r.parent_map is not None
        assert (r.parent_map == t).sum() == 4

    def test_empty_marks_rejected(self, unit_mesh):
        with pytest.raises(MeshError):
            unit_mesh.refine([])

    def test_out_of_range_mark(self, unit_mesh):
        with pytest.raises(MeshError):
            unit_mesh.refine([unit_mesh.n_triangles])

    def test_conformity_random_cases(self, rng):
        for _ in range(60):
            m = TriMesh.structured((0, 1, 0, 1), 0.25)
            for _ in range(int(rng.integers(1, 4))):
                k = int(rng.integers(1, m.n_triangles // 4 + 2))
                marks = rng.choice(m.n_triangles, size=k, replace=False)
                m = m.refine(marks)
            check_conforming(m)
            assert (m.elem_diameter <= m.a2 * m.elem_inradius + 1e-12).all()

    def test_diameter_floor_trips(self):
        m = TriMesh.structured((0, 1, 0, 1), 0.25, a1=1e-4)
        # a floor just below the current finest element catches the next halving
        m = TriMesh(m.nodes, m.triangles, m.boundary_edges, a1=0.3)
        with pytest.raises(MeshQualityError):
            m.refine(range(m.n_triangles))

    def test_nested_levels(self, unit_mesh):
        r1 = unit_mesh.refine([0, 1, 2])
        r2 = r1.refine([0])
        assert r2.level == 3
        assert r2.parent is r1 and r1.parent is unit_mesh
        assert r2.lineage() == [unit_mesh, r1, r2]
        assert r2.is_descendant_of(unit_mesh)
        assert not unit_mesh.is_descendant_of(r1)


class TestInterpolate:
    def test_linear_reproduced_exactly(self, unit_mesh, rng):
        f = NodalField(unit_mesh, 2 * unit_mesh.nodes[:, 0] + unit_mesh.nodes[:, 1])
        r = unit_mesh.refine(rng.choice(unit_mesh.n_triangles, 10, replace=False))
        fi = interpolate(f, r)
        assert np.allclose(fi.values, 2 * r.nodes[:, 0] + r.nodes[:, 1], atol=1e-14)

    def test_nested_pointwise_exact(self, unit_mesh, rng):
        f = NodalField(unit_mesh, rng.standard_normal(unit_mesh.n_nodes))
        r = unit_mesh.refine(rng.choice(unit_mesh.n_triangles, 20, replace=False))
        fi = interpolate(f, r)
        pts = rng.uniform(0.03, 0.97, (100, 2))
        assert np.abs(f(pts) - fi(pts)).max() < 1e-12

    def test_smooth_error_quarters_per_refinement(self):
        exact = lambda p: np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])
        rng = np.random.default_rng(5)
        pts = rng.uniform(0.02, 0.98, (400, 2))
        errs = []
        for h in (0.25, 0.125, 0.0625):
            m = TriMesh.structured((0, 1, 0, 1), h)
            errs.append(np.abs(NodalField(m, exact(m.nodes))(pts) - exact(pts)).max())
        assert 3.0 < errs[0] / errs[1] < 5.0
        assert 3.0 < errs[1] / errs[2] < 5.0

    def test_outside_point_rejected(self, unit_mesh):
        f = NodalField(unit_mesh, np.ones(unit_mesh.n_nodes))
        with pytest.raises(MeshError):
            f(np.array([[2.5, 0.5]]))


class TestProjection:
    def test_identity_on_subspace(self, unit_mesh, rng):
        coarse_vals = rng.standard_normal(unit_mesh.n_nodes)
        fine = unit_mesh.refine(range(unit_mesh.n_triangles))
        lifted = interpolate(NodalField(unit_mesh, coarse_vals), fine)
        back = l2_project(lifted, unit_mesh)
        assert np.abs(back.values - coarse_vals).max() < 1e-10

    def test_constant_preserved(self, unit_mesh):
        fine = unit_mesh.refine([0, 5, 9])
        back = l2_project(NodalField(fine, np.ones(fine.n_nodes)), unit_mesh)
        assert np.abs(back.values - 1.0).max() < 1e-10

    def test_orthogonality(self, unit_mesh, rng):
        fine = unit_mesh.refine(rng.choice(unit_mesh.n_triangles, 30, replace=False))
        g = NodalField(fine, rng.standard_normal(fine.n_nodes))
        pg = l2_project(g, unit_mesh)
        residual = NodalField(fine, g.values - interpolate(pg, fine).values)
        probe = interpolate(NodalField(unit_mesh, rng.standard_normal(unit_mesh.n_nodes)), fine)
        assert abs(l2_inner(residual, probe)) < 1e-9

    def test_contraction_with_fineness(self):
        # the residual of projecting a fixed smooth function shrinks as the
        # target space refines
        meshes = [TriMesh.structured((0, 1, 0, 1), 0.25)]
        for _ in range(2):
            meshes.append(meshes[-1].refine(range(meshes[-1].n_triangles)))
        fine = meshes[-1].refine(range(meshes[-1].n_triangles))
        f = NodalField(fine, np.sin(2 * np.pi * fine.nodes[:, 0])
                       * np.cos(np.pi * fine.nodes[:, 1]))
        errs = []
        for m in meshes:
            p = l2_project(f, m)
            errs.append(l2_norm(NodalField(fine, f.values - interpolate(p, fine).values)))
        assert errs[0] > errs[1] > errs[2]

    def test_requires_ancestor(self, unit_mesh):
        other = TriMesh.structured((0, 1, 0, 1), 0.25)
        f = NodalField(unit_mesh, np.ones(unit_mesh.n_nodes))
        with pytest.raises(MeshError):
            l2_project(f, other)

    def test_nested_space_roundtrip(self, unit_mesh, rng):
        f_coarse = rng.standard_normal(unit_mesh.n_nodes)
        fine = unit_mesh.refine(rng.choice(unit_mesh.n_triangles, 15, replace=False))
        finer = fine.refine(rng.choice(fine.n_triangles, 15, replace=False))
        lifted = interpolate(NodalField(unit_mesh, f_coarse), finer)
        back = l2_project(lifted, unit_mesh)
        assert np.abs(back.values - f_coarse).max() < 1e-10


class TestNorms:
    def test_constant_norm(self):
        m = TriMesh.structured((-3, 3, -3, 3), 0.5)
        assert abs(l2_norm(NodalField(m, np.ones(m.n_nodes))) - 6.0) < 1e-12

    def test_linear_norm_exact(self):
        m = TriMesh.structured((0, 1, 0, 1), 0.25)
        f = NodalField(m, m.nodes[:, 0].copy())
        assert abs(l2_norm(f) - 1.0 / np.sqrt(3.0)) < 1e-12

    def test_mesh_mismatch_rejected(self, unit_mesh):
        other = TriMesh.structured((0, 1, 0, 1), 0.125)
        with pytest.raises(MeshError):
            l2_inner(NodalField(unit_mesh, np.ones(unit_mesh.n_nodes)),
                     NodalField(other, np.ones(other.n_nodes)))

    def test_mass_matrix_spd(self, rng):
        m = TriMesh.structured((0, 1, 0, 1), 0.25)
        m = m.refine(rng.choice(m.n_triangles, 8, replace=False))
        M = m.mass_matrix().toarray()
        assert np.allclose(M, M.T)
        assert np.linalg.eigvalsh(M).min() > 0


class TestFiles:
    def test_mesh_roundtrip(self, tmp_path, unit_mesh, rng):
        m = unit_mesh.refine(rng.choice(unit_mesh.n_triangles, 7, replace=False))
        path = tmp_path / "m.txt"
        save_mesh(m, path)
        m2 = load_mesh(path)
        assert np.array_equal(m.nodes, m2.nodes)
        assert np.array_equal(m.triangles, m2.triangles)
        assert m.boundary_edges == m2.boundary_edges
        assert m.checksum == m2.checksum

    def test_field_roundtrip_and_checksum(self, tmp_path, unit_mesh, rng):
        f = NodalField(unit_mesh, rng.standard_normal(unit_mesh.n_nodes))
        path = tmp_path / "f.txt"
        save_field(f, path)
        f2 = load_field(path, unit_mesh)
        assert np.array_equal(f.values, f2.values)
        other = TriMesh.structured((0, 1, 0, 1), 0.25)
        with pytest.raises(MeshError):
            load_field(path, other)
