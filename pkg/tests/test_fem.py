import io

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from fracprec.fem import (
    apply_curl,
    apply_grad,
    apply_grad_transpose,
    assemble,
    assemble_all,
    assemble_prolongation,
    export_coo,
    helmholtz_decompose,
    laplacian_dual,
)
from fracprec.mesh import build_hierarchy, build_level
from fracprec.vectors import TaggedVector, TagError


def flux_mass_oracle(level):
    """Flux mass matrix by an unrelated quadrature (degree-3 exact 4-point
    rule), straight from the definition."""
    M = np.zeros((level.num_edges, level.num_edges))
    qb = np.array(
        [[1 / 3, 1 / 3, 1 / 3], [0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6]]
    )
    qw = np.array([-27 / 48, 25 / 48, 25 / 48, 25 / 48])
    for t, tri in enumerate(level.triangles):
        p = level.vertices[tri]
        area = level.areas()[t]
        for a in range(3):
            for b in range(3):
                ea, eb = level.triangle_edges[t, a], level.triangle_edges[t, b]
                sa, sb = level.triangle_edge_signs[t, [a, b]]
                acc = 0.0
                for lam, w in zip(qb, qw):
                    x = lam @ p
                    acc += w * ((x - p[a]) @ (x - p[b])) / (2 * area) ** 2
                M[ea, eb] += sa * sb * acc * area
    return M


class TestAssembly:
    def test_mass_s_unit_cell(self):
        lm = assemble(build_level(1))
        np.testing.assert_allclose(lm.mass_s.toarray(), 0.5 * np.eye(2))

    def test_grad_unit_cell(self):
        # Hand-derived from the edge orientations of the n=1 mesh.
        lm = assemble(build_level(1))
        expected = np.array(
            [[-1, 0], [0, 1], [0, 1], [-1, 0], [1, -1]], dtype=float
        )
        np.testing.assert_allclose(lm.grad.toarray(), expected)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_flux_mass_against_quadrature_oracle(self, n):
        level = build_level(n)
        lm = assemble(level)
        np.testing.assert_allclose(lm.mass_v.toarray(), flux_mass_oracle(level), atol=1e-13)

    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_divdiv_equals_grad_route(self, n):
        # Two independent sign conventions must meet: <div.,div.> assembled
        # from local divergences vs grad @ inv(mass_s) @ grad.T.
        lm = assemble(build_level(n))
        other = (lm.grad @ lm.grad.T).toarray() / lm.mass_s.diagonal()[0]
        np.testing.assert_allclose(lm.divdiv.toarray(), other, atol=1e-12)

    def test_hdiv_is_sum(self):
        lm = assemble(build_level(2))
        np.testing.assert_allclose(
            lm.hdiv.toarray(), (lm.mass_v + lm.divdiv).toarray(), atol=0
        )

    @pytest.mark.parametrize("n", [1, 2])
    def test_curl_against_quadrature_oracle(self, n):
        # Rebuild the rotated-gradient pairings from scratch: hat gradients
        # from the affine interpolation system, fluxes by 4-point quadrature.
        level = build_level(n)
        lm = assemble(level)
        K = np.zeros((level.num_edges, level.num_vertices))
        qb = np.array(
            [[1 / 3, 1 / 3, 1 / 3], [0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6]]
        )
        qw = np.array([-27 / 48, 25 / 48, 25 / 48, 25 / 48])
        for t, tri in enumerate(level.triangles):
            p = level.vertices[tri]
            area = level.areas()[t]
            V = np.column_stack([np.ones(3), p])
            for a in range(3):
                coef = np.linalg.solve(V, np.eye(3)[a])  # hat = c0 + c1 x + c2 y
                rot = np.array([coef[2], -coef[1]])
                for b in range(3):
                    e, sgn = level.triangle_edges[t, b], level.triangle_edge_signs[t, b]
                    acc = 0.0
                    for lam, w in zip(qb, qw):
                        x = lam @ p
                        acc += w * (rot @ (x - p[b])) / (2 * area)
                    K[e, tri[a]] += sgn * acc * area
        np.testing.assert_allclose(lm.curl.toarray(), K, atol=1e-13)

    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_curl_columns_divergence_free(self, n):
        lm = assemble(build_level(n))
        lu = spla.splu(lm.mass_v.tocsc())
        assert np.abs(lm.grad.T @ lu.solve(lm.curl.toarray())).max() < 1e-12

    def test_curl_kills_constants(self):
        lm = assemble(build_level(3))
        assert np.abs(lm.curl @ np.ones(lm.mesh.num_vertices)).max() < 1e-13

    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_curl_orthogonal_to_gradients(self, n):
        lm = assemble(build_level(n))
        lu = spla.splu(lm.mass_v.tocsc())
        orth = lm.curl.toarray().T @ lu.solve(lm.grad.toarray())
        assert np.abs(orth).max() < 1e-12

    def test_boundary_flux_of_constant(self):
        # grad applied to the constant 1 picks out (minus) the net outward
        # boundary flux of each basis function: +-1 on boundary edges, 0 inside.
        level = build_level(3)
        lm = assemble(level)
        d = apply_grad(lm, TaggedVector("S", 0, "coefficient", np.ones(level.num_triangles)))
        mid = 0.5 * (level.vertices[level.edges[:, 0]] + level.vertices[level.edges[:, 1]])
        tang = level.vertices[level.edges[:, 1]] - level.vertices[level.edges[:, 0]]
        normal = np.column_stack([tang[:, 1], -tang[:, 0]])
        probe = mid + 0.25 * normal
        outside = (probe < 0).any(axis=1) | (probe > 1).any(axis=1)
        expected = np.zeros(level.num_edges)
        boundary = level.boundary_edge_mask()
        expected[boundary] = np.where(outside[boundary], -1.0, 1.0)
        np.testing.assert_allclose(d.values, expected, atol=1e-12)

    def test_laplacian_dual_spd(self):
        lm = assemble(build_level(2))
        A = laplacian_dual(lm)
        np.testing.assert_allclose(A, A.T, atol=1e-14)
        assert np.linalg.eigvalsh(A).min() > 0

    def test_tag_enforcement(self):
        lm = assemble(build_level(1))
        wrong_rep = TaggedVector("S", 0, "dual", np.ones(2))
        with pytest.raises(TagError):
            apply_grad(lm, wrong_rep)
        wrong_space = TaggedVector("V", 0, "coefficient", np.ones(5))
        with pytest.raises(TagError):
            apply_grad(lm, wrong_space)
        with pytest.raises(TagError):
            apply_grad_transpose(lm, TaggedVector("V", 0, "dual", np.ones(5)))


class TestProlongation:
    def setup_method(self):
        self.hier = build_hierarchy(2, 2)
        self.lms = assemble_all(self.hier)
        self.pro = assemble_prolongation(self.hier, 0)

    def test_shapes(self):
        c, f = self.hier.levels
        assert self.pro.flux.shape == (f.num_edges, c.num_edges)
        assert self.pro.cells.shape == (f.num_triangles, c.num_triangles)

    def test_halves_of_coarse_edges_carry_half_flux(self):
        kids = self.hier.edge_children[0]
        P = self.pro.flux
        for e in range(self.hier.levels[0].num_edges):
            assert P[kids[e, 0], e] == pytest.approx(0.5)
            assert P[kids[e, 1], e] == pytest.approx(0.5)

    def test_cells_copy_parent_value(self):
        assert (self.pro.cells.sum(axis=1) == 1).all()
        assert (self.pro.cells.data == 1).all()

    def test_flux_mass_nested(self):
        # Exact embedding: the Galerkin products reproduce the coarse matrices.
        c, f = self.lms
        P = self.pro.flux
        np.testing.assert_allclose(
            (P.T @ f.mass_v @ P).toarray(), c.mass_v.toarray(), atol=1e-13
        )
        np.testing.assert_allclose(
            (P.T @ f.divdiv @ P).toarray(), c.divdiv.toarray(), atol=1e-12
        )
        np.testing.assert_allclose(
            (P.T @ f.hdiv @ P).toarray(), c.hdiv.toarray(), atol=1e-12
        )

    def test_divergence_commutes_with_embedding(self):
        c, f = self.lms
        left = (f.grad.T @ self.pro.flux).toarray()
        right = (f.mass_s @ self.pro.cells @ np.diag(1 / c.mass_s.diagonal())) @ c.grad.T.toarray()
        np.testing.assert_allclose(left, right, atol=1e-12)

    def test_larger_hierarchy_nested(self):
        hier = build_hierarchy(1, 3)
        lms = assemble_all(hier)
        for k in range(2):
            P = assemble_prolongation(hier, k).flux
            np.testing.assert_allclose(
                (P.T @ lms[k + 1].hdiv @ P).toarray(), lms[k].hdiv.toarray(), atol=1e-12
            )


class TestHelmholtz:
    @pytest.mark.parametrize("n", [2, 4])
    def test_reconstruction_and_orthogonality(self, n):
        lm = assemble(build_level(n))
        rng = np.random.default_rng(42)
        tau = TaggedVector("V", 0, "coefficient", rng.uniform(-1, 1, lm.mesh.num_edges))
        u, q = helmholtz_decompose(lm, tau)
        du = apply_grad(lm, u).values
        kq = apply_curl(lm, q).values
        np.testing.assert_allclose(du + kq, lm.mass_v @ tau.values, atol=1e-10)
        lu = spla.splu(lm.mass_v.tocsc())
        assert abs(du @ lu.solve(kq)) < 1e-10

    def test_pythagoras(self):
        lm = assemble(build_level(3))
        rng = np.random.default_rng(7)
        tau = TaggedVector("V", 0, "coefficient", rng.uniform(-1, 1, lm.mesh.num_edges))
        u, q = helmholtz_decompose(lm, tau)
        lu = spla.splu(lm.mass_v.tocsc())
        du = apply_grad(lm, u).values
        kq = apply_curl(lm, q).values
        total = tau.values @ lm.mass_v @ tau.values
        np.testing.assert_allclose(
            du @ lu.solve(du) + kq @ lu.solve(kq), total, rtol=1e-10
        )

    def test_pin_is_set(self):
        lm = assemble(build_level(2))
        tau = TaggedVector("V", 0, "coefficient", np.ones(lm.mesh.num_edges))
        _, q = helmholtz_decompose(lm, tau)
        assert q.values[0] == 0.0


class TestVectors:
    def test_pairing_requires_opposite_reps(self):
        a = TaggedVector("S", 0, "coefficient", np.ones(3))
        b = TaggedVector("S", 0, "dual", np.full(3, 2.0))
        from fracprec.vectors import pair

        assert pair(a, b) == pytest.approx(6.0)
        with pytest.raises(TagError):
            pair(a, a)
        with pytest.raises(TagError):
            pair(a, TaggedVector("V", 0, "dual", np.ones(3)))

    def test_arithmetic_preserves_tags(self):
        a = TaggedVector("V", 1, "dual", np.arange(3.0))
        b = TaggedVector("V", 1, "dual", np.ones(3))
        c = a + 2.0 * b - b
        assert (c.space, c.level, c.rep) == ("V", 1, "dual")
        np.testing.assert_allclose(c.values, np.arange(3.0) + 1)
        with pytest.raises(TagError):
            a + TaggedVector("V", 0, "dual", np.ones(3))


class TestExport:
    def test_coo_roundtrip(self):
        lm = assemble(build_level(1))
        buf = io.StringIO()
        export_coo(lm.grad, buf)
        lines = buf.getvalue().strip().splitlines()
        head = lines[0].split()
        assert head[1:3] == ["5", "2"]
        assert len(lines) - 1 == int(head[3])
        total = sum(float(ln.split()[2]) for ln in lines[1:])
        assert total == pytest.approx(lm.grad.sum())
