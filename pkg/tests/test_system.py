import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.testing import assert_allclose

from sgobstacle.fem import assemble_load, assemble_weighted_stiffness
from sgobstacle.fields import AffineField
from sgobstacle.mesh import build_uniform_mesh
from sgobstacle.param import Density1D, build_param_grid, deterministic_grid
from sgobstacle.stats import sg_mean
from sgobstacle.system import assemble_sg, dump_matrix

RECT = (0.0, 1.0, 0.0, 1.0)


def one(x):
    return np.ones(x.shape[0])


def make_system(nx=4, cells=2, explicit_limit=500_000):
    mesh = build_uniform_mesh(RECT, nx)
    grid = build_param_grid([Density1D.exp_uniform()] * 2, cells)
    a = AffineField.build(1.0, [(1.0, one, 0), (2.0, one, 1)])
    f = AffineField.build(lambda x: x[:, 0] + 1.0, [(0.5, one, 1)])
    g = AffineField.build(-10.0)
    return assemble_sg(mesh, grid, a, f, g, explicit_limit=explicit_limit)


class TestDegenerateCases:
    def test_deterministic_grid_reduces_to_fem(self):
        mesh = build_uniform_mesh(RECT, 4)
        grid = deterministic_grid()
        a = AffineField.build(2.0)
        f = AffineField.build(1.0)
        g = AffineField.build(0.0)
        sys_ = assemble_sg(mesh, grid, a, f, g)
        K = assemble_weighted_stiffness(mesh, lambda x: 2.0 * one(x))
        F = assemble_load(mesh, 1.0)
        ii = mesh.interior
        assert sys_.n_param == 1
        assert_allclose(sys_.explicit().toarray(), K[ii][:, ii].toarray(), atol=1e-14)
        assert_allclose(sys_.b, F[ii], atol=1e-15)

    def test_non_affine_coefficient_rejected(self):
        mesh = build_uniform_mesh(RECT, 3)
        grid = build_param_grid([Density1D.exp_uniform()], 2)
        with pytest.raises(TypeError):
            assemble_sg(mesh, grid, lambda x, y: one(x), AffineField.build(1.0),
                        AffineField.build(0.0))

    def test_field_dims_must_fit_grid(self):
        mesh = build_uniform_mesh(RECT, 3)
        grid = build_param_grid([Density1D.exp_uniform()], 2)
        a = AffineField.build(1.0, [(1.0, one, 1)])  # needs 2 dims
        with pytest.raises(ValueError):
            assemble_sg(mesh, grid, a, AffineField.build(1.0), AffineField.build(0.0))


class TestKroneckerStructure:
    def test_matvec_matches_explicit(self):
        # factored matvec against the explicitly summed Kronecker matrix
        rng = np.random.default_rng(17)
        for nx, cells in [(3, 1), (4, 2), (5, 3)]:
            sys_ = make_system(nx=nx, cells=cells)
            A = sys_.explicit()
            assert A is not None
            for _ in range(20):
                v = rng.standard_normal(sys_.n)
                assert np.max(np.abs(sys_.matvec(v) - A @ v)) <= 1e-12

    def test_diag_matches_explicit(self):
        sys_ = make_system(nx=4, cells=2)
        assert_allclose(sys_.diag(), sys_.explicit().diagonal(), rtol=1e-13)

    def test_explicit_symmetric_positive_definite(self):
        sys_ = make_system(nx=4, cells=2)
        A = sys_.explicit().toarray()
        assert_allclose(A, A.T, atol=1e-13)
        assert np.linalg.eigvalsh(A).min() > 0

    def test_explicit_skipped_above_limit(self):
        sys_ = make_system(nx=4, cells=2, explicit_limit=10)
        assert sys_.explicit() is None
        with pytest.raises(ValueError):
            dump_matrix(sys_, "/tmp/should_not_exist.txt")

    def test_flat_index_is_parameter_major(self):
        # flat index j*I + i: a vector supported on parameter node j = 1
        # must produce output supported on rows of the same parameter block
        # structure (G acts across blocks, K within)
        sys_ = make_system(nx=4, cells=1)
        I, J = sys_.n_spatial, sys_.n_param
        v = np.zeros(sys_.n)
        v[1 * I:2 * I] = np.arange(1.0, I + 1.0)
        blocks = sys_.matvec(v).reshape(J, I)
        expected_0 = (sys_.gram.G0[0, 1] * (sys_.K0 @ v[I:2 * I]))
        for G, K in zip(sys_.gram.Gk, sys_.Kk):
            expected_0 += G[0, 1] * (K @ v[I:2 * I])
        assert_allclose(blocks[0], expected_0, rtol=1e-13)

    def test_precond_inverts_mean_kronecker(self):
        sys_ = make_system(nx=4, cells=2)
        P = sp.kron(sys_.gram.G0, sys_.mean_stiffness, format="csr")
        rng = np.random.default_rng(2)
        r = rng.standard_normal(sys_.n)
        assert_allclose(P @ sys_.precond()(r), r, atol=1e-10)


class TestRightHandSide:
    def test_constant_coefficient_mean_is_deterministic_solution(self):
        # with a independent of y the unconstrained tensor solution has mean
        # equal to the deterministic FE solution with the averaged source;
        # averaging with the discrete hat weights makes the identity exact
        mesh = build_uniform_mesh(RECT, 6)
        grid = build_param_grid([Density1D.exp_uniform()], 3)
        a = AffineField.build(1.0)
        f = AffineField.build(1.0, [(1.0, one, 0)])
        g = AffineField.build(0.0)
        sys_ = assemble_sg(mesh, grid, a, f, g)
        u = spla.spsolve(sp.csr_matrix(sys_.explicit()), sys_.b)
        mean = sg_mean(sys_, u)

        w0 = sys_.gram.g0.sum()          # discrete total mass, ~1
        w1 = sys_.gram.gk[0].sum()       # discrete E[y], ~(e - 1/e)/2
        K = assemble_weighted_stiffness(mesh, None)
        F = assemble_load(mesh, lambda x: w0 + w1 * one(x))
        ii = mesh.interior
        u_det = spla.spsolve(sp.csr_matrix(K[ii][:, ii]), F[ii])
        assert_allclose(mean.values[ii], u_det, rtol=1e-11)

    def test_lifting_reproduces_tensor_exact_solution(self):
        # u(x, y) = (x1 + x2) * y1 is linear in x and multilinear in y, and
        # harmonic, so with a = 1, f = 0 the Galerkin solution with exact
        # Dirichlet data reproduces it at every tensor node
        mesh = build_uniform_mesh(RECT, 5)
        grid = build_param_grid([Density1D.exp_uniform()], 3)
        a = AffineField.build(1.0)
        f = AffineField.build(0.0)
        g = AffineField.build(-100.0)

        def dirichlet(x, y):
            return (x[:, 0] + x[:, 1]) * y[0]

        sys_ = assemble_sg(mesh, grid, a, f, g, dirichlet=dirichlet)
        u = spla.spsolve(sp.csr_matrix(sys_.explicit()), sys_.b)
        x_int = mesh.nodes[mesh.interior]
        expected = np.concatenate(
            [dirichlet(x_int, yj) for yj in grid.nodes()])
        assert_allclose(u, expected, atol=1e-10)

    def test_obstacle_values_at_tensor_nodes(self):
        mesh = build_uniform_mesh(RECT, 4)
        grid = build_param_grid([Density1D.exp_uniform()], 2)
        a = AffineField.build(1.0)
        f = AffineField.build(1.0)

        def g(x, y):
            return x[:, 0] * y[0]

        sys_ = assemble_sg(mesh, grid, a, f, g)
        x_int = mesh.nodes[mesh.interior]
        expected = np.concatenate([g(x_int, yj) for yj in grid.nodes()])
        assert_allclose(sys_.obs, expected, rtol=1e-14)

    def test_dump_matrix_roundtrip(self, tmp_path):
        sys_ = make_system(nx=3, cells=1)
        path = tmp_path / "matrix.txt"
        dump_matrix(sys_, str(path))
        rows, cols, vals = [], [], []
        for line in path.read_text().splitlines():
            r, c, v = line.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(v))
        back = sp.coo_array((vals, (rows, cols)), shape=(sys_.n, sys_.n)).toarray()
        assert_allclose(back, sys_.explicit().toarray(), rtol=1e-14)
