import numpy as np
import pytest

from etchomo import (
    Axis,
    BoundaryConfig,
    FctPreconditioner,
    GridSpec,
    OrthotropicField,
    add_source,
    apply_operator,
    assemble_dense,
    build_rhs,
    build_system,
    coefficient_stats,
    dense_solve,
    effective_conductivity,
    l2_error_midpoint,
    pcg,
    reconstruct_boundary_flux,
    scale_field,
    solve_reference_lp,
)
from etchomo.tpfa import assemble_sparse, operator_diagonal

from conftest import constant_field, random_field


def two_cell_system():
    # 1x1x2 grid, unit spacing on every axis, kappa = 1 -> A = [[3,-1],[-1,3]]
    field = constant_field(1, 1, 2, lengths=(1.0, 1.0, 2.0))
    return build_system(field, BoundaryConfig(Axis.Z, 1.0, 0.0))


class TestScaleField:
    def test_unit_spacing_identity(self):
        f = constant_field(3, 3, 3, lengths=(3.0, 3.0, 3.0))
        sx, sy, sz = scale_field(f)
        assert np.all(sx == 1.0) and np.all(sy == 1.0) and np.all(sz == 1.0)

    def test_half_spacing(self):
        f = constant_field(2, 2, 2, kz=4.0)
        _, _, sz = scale_field(f)
        assert np.all(sz == 16.0)

    def test_homogeneity(self):
        rng = np.random.default_rng(1)
        f = random_field(rng, 3, 4, 5)
        g = OrthotropicField(f.grid, 2.5 * f.kx, 2.5 * f.ky, 2.5 * f.kz)
        for a, b in zip(scale_field(g), scale_field(f)):
            assert np.allclose(a, 2.5 * b, rtol=1e-15)


class TestBuildSystem:
    def test_homogeneous_values(self, boundary_z):
        n = 4
        sys = build_system(constant_field(n, n, n), boundary_z)
        assert np.all(sys.tx == n**2)
        assert np.all(sys.ty == n**2)
        assert np.all(sys.tz == n**2)
        assert np.all(sys.t_in == 2 * n**2)
        assert np.all(sys.t_out == 2 * n**2)

    def test_harmonic_mean_value(self, boundary_z):
        g = GridSpec(2, 1, 1, 2.0, 1.0, 1.0)
        f = OrthotropicField(g, [0.01, 1.0], [1.0, 1.0], [1.0, 1.0])
        sys = build_system(f, boundary_z)
        assert sys.tx[0] == pytest.approx(2.0 / 101.0, rel=1e-14)

    def test_harmonic_between_neighbors(self, boundary_z):
        rng = np.random.default_rng(2)
        f = random_field(rng, 5, 4, 3, contrast=100.0)
        sys = build_system(f, boundary_z)
        sx, _, _ = scale_field(f)
        left, right = sx[:, :, :-1].ravel(), sx[:, :, 1:].ravel()
        assert np.all(sys.tx >= np.minimum(left, right) - 1e-14)
        assert np.all(sys.tx <= np.maximum(left, right) + 1e-14)
        assert np.all(sys.tx <= 2 * np.minimum(left, right) + 1e-14)

    def test_requires_canonical_axis(self):
        from etchomo import ConfigError

        with pytest.raises(ConfigError):
            build_system(constant_field(2, 2, 2), BoundaryConfig(Axis.X, 1.0, 0.0))


class TestApplyOperator:
    def test_constant_vector(self, boundary_z):
        rng = np.random.default_rng(3)
        f = random_field(rng, 4, 3, 5)
        sys = build_system(f, boundary_z)
        out = apply_operator(sys, np.full(f.grid.n_cells, 2.5)).reshape(f.grid.shape)
        _, _, sz = scale_field(f)
        assert np.allclose(out[0], 2 * sz[0] * 2.5, rtol=1e-13)
        assert np.allclose(out[-1], 2 * sz[-1] * 2.5, rtol=1e-13)
        assert np.allclose(out[1:-1], 0.0, atol=1e-11)

    def test_two_cell_matrix(self):
        sys = two_cell_system()
        assert np.allclose(apply_operator(sys, np.array([1.0, 0.0])), [3.0, -1.0])
        assert np.allclose(apply_operator(sys, np.array([0.0, 1.0])), [-1.0, 3.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            apply_operator(two_cell_system(), np.ones(3))

    @pytest.mark.parametrize("dims", [(5, 4, 3), (8, 8, 8), (17, 9, 5), (1, 6, 4)])
    def test_symmetry(self, dims, boundary_z):
        rng = np.random.default_rng(hash(dims) % 2**32)
        f = random_field(rng, *dims, contrast=50.0)
        sys = build_system(f, boundary_z)
        u = rng.standard_normal(f.grid.n_cells)
        w = rng.standard_normal(f.grid.n_cells)
        au, aw = apply_operator(sys, u), apply_operator(sys, w)
        gap = abs(np.dot(au, w) - np.dot(u, aw))
        assert gap <= 1e-13 * np.linalg.norm(au) * np.linalg.norm(w)

    def test_positive_definite(self, boundary_z):
        rng = np.random.default_rng(5)
        for dims in [(2, 3, 4), (5, 5, 5), (4, 2, 3)]:
            f = random_field(rng, *dims, contrast=100.0)
            sys = build_system(f, boundary_z)
            vals = np.linalg.eigvalsh(assemble_dense(sys))
            assert vals[0] > 0.0


class TestRhs:
    def test_homogeneous_values(self, boundary_z):
        n = 4
        sys = build_system(constant_field(n, n, n), boundary_z)
        b = build_rhs(sys).reshape(n, n, n)
        assert np.all(b[0] == 32.0)
        assert np.all(b[1:] == 0.0)

    def test_linear_profile_is_exact(self, boundary_z):
        n = 6
        sys = build_system(constant_field(n, n, n), boundary_z)
        b = build_rhs(sys)
        k = np.arange(n)
        profile = 1.0 - (k + 0.5) / n
        p = np.broadcast_to(profile[:, None, None], (n, n, n)).reshape(-1)
        assert np.linalg.norm(apply_operator(sys, p) - b) <= 1e-12 * np.linalg.norm(b)


class TestSource:
    def test_zero_source(self, boundary_z):
        sys = build_system(constant_field(3, 3, 3), boundary_z)
        b = build_rhs(sys)
        assert np.array_equal(add_source(sys, b, lambda x, y, z: np.zeros_like(x)), b)

    def test_constant_source(self, boundary_z):
        sys = build_system(constant_field(3, 3, 3), boundary_z)
        b = build_rhs(sys)
        b2 = add_source(sys, b, lambda x, y, z: np.ones_like(x))
        assert np.allclose(b2 - b, 1.0)


class TestDenseAssembly:
    def test_two_cell(self):
        assert np.array_equal(assemble_dense(two_cell_system()), [[3.0, -1.0], [-1.0, 3.0]])

    def test_symmetric(self, boundary_z):
        rng = np.random.default_rng(6)
        mat = assemble_dense(build_system(random_field(rng, 4, 3, 4), boundary_z))
        assert np.array_equal(mat, mat.T)

    def test_columns_match_operator(self, boundary_z):
        rng = np.random.default_rng(7)
        f = random_field(rng, 4, 4, 4)
        sys = build_system(f, boundary_z)
        mat = assemble_dense(sys)
        for j in rng.choice(f.grid.n_cells, size=20, replace=False):
            basis = np.zeros(f.grid.n_cells)
            basis[j] = 1.0
            assert np.allclose(mat[:, j], apply_operator(sys, basis), atol=1e-14)

    def test_sparse_matches_dense(self, boundary_z):
        rng = np.random.default_rng(8)
        sys = build_system(random_field(rng, 3, 4, 5), boundary_z)
        assert np.allclose(assemble_sparse(sys).toarray(), assemble_dense(sys))

    def test_diagonal_helper(self, boundary_z):
        rng = np.random.default_rng(9)
        sys = build_system(random_field(rng, 3, 3, 3), boundary_z)
        assert np.allclose(operator_diagonal(sys), np.diag(assemble_dense(sys)))

    def test_size_guard(self, boundary_z):
        sys = build_system(constant_field(17, 17, 17), boundary_z)
        with pytest.raises(ValueError):
            assemble_dense(sys)


class TestFluxAndEffective:
    def test_equilibrated_face_flux_zero(self, boundary_z):
        sys = build_system(constant_field(3, 3, 3), boundary_z)
        p = np.zeros(27)  # equals p_out on the outflow layer
        assert np.allclose(reconstruct_boundary_flux(sys, p, side="out"), 0.0)

    def test_homogeneous_unit_flux(self, boundary_z):
        n = 5
        sys = build_system(constant_field(n, n, n), boundary_z)
        p = dense_solve(assemble_dense(sys), build_rhs(sys))
        assert np.allclose(reconstruct_boundary_flux(sys, p, side="out"), 1.0, rtol=1e-12)
        assert np.allclose(reconstruct_boundary_flux(sys, p, side="in"), 1.0, rtol=1e-12)

    def test_conservation_random_fields(self, boundary_z):
        rng = np.random.default_rng(10)
        for trial in range(4):
            f = random_field(rng, 6, 5, 7, contrast=30.0)
            sys = build_system(f, boundary_z)
            p = dense_solve(assemble_dense(sys), build_rhs(sys))
            fin = reconstruct_boundary_flux(sys, p, side="in").sum()
            fout = reconstruct_boundary_flux(sys, p, side="out").sum()
            assert abs(fin - fout) <= 1e-10 * abs(fout)

    def test_homogeneous_effective(self, boundary_z):
        sys = build_system(constant_field(4, 4, 4, kx=2.0, ky=5.0, kz=3.25), boundary_z)
        p = dense_solve(assemble_dense(sys), build_rhs(sys))
        keff = effective_conductivity(sys, reconstruct_boundary_flux(sys, p))
        assert keff == pytest.approx(3.25, abs=1e-12)

    def test_series_layers_harmonic_mean(self, boundary_z):
        layers = np.array([1.0, 2.0, 0.5, 4.0, 1.5, 3.0])
        n, nz = 3, layers.size
        g = GridSpec(n, n, nz)
        kz = np.repeat(layers, n * n)
        ones = np.ones(g.n_cells)
        sys = build_system(OrthotropicField(g, ones, ones, kz), boundary_z)
        p = dense_solve(assemble_dense(sys), build_rhs(sys))
        keff = effective_conductivity(sys, reconstruct_boundary_flux(sys, p))
        assert keff == pytest.approx(nz / np.sum(1.0 / layers), rel=1e-10)


class TestL2Error:
    def test_exact_samples(self):
        g = GridSpec(4, 4, 4)
        X, Y, Z = g.cell_centers()
        p = (X + 2 * Y - Z).reshape(-1)
        assert l2_error_midpoint(g, p, lambda x, y, z: x + 2 * y - z) == 0.0

    def test_constant_offset(self):
        g = GridSpec(5, 5, 5)
        p = np.full(g.n_cells, 0.25)
        assert l2_error_midpoint(g, p, lambda x, y, z: np.zeros_like(x)) == pytest.approx(0.25)


class TestSmoothDiscretization:
    def test_pcg_matches_dense_on_smooth_miniature(self, boundary_z):
        # assembles the full manufactured problem at a tiny size and checks the
        # iterative path against direct factorization
        from etchomo import gen_smooth_problem

        field, exact, source = gen_smooth_problem(6)
        sys = build_system(field, boundary_z)
        X, Y, _ = field.grid.cell_centers()
        b = build_rhs(
            sys,
            dirichlet_in=exact(X[0], Y[0], 0.0),
            dirichlet_out=exact(X[0], Y[0], 1.0),
        )
        b = add_source(sys, b, source)
        direct = dense_solve(assemble_dense(sys), b)
        refs = solve_reference_lp(coefficient_stats(sys))
        apply_m = FctPreconditioner(field.grid, refs)
        iterative, rep = pcg(lambda u: apply_operator(sys, u), apply_m, b, 1e-12)
        assert rep.converged
        assert np.linalg.norm(iterative - direct) <= 1e-9 * np.linalg.norm(direct)
