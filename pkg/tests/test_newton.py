import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from mems_pullin.domain import GridFunction, ball_mask, cube_mask, make_ball, make_interval, make_mask
from mems_pullin.errors import InvalidArgument, SingularityError
from mems_pullin.mems import CONVERGED, ITERATION_LIMIT, TOUCHDOWN, IterationConfig
from mems_pullin.newton import (
    CUBE_INVERSE_DISTANCE,
    KernelQuadrature,
    cell_self_integral,
    fundamental_solution,
    newton_minimal_solution,
    newton_mu1,
    newton_potential,
    newton_pull_in,
    potential_at,
    pullin_upper_bound,
    pullin_upper_bound_weighted,
)
from mems_pullin.spectral import EigenConfig


@pytest.fixture(scope="module")
def ball_quad():
    return KernelQuadrature(make_ball(3, 1.0, 33))


@pytest.fixture(scope="module")
def cube_quad():
    return KernelQuadrature(cube_mask(1.0, 1 / 8))


class TestKernel:
    def test_fundamental_solution_values(self):
        assert fundamental_solution(3, 1.0) == pytest.approx(1 / (4 * math.pi))
        assert fundamental_solution(3, 2.0) == pytest.approx(1 / (8 * math.pi))
        assert fundamental_solution(4, 1.0) == pytest.approx(1 / (4 * math.pi**2))

    def test_fundamental_solution_errors(self):
        with pytest.raises(InvalidArgument):
            fundamental_solution(2, 1.0)
        with pytest.raises(SingularityError):
            fundamental_solution(3, 0.0)

    def test_cube_constant_matches_quadrature_oracle(self):
        assert CUBE_INVERSE_DISTANCE == pytest.approx(oracles.CUBE_INVERSE_DISTANCE, rel=1e-14)
        assert cell_self_integral(3, 0.5) == pytest.approx(oracles.CUBE_INVERSE_DISTANCE * 0.25 / (4 * math.pi))

    def test_four_dimensional_self_weight_uses_equal_volume_ball(self):
        h = 0.1
        rho = (4 * h**4 / (2 * math.pi**2)) ** 0.25
        assert cell_self_integral(4, h) == pytest.approx(rho**2 / 4)

    def test_low_dimensions_rejected(self):
        with pytest.raises(InvalidArgument):
            KernelQuadrature(make_interval(1.0, 8))

    @pytest.mark.parametrize("fixture", ["ball_quad", "cube_quad"])
    def test_weights_symmetric_and_positive(self, fixture, request):
        quad = request.getfixturevalue(fixture)
        w = quad.weights(np.arange(quad.n))
        assert np.array_equal(w, w.T)
        assert np.all(w > 0) and np.all(np.isfinite(w))

    def test_matrix_free_matches_dense(self):
        dom = cube_mask(1.0, 1 / 6)
        dense = KernelQuadrature(dom)
        free = KernelQuadrature(dom, dense_max_cells=10, block=17)
        assert dense.dense and not free.dense
        x = np.random.default_rng(3).random(dom.n_cells)
        assert np.allclose(dense.apply(x), free.apply(x), rtol=1e-13)


class TestPotential:
    def test_zero_density(self, cube_quad):
        z = GridFunction.constant(cube_quad.support_domain, 0.0)
        assert np.all(newton_potential(cube_quad, z).values == 0.0)

    def test_uniform_ball_center(self):
        quad = KernelQuadrature(make_ball(3, 1.0, 32))
        u = newton_potential(quad, GridFunction.constant(quad.support_domain, 1.0))
        assert u.values[0] == pytest.approx(0.5, rel=0.01)
        exact = oracles.uniform_ball_potential(1.0, quad.support_domain.radii)
        assert np.max(np.abs(u.values - exact)) <= 0.01 * 0.5

    def test_uniform_ball_mask_center(self):
        dom = ball_mask(1.0, 1 / 12)
        quad = KernelQuadrature(dom)
        u = newton_potential(quad, GridFunction.constant(dom, 1.0))
        # the rasterized ball has a slightly different volume; rescale its radius
        radius = (3 * dom.cell_volumes.sum() / (4 * math.pi)) ** (1 / 3)
        assert u.max() == pytest.approx(radius**2 / 2, rel=0.02)

    def test_point_like_density(self):
        dom = cube_mask(1.0, 1 / 9)
        quad = KernelQuadrature(dom)
        centre = int(np.argmin(np.linalg.norm(dom.coords, axis=1)))
        dens = np.zeros(dom.n_cells)
        dens[centre] = 1.0
        u = newton_potential(quad, GridFunction(dom, dens)).values
        r = np.linalg.norm(dom.coords - dom.coords[centre], axis=1)
        far = r > 2 * dom.spacing
        expected = fundamental_solution(3, r[far]) * dom.spacing**3
        assert np.max(np.abs(u[far] / expected - 1)) < 0.02

    def test_off_grid_evaluation_decays(self, cube_quad):
        dens = GridFunction.constant(cube_quad.support_domain, 1.0)
        far = potential_at(cube_quad, dens, [[10.0, 0.0, 0.0]])
        assert far[0] == pytest.approx(fundamental_solution(3, 10.0), rel=0.01)

    def test_domain_mismatch(self, cube_quad):
        with pytest.raises(InvalidArgument):
            newton_potential(cube_quad, GridFunction.constant(make_ball(3, 1.0, 5), 1.0))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.floats(0.0, 2.0))
    def test_monotone_in_density(self, seed, scale):
        dom = cube_mask(1.0, 1 / 5)
        quad = KernelQuadrature(dom)
        rng = np.random.default_rng(seed)
        d1 = rng.random(dom.n_cells)
        d2 = d1 + scale * rng.random(dom.n_cells)
        u1 = newton_potential(quad, GridFunction(dom, d1)).values
        u2 = newton_potential(quad, GridFunction(dom, d2)).values
        assert np.all(u1 <= u2)
        assert np.all(u1 >= 0)


class TestPicard:
    def test_zero_voltage(self, ball_quad):
        out = newton_minimal_solution(ball_quad, 0.0, GridFunction.constant(ball_quad.support_domain, 1.0))
        assert out.status == CONVERGED and np.all(out.solution.values == 0)

    def test_small_voltage_converges(self, ball_quad):
        out = newton_minimal_solution(ball_quad, 0.05, GridFunction.constant(ball_quad.support_domain, 1.0))
        assert out.status == CONVERGED
        assert out.solution.max() < 0.1
        # the first iterate is lam * R^2 / 2 at the centre; the limit lies above it
        assert out.solution.values[0] >= 0.05 * 0.5 * 0.99

    def test_iterates_increase(self, cube_quad):
        dom = cube_quad.support_domain
        f = GridFunction.constant(dom, 1.0)
        prev = np.zeros(dom.n_cells)
        for m in range(1, 6):
            out = newton_minimal_solution(cube_quad, 0.3, f, config=IterationConfig(max_picard=m))
            cur = (out.solution or out.last_iterate).values
            assert np.all(cur >= prev)
            prev = cur

    def test_above_bound_fails(self, ball_quad):
        mu1 = newton_mu1(ball_quad).mu1
        lam = 1.01 * pullin_upper_bound(mu1, 1.0)
        out = newton_minimal_solution(ball_quad, lam, GridFunction.constant(ball_quad.support_domain, 1.0))
        assert out.status in (TOUCHDOWN, ITERATION_LIMIT)


class TestEigen:
    def test_matches_dense_eigensolve(self, cube_quad):
        eig = newton_mu1(cube_quad)
        rho = np.linalg.eigvalsh(cube_quad.symmetric_matrix())[-1]
        assert eig.mu1 == pytest.approx(1 / rho, rel=1e-6)
        assert np.all(eig.phi1.values > 0) and eig.phi1.max() == 1.0
        resid = eig.phi1.values - eig.mu1 * cube_quad.apply(eig.phi1.values)
        assert np.max(np.abs(resid)) <= 1e-7

    def test_single_cell(self):
        quad = KernelQuadrature(make_mask(3, np.ones((1, 1, 1), bool), 0.5))
        assert newton_mu1(quad).mu1 == pytest.approx(1 / quad.matrix()[0, 0], rel=1e-12)

    def test_unit_ball_close_to_continuum(self):
        # the continuum value for the unit 3-ball is pi^2 / 4 (phi = sin(pi r / 2) / r type profile)
        coarse = newton_mu1(KernelQuadrature(make_ball(3, 1.0, 65))).mu1
        fine = newton_mu1(KernelQuadrature(make_ball(3, 1.0, 129))).mu1
        assert abs(coarse / fine - 1) < 0.02
        assert fine == pytest.approx(oracles.NEWTON_MU1_UNIT_BALL_3D, rel=0.01)

    def test_scaling(self):
        small = newton_mu1(KernelQuadrature(cube_mask(1.0, 1 / 6))).mu1
        big = newton_mu1(KernelQuadrature(cube_mask(2.0, 2 / 6))).mu1
        assert big == pytest.approx(small / 4, rel=1e-9)

    def test_config_controls_tolerance(self, cube_quad):
        loose = newton_mu1(cube_quad, EigenConfig(eigen_tol=1e-3))
        tight = newton_mu1(cube_quad, EigenConfig(eigen_tol=1e-10))
        assert loose.iterations <= tight.iterations
        assert loose.mu1 == pytest.approx(tight.mu1, rel=1e-3)


class TestBounds:
    def test_arithmetic(self):
        assert pullin_upper_bound(27.0, 1.0) == pytest.approx(4.0)
        assert pullin_upper_bound(27 / 4, 2.0) == pytest.approx(0.5)

    def test_weighted(self, ball_quad):
        eig = newton_mu1(ball_quad)
        dom = ball_quad.support_domain
        one = GridFunction.constant(dom, 1.0)
        assert pullin_upper_bound_weighted(eig, one) == pytest.approx(4 * eig.mu1 / 27)
        small = GridFunction.constant(dom, 4 / 27)
        assert pullin_upper_bound_weighted(eig, small) == pytest.approx(eig.mu1)

    def test_pull_in_below_bounds(self, ball_quad):
        dom = ball_quad.support_domain
        f = GridFunction.constant(dom, 1.0)
        res = newton_pull_in(ball_quad, f)
        eig = newton_mu1(ball_quad)
        slack = res.lambda_hi - res.lambda_lo
        assert res.lambda_hi <= pullin_upper_bound(eig.mu1, 1.0) + slack
        assert res.lambda_hi <= pullin_upper_bound_weighted(eig, f) + slack
        assert res.lambda_hi <= eig.mu1

    def test_ball_below_cube(self):
        cube = cube_mask((4 * math.pi / 3) ** (1 / 3), (4 * math.pi / 3) ** (1 / 3) / 8)
        qc = KernelQuadrature(cube)
        qb = KernelQuadrature(make_ball(3, 1.0, 65))
        lc = newton_pull_in(qc, GridFunction.constant(cube, 1.0))
        lb = newton_pull_in(qb, GridFunction.constant(qb.support_domain, 1.0))
        assert lb.lambda_lo <= lc.lambda_hi * 1.05
