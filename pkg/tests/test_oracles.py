"""The frozen reference values must be reproducible from their oracles."""

import math

import numpy as np
import pytest

import oracles


def test_lambda_star_1d_frozen():
    assert oracles.lambda_star_1d() == pytest.approx(oracles.LAMBDA_STAR_1D, rel=1e-7)


def test_lambda_star_disk_frozen():
    assert oracles.lambda_star_disk() == pytest.approx(oracles.LAMBDA_STAR_DISK, rel=1e-6)


def test_disk_voltage_below_interval_voltage():
    # a unit disk is "wider" than the unit interval, so it pulls in earlier
    assert oracles.LAMBDA_STAR_DISK < oracles.LAMBDA_STAR_1D


def test_j01_frozen():
    assert oracles.j01() == pytest.approx(oracles.J01, abs=1e-14)
    assert abs(oracles.bessel_j0(oracles.J01)) < 1e-14


def test_cube_inverse_distance_frozen():
    closed = 3 * math.log((math.sqrt(3) + 1) / (math.sqrt(3) - 1)) - math.pi / 2
    assert closed == pytest.approx(oracles.CUBE_INVERSE_DISTANCE, rel=1e-14)
    assert oracles.cube_inverse_distance() == pytest.approx(closed, rel=1e-9)


def test_picard_second_iterate_frozen():
    assert oracles.picard_u2_mid() == pytest.approx(oracles.PICARD_U2_MID, rel=1e-7)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_plaplace_closed_form_matches_quadrature(d, p):
    for r in (0.0, 0.3, 0.8):
        exact = float(oracles.plaplace_ball_solution(d, p, 1.0, r))
        assert exact == pytest.approx(oracles.plaplace_ball_by_quadrature(d, p, 1.0, r), rel=1e-9)


def test_plaplace_p2_is_laplace():
    r = np.linspace(0, 1, 5)
    assert np.allclose(oracles.plaplace_ball_solution(2, 2.0, 1.0, r), (1 - r**2) / 4)


def test_uniform_ball_potential_continuity():
    # outside the ball the potential is R^3 / (3 r); values and slopes agree at r = R
    R = 1.3
    assert float(oracles.uniform_ball_potential(R, R)) == pytest.approx(R**3 / (3 * R))
