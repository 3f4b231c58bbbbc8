import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mems_pullin.domain import (
    GridFunction,
    ball_volume,
    disk_mask,
    load_bitmap,
    lshape_mask,
    make_ball,
    make_interval,
    make_mask,
    measure,
    read_grid_csv,
    save_bitmap,
    sphere_area,
    square_mask,
    symmetrize_domain,
    write_grid_csv,
)
from mems_pullin.errors import InvalidArgument


def test_sphere_area_low_dimensions():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(4) == pytest.approx(2 * math.pi**2)


class TestInterval:
    def test_spacing(self):
        assert make_interval(1.0, 3).spacing == 0.25
        assert make_interval(2.0, 7).spacing == 0.25

    def test_measure_within_one_cell(self):
        dom = make_interval(1.0, 127)
        assert abs(measure(dom) - 1.0) <= dom.spacing

    @pytest.mark.parametrize("length,n", [(0.0, 4), (-1.0, 4), (1.0, 1)])
    def test_rejects_bad_arguments(self, length, n):
        with pytest.raises(InvalidArgument):
            make_interval(length, n)


class TestMask:
    def test_full_square_measure(self):
        dom = make_mask(2, np.ones((4, 4), bool), 0.5)
        assert measure(dom) == pytest.approx(4.0)

    def test_single_cell(self):
        assert measure(make_mask(2, [[True]], 1.0)) == 1.0

    def test_rasterized_disk_measure(self):
        dom = disk_mask(1.0, 1 / 64)
        assert abs(measure(dom) - math.pi) < 0.05

    def test_empty_mask_rejected(self):
        with pytest.raises(InvalidArgument):
            make_mask(2, np.zeros((3, 3), bool), 1.0)

    def test_disconnected_mask_warns(self):
        bitmap = np.zeros((5, 5), bool)
        bitmap[0, 0] = bitmap[4, 4] = True
        with pytest.warns(UserWarning):
            dom = make_mask(2, bitmap, 1.0)
        assert not dom.connected

    def test_centered_coordinates(self):
        dom = square_mask(1.0, 0.25)
        assert np.allclose(dom.coords.mean(axis=0), 0.0)

    def test_lshape_removes_a_quadrant(self):
        dom = lshape_mask(2.0, 0.125)
        assert measure(dom) == pytest.approx(3.0)


class TestBall:
    def test_measure_matches_formula(self):
        ball = make_ball(2, 1.0, 65)
        assert abs(measure(ball) - math.pi) < 1e-12
        assert abs(ball.cell_volumes.sum() - math.pi) < 1e-12

    def test_nodes_increase_to_radius(self):
        r = make_ball(3, 2.0, 17).radii
        assert r[0] == 0.0 and r[-1] == 2.0
        assert np.all(np.diff(r) > 0)


class TestSymmetrize:
    def test_interval_gives_half_length_radius(self):
        assert symmetrize_domain(make_interval(1.0, 32)).radius == pytest.approx(0.5)

    def test_measure_pi_mask_gives_unit_disk(self):
        side = math.sqrt(math.pi)
        dom = make_mask(2, np.ones((8, 8), bool), side / 8)
        assert abs(symmetrize_domain(dom).radius - 1.0) < 1e-12

    def test_3d_mask_of_ball_volume(self):
        side = (4 * math.pi / 3) ** (1 / 3)
        dom = make_mask(3, np.ones((4, 4, 4), bool), side / 4)
        assert abs(symmetrize_domain(dom).radius - 1.0) < 1e-12

    def test_idempotent_on_balls(self):
        ball = make_ball(3, 0.7, 20)
        assert abs(symmetrize_domain(ball).radius - 0.7) < 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 3), st.floats(0.1, 5.0), st.integers(2, 200))
    def test_measure_preserved(self, d, radius, n):
        ball = make_ball(d, radius, n)
        sym = symmetrize_domain(ball, 33)
        assert abs(measure(sym) - ball_volume(d, radius)) <= 1e-12 * ball_volume(d, radius)


def test_bitmap_roundtrip(tmp_path):
    dom = lshape_mask(1.0, 0.125)
    path = tmp_path / "l.txt"
    save_bitmap(dom, path)
    back = load_bitmap(path)
    assert np.array_equal(back.bitmap, dom.bitmap)
    assert back.spacing == dom.spacing


def test_bitmap_format_is_plain_text(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("2 2 3 0.5\n011\n110\n")
    dom = load_bitmap(path)
    assert dom.n_cells == 4
    assert measure(dom) == pytest.approx(1.0)


def test_bitmap_bad_body(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("2 2 2 0.5\n01\n1x\n")
    with pytest.raises(InvalidArgument):
        load_bitmap(path)


class TestGridFunction:
    def test_length_checked(self):
        with pytest.raises(InvalidArgument):
            GridFunction(make_interval(1.0, 4), [1.0, 2.0])

    def test_values_read_only(self):
        u = GridFunction.constant(make_interval(1.0, 4), 1.0)
        with pytest.raises(ValueError):
            u.values[0] = 2.0

    def test_from_callable_on_ball_uses_radii(self):
        ball = make_ball(2, 1.0, 5)
        u = GridFunction.from_callable(ball, lambda r: 1 - r**2)
        assert np.allclose(u.values, 1 - ball.radii**2)

    def test_csv_roundtrip(self, tmp_path):
        dom = disk_mask(1.0, 0.25)
        u = GridFunction.from_callable(dom, lambda x, y: x + 2 * y)
        path = tmp_path / "u.csv"
        rows = write_grid_csv(path, u, names=("u",))
        assert rows == dom.n_cells
        header = path.read_text().splitlines()[0]
        assert header == "index,x,y,u"
        back = read_grid_csv(path, dom, "u")
        assert np.array_equal(back.values, u.values)
