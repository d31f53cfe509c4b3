import numpy as np
import pytest

from configuration import Configuration, WindowedConfiguration, disjoint_union, dumps, loads, periodize, random_shift, read_configuration, restrict, translate, wrap_into, write_configuration
from errors import DimensionMismatchError, OverlapError
from geometry import Box, Complement
from sampler import poisson_sample


def config_1d(*xs: float) -> Configuration:
    return Configuration(np.array(xs, dtype=float).reshape(-1, 1), 1)


class TestConfiguration:
    def test_rejects_duplicates(self):
        with pytest.raises(OverlapError):
            config_1d(0.0, 1.0, 0.0)

    def test_distinct_by_any_margin(self):
        assert len(config_1d(0.0, np.nextafter(0.0, 1.0))) == 2

    def test_points_are_read_only(self):
        w = config_1d(0.0, 1.0)
        with pytest.raises(ValueError):
            w.points[0, 0] = 5.0

    def test_set_equality(self):
        assert config_1d(2.0, 1.0) == config_1d(1.0, 2.0)
        assert config_1d(2.0) != config_1d(1.0)

    def test_windowed_configuration_checks_membership(self):
        with pytest.raises(ValueError):
            WindowedConfiguration(config_1d(1.5), Box.centered_cube(1, 1))

    def test_windowed_configuration_checks_dimension(self):
        with pytest.raises(DimensionMismatchError):
            WindowedConfiguration(config_1d(0.5), Box.centered_cube(1, 2))


class TestRestrict:
    def test_empty(self):
        assert len(restrict(Configuration.empty(1), Box((0.0,), (1.0,)))) == 0

    def test_membership(self):
        assert restrict(config_1d(0.5, 2.5), Box((0.0,), (1.0,))) == config_1d(0.5)

    def test_partition_identity(self, rng):
        w = poisson_sample(Box.centered_cube(2, 2), 3.0, rng)
        delta = Box((-0.5, -1.0), (1.0, 0.5))

        inside = restrict(w, delta)
        outside = restrict(w, Complement(delta))

        assert len(inside) + len(outside) == len(w)
        assert disjoint_union(inside, outside) == w

    def test_no_region_is_identity(self):
        w = config_1d(0.5, 2.5)
        assert restrict(w, None) is w


class TestTranslate:
    def test_zero_is_identity(self):
        w = config_1d(0.25, -3.0)
        assert translate(w, [0.0]) == w

    def test_shift(self):
        assert translate(config_1d(1.0, 2.0), [-1.0]) == config_1d(0.0, 1.0)

    def test_preserves_distances(self, rng):
        from scipy.spatial.distance import pdist

        w = poisson_sample(Box.centered_cube(1, 3), 5.0, rng)
        shifted = translate(w, [0.3, -12.5, 7.0])

        assert pdist(shifted.points) == pytest.approx(pdist(w.points), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            translate(config_1d(1.0), [1.0, 2.0])


class TestDisjointUnion:
    def test_with_empty(self):
        b = config_1d(1.0, 2.0)
        assert disjoint_union(Configuration.empty(1), b) == b

    def test_union(self):
        assert disjoint_union(config_1d(0.0), config_1d(1.0)) == config_1d(0.0, 1.0)

    def test_overlap(self):
        with pytest.raises(OverlapError):
            disjoint_union(config_1d(0.0), config_1d(0.0))


class TestPeriodize:
    def test_no_copies_is_identity(self):
        w = WindowedConfiguration(config_1d(0.5, -0.25), Box.centered_cube(1, 1))
        tiled = periodize(w, 0)

        assert tiled.config == w.config
        assert tiled.window == w.window

    def test_one_copy_in_one_dimension(self):
        tiled = periodize(WindowedConfiguration(config_1d(0.5), Box.centered_cube(1, 1)), 1)

        assert tiled.config == config_1d(-1.5, 0.5, 2.5)
        assert tiled.window == Box.centered_cube(3, 1)

    def test_tile_count(self, rng):
        window = Box.centered_cube(1, 2)
        w = WindowedConfiguration(poisson_sample(window, 4.0, rng), window)

        assert len(periodize(w, 1).config) == 9 * len(w.config)

    def test_central_tile_recovers_input(self, rng):
        window = Box.centered_cube(1, 2)
        w = WindowedConfiguration(poisson_sample(window, 4.0, rng), window)

        assert restrict(periodize(w, 2).config, window) == w.config

    def test_requires_centered_cube(self):
        with pytest.raises(ValueError):
            periodize(WindowedConfiguration(config_1d(0.5), Box((0.0,), (1.0,))), 1)


class TestRandomShift:
    def test_degenerate_window(self, rng):
        w = config_1d(0.5, 1.5)
        assert random_shift(w, [0.25], rng) == translate(w, [-0.25])

    def test_count_preserved(self, rng):
        w = config_1d(0.5, 1.5, -0.75)
        for _ in range(20):
            assert len(random_shift(w, Box.centered_cube(1, 1), rng)) == 3

    def test_single_point_spreads_uniformly(self, rng):
        w = config_1d(0.0)
        shifts = np.array([random_shift(w, Box.centered_cube(1, 1), rng).points[0, 0] for _ in range(4000)])

        # -U for U uniform on ]-1, 1]
        assert shifts.mean() == pytest.approx(0.0, abs=3 * np.sqrt(1 / 3 / 4000))
        assert np.mean(shifts > 0) == pytest.approx(0.5, abs=3 * np.sqrt(0.25 / 4000))


class TestWrapInto:
    def test_points_inside_are_untouched(self):
        w = config_1d(0.3, -0.9, 1.0)
        assert np.array_equal(wrap_into(w, Box.centered_cube(1, 1)).points, w.points)

    def test_wraps_along_the_torus(self):
        wrapped = wrap_into(config_1d(1.5, -1.25, -1.0), Box.centered_cube(1, 1))
        assert wrapped.points[:, 0] == pytest.approx([-0.5, 0.75, 1.0])

    @pytest.mark.parametrize("upper", [1e-3, 1e-6, 0.5])
    def test_points_just_past_the_upper_face(self, upper):
        window = Box((-2.0,), (upper,))
        w = config_1d(np.nextafter(upper, np.inf), -2.0)
        wrapped = wrap_into(w, window)

        assert np.all(window.contains(wrapped.points))
        # the lower face and the upper face are the same point of the torus
        assert min(abs(wrapped.points[0, 0] - upper), abs(wrapped.points[0, 0] + 2.0)) < 1e-12
        assert wrapped.points[1, 0] == upper


class TestSerialization:
    def test_header(self):
        assert dumps(config_1d(0.5)).splitlines()[0] == "dim=1 count=1"

    def test_exact_round_trip(self, rng):
        w = poisson_sample(Box.centered_cube(1, 2), 10.0, rng)
        assert np.array_equal(loads(dumps(w)).sorted_points(), w.sorted_points())

    def test_empty(self):
        w = loads(dumps(Configuration.empty(3)))
        assert len(w) == 0
        assert w.dim == 3

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            loads("dim=1 count=2\n0.5\n")

    def test_file(self, tmp_path):
        w = config_1d(0.1, 0.2)
        write_configuration(tmp_path / "w.txt", w)
        assert read_configuration(tmp_path / "w.txt") == w
