import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from upressure import leaf as lf
from upressure import pressure as pr
from upressure import systems
from upressure.potentials import Constant, Geometric, trig

LAMBDA_U = (3 + math.sqrt(5)) / 2
LOG_LAMBDA = math.log(LAMBDA_U)
SMALL = dict(eps_list=(0.1, 0.05), n_min=4, n_max=9, offsets=4, base_point_count=3)


@pytest.fixture(scope="module")
def lin_leaf(toral):
    return lf.trace_leaf(toral, [0.1, 0.2], 0.2)


@pytest.fixture(scope="module")
def pleaf(perturbed):
    return lf.trace_leaf(perturbed, [0.3, 0.6, 0.1], 0.2)


def brute_force_separated(leaf, system, n, eps, grid=10_001):
    """Largest separated subset of a fine grid for a 1-D metric that is monotone along the leaf.

    Along an expanding leaf the Bowen metric between s < t only grows with t,
    so the left-to-right greedy choice on the grid is optimal.
    """
    s = np.linspace(-leaf.radius, leaf.radius, grid)
    chosen = [s[0]]
    for t in s[1:]:
        if lf.dun_distance(system, leaf, chosen[-1], t, n) >= eps - 1e-12:
            chosen.append(t)
    return chosen


def brute_force_cover(leaf, system, n, eps, grid=2001):
    """Smallest number of d^u_n balls of radius eps, centred at grid points, covering the grid."""
    s = np.linspace(-leaf.radius, leaf.radius, grid)
    count, i = 0, 0
    while i < grid:
        # furthest centre that still covers s[i], then everything it covers
        c = i
        while c + 1 < grid and lf.dun_distance(system, leaf, s[i], s[c + 1], n) <= eps + 1e-12:
            c += 1
        j = c
        while j + 1 < grid and lf.dun_distance(system, leaf, s[c], s[j + 1], n) <= eps + 1e-12:
            j += 1
        count += 1
        i = j + 1
    return count


class TestSeparatedSets:
    def test_one_point_at_diameter(self, lin_leaf, toral):
        assert len(pr.separated_set(toral, lin_leaf, 1, 0.4 + 1e-9)) == 1

    def test_five_points_n1(self, lin_leaf, toral):
        s = pr.separated_set(toral, lin_leaf, 1, 0.1)
        np.testing.assert_allclose(s, [-0.2, -0.1, 0.0, 0.1, 0.2], atol=1e-15)
        assert len(brute_force_separated(lin_leaf, toral, 1, 0.1)) == 5

    def test_eleven_points_n2(self, lin_leaf, toral):
        s = pr.separated_set(toral, lin_leaf, 2, 0.1)
        assert len(s) == math.floor(0.4 * LAMBDA_U / 0.1) + 1 == 11
        np.testing.assert_allclose(np.diff(s), 0.1 / LAMBDA_U, rtol=1e-12)
        assert len(brute_force_separated(lin_leaf, toral, 2, 0.1)) == 11

    @pytest.mark.parametrize("n,eps", [(3, 0.1), (4, 0.05), (2, 0.025)])
    def test_matches_brute_force_linear(self, lin_leaf, toral, n, eps):
        got = len(pr.separated_set(toral, lin_leaf, n, eps))
        assert got == math.floor(0.4 * LAMBDA_U ** (n - 1) / eps) + 1
        # grid points can only lose the last point to rounding
        want = len(brute_force_separated(lin_leaf, toral, n, eps))
        assert want <= got <= want + 1

    @pytest.mark.parametrize("n,eps", [(1, 0.1), (2, 0.1), (3, 0.05)])
    def test_matches_brute_force_perturbed(self, pleaf, perturbed, n, eps):
        got = len(pr.separated_set(perturbed, pleaf, n, eps))
        want = len(brute_force_separated(pleaf, perturbed, n, eps, grid=4001))
        assert abs(got - want) <= 1

    @pytest.mark.parametrize("offset", [0.0, 0.03, 0.07])
    def test_separation_and_maximality(self, pleaf, perturbed, offset):
        n, eps = 3, 0.1
        s = pr.separated_set(perturbed, pleaf, n, eps, offset)
        gaps = [lf.dun_distance(perturbed, pleaf, a, b, n) for a, b in zip(s[:-1], s[1:])]
        np.testing.assert_allclose(gaps, eps, rtol=2e-3)
        # nothing more fits to the right of the last point
        assert lf.dun_distance(perturbed, pleaf, s[-1], pleaf.radius, n) < eps * (1 + 2e-3)

    def test_offset_range(self, lin_leaf, toral):
        with pytest.raises(ValueError):
            pr.separated_set(toral, lin_leaf, 1, 0.1, 0.1)
        with pytest.raises(ValueError):
            pr.separated_set(toral, lin_leaf, 1, 0.0)


class TestSpanningSets:
    def test_two_balls_n1(self, lin_leaf, toral):
        s = pr.spanning_set(toral, lin_leaf, 1, 0.1)
        np.testing.assert_allclose(s, [-0.1, 0.1], atol=1e-15)
        assert brute_force_cover(lin_leaf, toral, 1, 0.1) == 2

    def test_one_ball_when_large(self, lin_leaf, toral):
        n = 3
        assert len(pr.spanning_set(toral, lin_leaf, n, 0.4 * LAMBDA_U ** (n - 1))) == 1

    @pytest.mark.parametrize("system_name", ["toral", "perturbed"])
    def test_covers(self, system_name, request, lin_leaf, pleaf):
        system = request.getfixturevalue(system_name)
        leaf = lin_leaf if system_name == "toral" else pleaf
        n, eps = 3, 0.1
        centers = pr.spanning_set(system, leaf, n, eps)
        grid = np.linspace(-0.2, 0.2, 301)
        # distance from every grid point to its nearest centre
        dmin = [min(lf.dun_distance(system, leaf, g, c, n) for c in centers) for g in grid]
        assert max(dmin) <= eps * (1 + 2e-3)

    @pytest.mark.parametrize("n,eps", [(1, 0.07), (2, 0.05), (3, 0.1)])
    def test_cardinality_chain(self, pleaf, perturbed, n, eps):
        span = len(pr.spanning_set(perturbed, pleaf, n, eps))
        sep = len(pr.separated_set(perturbed, pleaf, n, eps))
        span_half = len(pr.spanning_set(perturbed, pleaf, n, eps / 2))
        assert span <= sep <= span_half

    def test_chain_boundary_case(self, pleaf, perturbed):
        # length exactly 4 eps: closed eps/2 balls hold two points eps apart
        assert len(pr.separated_set(perturbed, pleaf, 1, 0.1)) == 5
        assert len(pr.spanning_set(perturbed, pleaf, 1, 0.05)) == 4

    @given(st.floats(0.01, 5.0), st.floats(0.005, 0.3))
    def test_count_chain_property(self, total, eps):
        span, sep, half = pr.spanning_count(total, eps), pr.separated_count(total, eps), pr.spanning_count(total, eps / 2)
        assert span <= sep <= half + 1
        ratio = total / eps
        if abs(ratio - round(ratio)) > 1e-6:
            assert sep <= half


class TestWeightedSums:
    def test_zero(self, lin_leaf, toral):
        pts = pr.separated_set(toral, lin_leaf, 2, 0.1)
        assert pr.weighted_sum(toral, Constant(0.0), lin_leaf, pts, 2) == pytest.approx(math.log(11), abs=1e-15)

    def test_constant(self, lin_leaf, toral):
        pts = pr.separated_set(toral, lin_leaf, 2, 0.1)
        got = pr.weighted_sum(toral, Constant(0.3), lin_leaf, pts, 5)
        assert got == pytest.approx(math.log(11) + 1.5, abs=1e-14)

    def test_geometric_linear(self, lin_leaf, toral):
        pts = pr.separated_set(toral, lin_leaf, 2, 0.1)
        got = pr.weighted_sum(toral, Geometric(), lin_leaf, pts, 6)
        assert got == pytest.approx(math.log(11) - 6 * LOG_LAMBDA, abs=1e-13)

    @pytest.mark.parametrize("system_name", ["rotation", "perturbed"])
    def test_matches_naive_birkhoff(self, system_name, request):
        system = request.getfixturevalue(system_name)
        leaf = lf.trace_leaf(system, [0.4, 0.2, 0.8], 0.2)
        phi = trig((0.5, (1, 0), "cos"), (0.2, (1, 1, 1), "sin"))
        s = np.linspace(-0.2, 0.2, 37)
        n = 7
        y = leaf.point_at(s)
        total = np.zeros(len(s))
        for _ in range(n):
            total += phi(system, y)
            y = systems.apply(system, y)
        want = math.log(np.sum(np.exp(total)))
        assert pr.weighted_sum(system, phi, leaf, s, n) == pytest.approx(want, abs=1e-11)

    def test_geometric_matches_backward_directions(self, perturbed, pleaf):
        # tangents tracked along the orbit against directions rebuilt from backward orbits
        s = np.linspace(-0.2, 0.2, 9)
        n = 5
        y = pleaf.point_at(s)
        total = np.zeros(len(s))
        for _ in range(n):
            total -= np.log(systems.expansion_factor(perturbed, y))
            y = systems.apply(perturbed, y)
        want = math.log(np.sum(np.exp(total)))
        assert pr.weighted_sum(perturbed, Geometric(), pleaf, s, n) == pytest.approx(want, abs=1e-5)

    def test_empty_set(self, lin_leaf, toral):
        assert pr.weighted_sum(toral, trig((1.0, (1, 0), "cos")), lin_leaf, [], 3) == -np.inf

    def test_chunking_is_invisible(self, rotation, monkeypatch):
        leaf = lf.trace_leaf(rotation, [0.4, 0.2, 0.8], 0.2)
        phi = trig((0.5, (1, 0), "cos"))
        s = np.linspace(-0.2, 0.2, 1001)
        whole = pr.weighted_sum(rotation, phi, leaf, s, 4)
        monkeypatch.setattr(pr, "CHUNK", 64)
        assert pr.weighted_sum(rotation, phi, leaf, s, 4) == pytest.approx(whole, abs=1e-13)

    def test_large_values_do_not_overflow(self, lin_leaf, toral):
        pts = pr.separated_set(toral, lin_leaf, 2, 0.1)
        got = pr.weighted_sum(toral, trig((400.0, (1, 0), "cos")), lin_leaf, pts, 10)
        assert np.isfinite(got)


class TestParams:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"eps_list": (0.05, 0.1)},
            {"eps_list": ()},
            {"eps_list": (0.5,)},
            {"delta": 0.6},
            {"n_min": 0},
            {"n_min": 4, "n_max": 7},
            {"offsets": 0},
            {"plateau_tol": 0.0},
        ],
    )
    def test_rejects(self, toral, kwargs):
        with pytest.raises(ValueError):
            pr.make_params(toral, **kwargs)

    def test_no_base_points(self):
        with pytest.raises(ValueError):
            pr.SeparationParams()

    def test_fit_window(self, toral):
        p = pr.make_params(toral)
        np.testing.assert_array_equal(p.fit_values, np.arange(9, 15))

    def test_base_points_seeded(self, rotation):
        a = pr.default_base_points(rotation, 5, 0)
        assert a == pr.default_base_points(rotation, 5, 0)
        assert a != pr.default_base_points(rotation, 5, 1)
        assert all(0 <= c < 1 for p in a for c in p)

    def test_fit_slope_exact(self):
        slope, rms = pr.fit_slope([1, 2, 3, 4], [1.5, 3.5, 5.5, 7.5])
        assert slope == pytest.approx(2.0, abs=1e-14) and rms < 1e-14


class TestEstimate:
    def test_zero_potential(self, rotation):
        est = pr.estimate_pressure(rotation, Constant(0.0), pr.make_params(rotation))
        assert est.value == pytest.approx(LOG_LAMBDA, abs=0.05)
        assert est.converged
        # regression value of the default configuration
        assert est.value == pytest.approx(0.9624236181260364, abs=1e-9)

    def test_geometric_potential(self, rotation):
        est = pr.estimate_pressure(rotation, Geometric(), pr.make_params(rotation))
        assert abs(est.value) <= 0.05

    def test_constant_potential(self, rotation):
        est = pr.estimate_pressure(rotation, Constant(0.3), pr.make_params(rotation))
        assert est.value == pytest.approx(LOG_LAMBDA + 0.3, abs=0.05)

    def test_frozen_small_config(self, rotation, perturbed):
        # regression values for a reduced configuration
        want = {
            rotation: [0.9624189303561645, 1.0244740865606765, -4.719763042615455e-06],
            perturbed: [0.9624170682824471, 1.0280489097734709, -1.565006608883479e-05],
        }
        for system, values in want.items():
            p = pr.make_params(system, **SMALL)
            es = pr.estimate_pressure_many(system, [Constant(0.0), trig((0.5, (1, 0), "cos")), Geometric()], p)
            np.testing.assert_allclose([e.value for e in es], values, atol=1e-9)

    def test_exact_constant_shift(self, perturbed):
        p = pr.make_params(perturbed, **SMALL)
        phi = trig((0.5, (1, 0), "cos"), (0.1, (0, 1), "sin"))
        a, b = pr.estimate_pressure_many(perturbed, [phi, phi + 0.7], p)
        assert abs((b.value - a.value) - 0.7) <= 1e-12
        np.testing.assert_allclose(b.log_sep - a.log_sep, np.broadcast_to(0.7 * p.n_values[None, None, :, None], a.log_sep.shape), atol=1e-11)

    def test_value_and_diagnostics(self, rotation):
        p = pr.make_params(rotation, **SMALL)
        est = pr.estimate_pressure(rotation, trig((0.5, (1, 0), "cos")), p)
        rates = est.rates_sep[:, -1]
        assert rates.min() <= est.value <= rates.max()
        assert est.spread == pytest.approx(rates.max() - rates.min(), abs=0)
        assert abs(est.bracket[0] - est.bracket[1]) <= 0.1
        assert est.log_sep.shape == (3, 2, 6, 4)
        assert len(list(est.rows())) == 3 * 2 * 6 * 4
        assert set(est.summary()) == {"value", "bracket", "spread", "converged", "eps_rates"}

    def test_separated_below_spanning_at_half_eps(self, perturbed):
        # S(n, eps) <= Q(n, eps / 2) e^{n tau} with tau the modulus of phi at scale eps
        p = pr.make_params(perturbed, eps_list=(0.1, 0.05), n_min=3, n_max=7, offsets=4, base_point_count=2)
        phi = trig((0.5, (1, 0), "cos"))
        est = pr.estimate_pressure(perturbed, phi, p)
        tau = phi.modulus(perturbed, 0.1)
        sep = est.log_sep[:, 0].max(axis=2)
        span = est.log_span[:, 1]
        assert np.all(sep <= span + p.n_values * tau + 1e-12)

    def test_not_converged_flag(self, rotation):
        # a single base point and a coarse eps pair show a visible eps dependence
        p = pr.make_params(rotation, eps_list=(0.3, 0.01), n_min=1, n_max=5, offsets=1, base_point_count=1,
                           plateau_tol=1e-6)
        est = pr.estimate_pressure(rotation, trig((2.0, (1, 0), "cos")), p)
        assert not est.converged

    def test_threads_are_bitwise_identical(self, perturbed):
        p = pr.make_params(perturbed, **SMALL)
        phi = trig((0.5, (1, 0), "cos"))
        a = pr.estimate_pressure(perturbed, phi, p, threads=1)
        b = pr.estimate_pressure(perturbed, phi, p, threads=3)
        np.testing.assert_array_equal(a.log_sep, b.log_sep)
        np.testing.assert_array_equal(a.log_span, b.log_span)

    def test_volume_growth(self, rotation, perturbed):
        assert pr.volume_growth_rate(rotation, pr.make_params(rotation, **SMALL)) == pytest.approx(LOG_LAMBDA, abs=1e-12)
        assert pr.volume_growth_rate(perturbed, pr.make_params(perturbed, **SMALL)) == pytest.approx(LOG_LAMBDA, abs=0.01)
