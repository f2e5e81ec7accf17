import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from upressure import leaf as lf
from upressure import systems

LAMBDA_U = (3 + math.sqrt(5)) / 2


@pytest.fixture(scope="module")
def pleaf(perturbed):
    return lf.trace_leaf(perturbed, [0.3, 0.6, 0.1], 0.2)


def lift_polyline_length(system, leaf, s1, s2, n_iter, samples=4001):
    """Length of f^n_iter of the arc, by iterating a fine polyline on the lift."""
    p = leaf.lift_at(np.linspace(s1, s2, samples))
    for _ in range(n_iter):
        p = systems.lift_apply(system, p)
    return float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1)))


class TestLinearLeaf:
    def test_straight_segment(self, toral):
        leaf = lf.trace_leaf(toral, [0.0, 0.0], 0.2)
        v = toral.unstable_eigendirection
        np.testing.assert_allclose(leaf.points, systems.wrap(leaf.s[:, None] * v), atol=1e-15)
        assert leaf.straight and leaf.construction_depth == 0

    def test_endpoints_at_radius(self, toral):
        leaf = lf.trace_leaf(toral, [0.0, 0.0], 0.2)
        assert leaf.s[0] == -0.2 and leaf.s[-1] == 0.2
        assert lf.du_distance(leaf, 0.0, 0.2) == pytest.approx(0.2, abs=1e-15)
        assert np.linalg.norm(leaf.lift[-1] - leaf.base) == pytest.approx(0.2, abs=1e-15)

    def test_sample_invariants(self, rotation):
        leaf = lf.trace_leaf(rotation, [0.9, 0.95, 0.5], 0.2, resolution=1e-3)
        assert np.all(np.diff(leaf.s) > 0)
        assert np.max(np.diff(leaf.s)) <= 1e-3 + 1e-15
        np.testing.assert_array_equal(leaf.point_at(0.0), leaf.base)
        assert np.all(leaf.points[:, 2] == 0.5)

    def test_backward_contraction_exact(self, rotation):
        leaf = lf.trace_leaf(rotation, [0.2, 0.3, 0.4], 0.2)
        r = lf.backward_residuals(rotation, leaf, [0.15], 6)[:, 0]
        np.testing.assert_allclose(r, 0.15 * LAMBDA_U ** -np.arange(7), rtol=1e-9)

    @pytest.mark.parametrize("delta", [0.0, -0.1, 0.5, 0.7])
    def test_radius_rejected(self, toral, delta):
        with pytest.raises(ValueError):
            lf.trace_leaf(toral, [0.1, 0.1], delta)

    def test_resolution_rejected(self, toral):
        with pytest.raises(ValueError):
            lf.trace_leaf(toral, [0.1, 0.1], 0.2, resolution=0.0)


class TestPerturbedLeaf:
    def test_sample_invariants(self, pleaf):
        assert np.all(np.diff(pleaf.s) > 0)
        assert np.max(np.diff(pleaf.s)) <= lf.DEFAULT_RESOLUTION * (1 + 1e-9)
        assert pleaf.s[0] == -0.2 and pleaf.s[-1] == 0.2
        np.testing.assert_allclose(pleaf.point_at(0.0), [0.3, 0.6, 0.1], atol=1e-15)
        assert not pleaf.straight and pleaf.construction_depth == lf.DEFAULT_CONSTRUCTION_DEPTH

    def test_arclength_parameterization(self, pleaf):
        seg = np.linalg.norm(np.diff(pleaf.lift, axis=0), axis=1)
        np.testing.assert_allclose(seg, np.diff(pleaf.s), rtol=1e-9)

    def test_backward_contraction(self, perturbed, pleaf):
        s = np.linspace(-0.2, 0.2, 41)
        r = lf.backward_residuals(perturbed, pleaf, s, 10)
        k = np.arange(11)[:, None]
        assert np.all(r <= 0.25 * 0.62**k + 1e-12)

    def test_tangent_is_unstable(self, perturbed, pleaf):
        s = np.linspace(-0.19, 0.19, 39)
        t = pleaf.tangent_at(s)
        v = systems.unstable_direction(perturbed, pleaf.point_at(s))
        cross = np.linalg.norm(np.cross(t, v), axis=1)
        assert cross.max() < 1e-4

    def test_radius_cap(self, perturbed):
        with pytest.raises(ValueError):
            lf.trace_leaf(perturbed, [0.1, 0.1, 0.1], 0.5)


class TestDistances:
    def test_du_examples(self, toral):
        leaf = lf.trace_leaf(toral, [0.3, 0.3], 0.2)
        assert lf.du_distance(leaf, 0.05, 0.05) == 0.0
        assert lf.du_distance(leaf, -0.1, 0.1) == pytest.approx(0.2, abs=1e-15)
        with pytest.raises(ValueError):
            lf.du_distance(leaf, 0.0, 0.25)

    def test_dun_single_step(self, pleaf, perturbed):
        assert lf.dun_distance(perturbed, pleaf, -0.1, 0.05, 1) == pytest.approx(0.15, rel=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
    def test_dun_linear_closed_form(self, rotation, n):
        leaf = lf.trace_leaf(rotation, [0.2, 0.7, 0.1], 0.2)
        sigma = 0.013
        got = lf.dun_distance(rotation, leaf, -0.004, -0.004 + sigma, n)
        assert abs(got - sigma * LAMBDA_U ** (n - 1)) <= 1e-10 * got

    def test_dun_linear_direct_iteration(self, toral):
        leaf = lf.trace_leaf(toral, [0.2, 0.7], 0.2)
        a, b = leaf.lift_at(np.array([-0.01, 0.02]))
        for _ in range(2):
            a, b = systems.lift_apply(toral, a), systems.lift_apply(toral, b)
        assert np.linalg.norm(b - a) == pytest.approx(lf.dun_distance(toral, leaf, -0.01, 0.02, 3), rel=1e-12)

    def test_dun_perturbed_matches_polyline_iteration(self, perturbed, pleaf):
        for n in (1, 3, 5):
            direct = lift_polyline_length(perturbed, pleaf, -0.02, 0.03, n - 1)
            assert lf.dun_distance(perturbed, pleaf, -0.02, 0.03, n) == pytest.approx(direct, rel=1e-5)

    def test_dun_monotone_in_n(self, perturbed, pleaf):
        vals = [lf.dun_distance(perturbed, pleaf, -0.05, 0.01, n) for n in range(1, 7)]
        assert np.all(np.diff(vals) > 0)

    def test_dun_rejects_n_zero(self, toral):
        leaf = lf.trace_leaf(toral, [0.3, 0.3], 0.2)
        with pytest.raises(ValueError):
            lf.dun_distance(toral, leaf, 0.0, 0.1, 0)

    @given(st.lists(st.floats(-0.2, 0.2), min_size=3, max_size=3), st.integers(1, 4))
    def test_dun_metric(self, pleaf, perturbed, s, n):
        a, b, c = s
        d = lambda u, v: lf.dun_distance(perturbed, pleaf, u, v, n)  # noqa: E731
        assert d(a, b) == pytest.approx(d(b, a), rel=1e-12, abs=1e-15)
        assert d(a, a) == 0.0
        if a != b:
            assert d(a, b) > 0
        assert d(a, c) <= d(a, b) + d(b, c) + 1e-9

    def test_ambient_comparison(self, perturbed, pleaf, toral):
        for leaf in (pleaf, lf.trace_leaf(toral, [0.5, 0.5], 0.2)):
            d, du = lf.ambient_ratio(leaf, 2000, 0)
            assert np.all(du >= d * (1 - 1e-12))
            c = float(np.max(du / d))
            assert c < 1.01
            assert np.all(du <= c * d * (1 + 1e-12))

    def test_log_expansions_values(self, toral, perturbed, pleaf):
        out = lf.log_expansions(toral, lf.trace_leaf(toral, [0.1, 0.1], 0.1), np.array([0.0]), 3)
        np.testing.assert_allclose(out[:, 0], np.arange(4) * math.log(LAMBDA_U))
        logs = lf.log_expansions(perturbed, pleaf, np.linspace(-0.2, 0.2, 5), 4)
        assert np.all(np.diff(logs, axis=0) > 0)
