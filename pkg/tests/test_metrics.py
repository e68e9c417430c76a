import math

import numpy as np
import pytest

from delone import metrics as mt
from delone.errors import IllConditionedError, OutOfChartError, ValidationError


class TestDistances:
    def test_sphere_quarter_great_circle(self):
        m = mt.MetricModel.sphere(1.0)
        assert m.distance([1, 0, 0], [0, 1, 0]) == pytest.approx(math.pi / 2)

    def test_sphere_scales_with_radius(self):
        m = mt.MetricModel.sphere(3.0)
        assert m.distance([3, 0, 0], [0, 3, 0]) == pytest.approx(1.5 * math.pi)

    def test_torus_wraparound(self):
        m = mt.MetricModel.flat_torus((1.0, 1.0))
        assert m.distance([0.05, 0.5], [0.85, 0.5]) == pytest.approx(0.2)

    def test_flat(self):
        m = mt.MetricModel.flat(2)
        assert m.distance([0, 0], [3, 4]) == pytest.approx(5.0)

    def test_metric_axioms_sampled(self):
        rng = np.random.default_rng(0)
        models = [mt.MetricModel.flat(3), mt.MetricModel.sphere(2.0),
                  mt.MetricModel.flat_torus((1.0, 2.0))]

        def sample(m):
            if m.kind == "sphere":
                v = rng.standard_normal(3)
                return m.radius * v / np.linalg.norm(v)
            if m.kind == "torus":
                return rng.uniform(0, 1, 2) * m.periods
            return rng.standard_normal(m.n)

        for m in models:
            for _ in range(50):
                x, y, z = sample(m), sample(m), sample(m)
                dxy = m.distance(x, y)
                assert dxy >= 0
                assert dxy == pytest.approx(m.distance(y, x), abs=1e-12)
                assert m.distance(x, x) == pytest.approx(0.0, abs=1e-12)
                assert dxy <= m.distance(x, z) + m.distance(z, y) + 1e-9


class TestExpLog:
    def test_flat_exp_is_translation(self):
        m = mt.MetricModel.flat(2)
        assert np.allclose(m.exp([1.0, 2.0], [0.5, -0.5]), [1.5, 1.5])

    def test_round_trips(self):
        rng = np.random.default_rng(1)
        for m in (mt.MetricModel.sphere(1.5), mt.MetricModel.flat_torus((1.0, 1.0)),
                  mt.MetricModel.flat(2)):
            for _ in range(50):
                if m.kind == "sphere":
                    x = rng.standard_normal(3)
                    x = m.radius * x / np.linalg.norm(x)
                    v = rng.standard_normal(3)
                    v -= np.dot(v, x) / m.radius**2 * x
                    v *= rng.uniform(0.05, 0.9) * m.radius / np.linalg.norm(v)
                elif m.kind == "torus":
                    x = rng.uniform(0, 1, 2)
                    v = rng.uniform(-0.4, 0.4, 2)
                else:
                    x = rng.standard_normal(2)
                    v = rng.standard_normal(2)
                y = m.exp(x, v)
                assert np.allclose(m.log(x, y), v, atol=1e-9)
                assert m.distance(x, y) == pytest.approx(np.linalg.norm(v), abs=1e-9)

    def test_sphere_exp_beyond_injectivity_raises(self):
        m = mt.MetricModel.sphere(1.0)
        with pytest.raises(OutOfChartError):
            m.exp([1.0, 0.0, 0.0], [0.0, 3.2, 0.0])

    def test_geodesic_midpoint(self):
        m = mt.MetricModel.sphere(1.0)
        mid = m.geodesic([1, 0, 0], [0, 1, 0], 0.5)
        assert np.allclose(mid, [math.sqrt(0.5), math.sqrt(0.5), 0.0], atol=1e-12)

    def test_parallel_transport_preserves_norm(self):
        m = mt.MetricModel.sphere(1.0)
        rng = np.random.default_rng(2)
        for _ in range(50):
            x = rng.standard_normal(3)
            x /= np.linalg.norm(x)
            y = rng.standard_normal(3)
            y /= np.linalg.norm(y)
            v = rng.standard_normal(3)
            v -= np.dot(v, x) * x
            w = m.parallel_transport(x, y, v)
            assert np.linalg.norm(w) == pytest.approx(np.linalg.norm(v), abs=1e-9)
            assert abs(np.dot(w, y)) < 1e-9


class TestGramSchmidt:
    def test_orthonormal_untouched(self):
        axes, dev = mt.gram_schmidt_correct(np.eye(3))
        assert np.allclose(axes, np.eye(3))
        assert dev == 0.0

    def test_small_cross_term(self):
        f = np.array([[1.0, 0.0], [0.01, 1.0]])
        axes, dev = mt.gram_schmidt_correct(f)
        assert dev <= 0.03
        assert np.allclose(axes @ axes.T, np.eye(2), atol=1e-12)

    def test_random_perturbed_frames_orthonormal(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            f = np.eye(3) + rng.uniform(-0.05, 0.05, size=(3, 3))
            axes, dev = mt.gram_schmidt_correct(f)
            assert np.allclose(axes @ axes.T, np.eye(3), atol=1e-12)
            assert dev < 0.5

    def test_too_far_rejected(self):
        with pytest.raises(IllConditionedError):
            mt.gram_schmidt_correct(np.array([[1.3, 0.0], [0.0, 1.0]]))
        with pytest.raises(IllConditionedError):
            mt.gram_schmidt_correct(np.array([[1.0, 0.25], [0.25, 1.0]]))

    def test_custom_inner_product(self):
        g = np.diag([4.0, 1.0])

        def ip(a, b):
            return float(a @ g @ b)

        f = np.array([[0.5, 0.0], [0.0, 1.0]])
        axes, dev = mt.gram_schmidt_correct(f, ip)
        assert dev == 0.0
        assert ip(axes[0], axes[1]) == pytest.approx(0.0, abs=1e-12)

    def test_measured_gs_delta(self):
        assert mt.measured_gs_delta(2, 0.0) == 0.0
        d_small = mt.measured_gs_delta(2, 1e-3, samples=16)
        d_big = mt.measured_gs_delta(2, 1e-2, samples=16)
        assert 0.0 < d_small <= d_big <= mt.GS_DELTA_MAX


class TestAlignFrame:
    def test_flat_identity(self):
        m = mt.MetricModel.flat(2)
        fr = mt.standard_frame(m, [0.0, 0.0])
        moved = mt.align_frame(m, fr, [5.0, 5.0])
        assert np.allclose(moved.axes, fr.axes)
        assert np.allclose(moved.base, [5.0, 5.0])

    def test_sphere_orthonormal_and_tangent(self):
        m = mt.MetricModel.sphere(1.0)
        fr = mt.standard_frame(m, [0.0, 0.0, 1.0])
        y = np.array([0.0, math.sin(0.4), math.cos(0.4)])
        moved = mt.align_frame(m, fr, y)
        assert np.allclose(moved.axes @ moved.axes.T, np.eye(2), atol=1e-12)
        assert np.allclose(moved.axes @ y, 0.0, atol=1e-9)

    def test_sphere_small_move_small_rotation(self):
        m = mt.MetricModel.sphere(1.0)
        fr = mt.standard_frame(m, [0.0, 0.0, 1.0])
        y = m.exp(fr.base, 1e-3 * fr.axes[0])
        moved = mt.align_frame(m, fr, y)
        assert np.max(np.abs(moved.axes - fr.axes)) < 1e-2


class TestApproxEuclidean:
    def test_flat_exact(self):
        m = mt.MetricModel.flat(2)
        rep = mt.check_approx_euclidean(m, mt.standard_frame(m, [0.0, 0.0]),
                                        10.0, 1e-9)
        assert rep.passed
        assert rep.metric_deviation == 0.0
        assert rep.chord_deviation == 0.0

    def test_torus_exact(self):
        m = mt.MetricModel.flat_torus((1.0, 1.0))
        rep = mt.check_approx_euclidean(m, mt.standard_frame(m, [0.5, 0.5]),
                                        0.1, 1e-9)
        assert rep.passed

    def test_sphere_large_lambda_fails(self):
        m = mt.MetricModel.sphere(3.0)
        fr = mt.standard_frame(m, m.chart_center(0))
        rep = mt.check_approx_euclidean(m, fr, 1.0, 0.01)
        assert not rep.passed

    def test_sphere_lambda_beyond_chart_raises(self):
        m = mt.MetricModel.sphere(1.0)
        fr = mt.standard_frame(m, m.chart_center(0))
        with pytest.raises(OutOfChartError):
            mt.check_approx_euclidean(m, fr, 0.9 * m.convexity_radius(), 0.01)


class TestFindLambdaEps:
    def test_flat_returns_cap(self):
        m = mt.MetricModel.flat(2)
        assert mt.find_lambda_eps(m, 0.01) == mt.LAMBDA_CAP
        assert mt.find_lambda_eps(m, 0.01, cap=7.0) == 7.0

    def test_torus_half_convexity(self):
        m = mt.MetricModel.flat_torus((1.0, 2.0))
        assert mt.find_lambda_eps(m, 0.01) == pytest.approx(0.125)

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            mt.find_lambda_eps(mt.MetricModel.flat(2), 0.0)


class TestEpsIsometry:
    def test_identity_passes(self):
        pts = np.random.default_rng(4).uniform(0, 1, size=(20, 2))
        assert mt.check_eps_isometry(lambda p: p, pts, 1e-12)

    def test_rigid_motion_passes(self):
        rng = np.random.default_rng(5)
        th = 0.7
        rot = np.array([[math.cos(th), -math.sin(th)],
                        [math.sin(th), math.cos(th)]])
        pts = rng.uniform(0, 1, size=(20, 2))
        assert mt.check_eps_isometry(lambda p: rot @ p + 3.0, pts, 1e-9)

    def test_stretch_fails(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0]])
        assert not mt.check_eps_isometry(lambda p: 1.1 * np.asarray(p), pts, 0.05)
        assert mt.check_eps_isometry(lambda p: 1.1 * np.asarray(p), pts, 0.2)


class _StubFamily:
    """Minimal family: translations by per-parameter offsets."""

    def __init__(self, offsets):
        self._offsets = offsets
        self.params = list(offsets)

    def param_distance(self, p, q):
        if p == q:
            return 0.0
        k = 0
        while k < min(len(p), len(q)) and p[k] == q[k]:
            k += 1
        return 2.0 ** (-k)

    def transport(self, param, point):
        return np.asarray(point, float) + self._offsets[param]


class TestVarDiv:
    def test_zero_radius(self):
        fam = _StubFamily({"0": np.zeros(2), "1": np.array([0.3, 0.0])})
        pts = np.random.default_rng(6).uniform(0, 1, size=(10, 2))
        var, div = mt.estimate_var_div(fam, 0.0, pts)
        assert var == 0.0 and div == 0.0

    def test_uniform_translations_no_var(self):
        fam = _StubFamily({"0": np.zeros(2), "1": np.array([0.3, 0.4])})
        pts = np.random.default_rng(7).uniform(0, 1, size=(10, 2))
        var, div = mt.estimate_var_div(fam, 1.0, pts)
        assert var == pytest.approx(0.0, abs=1e-12)
        assert div == pytest.approx(0.5)

    def test_eps_bounded_fields(self, bundle2):
        from delone import netsynth as nsy

        fam = nsy.make_family(bundle2, depth=2, dim=2, seed=3)
        pts = np.random.default_rng(8).uniform(0, 1, size=(8, 2))
        eps = bundle2.eps0 * bundle2.rF
        var, div = mt.estimate_var_div(fam, 1.0, pts)
        assert div <= 2 * fam.depth * eps + 1e-15
        assert var <= 2 * div + 1e-15

    def test_monotone_in_radius(self):
        fam = _StubFamily({"00": np.zeros(2), "01": np.array([0.1, 0.0]),
                           "10": np.array([0.0, 0.2]), "11": np.array([0.2, 0.2])})
        pts = np.random.default_rng(9).uniform(0, 1, size=(8, 2))
        v1, d1 = mt.estimate_var_div(fam, 0.5, pts)
        v2, d2 = mt.estimate_var_div(fam, 1.0, pts)
        assert v1 <= v2 + 1e-15 and d1 <= d2 + 1e-15


class TestParseMetric:
    def test_round_trips(self):
        for sel in ("flat:3", "sphere:2.5", "torus:1.0,2.0"):
            m = mt.parse_metric(sel)
            m2 = mt.parse_metric(m.selector())
            assert m2.kind == m.kind

    def test_bad_selectors(self):
        for sel in ("flat:x", "sphere:", "torus:1.0", "banana:1"):
            with pytest.raises(ValidationError):
                mt.parse_metric(sel)
