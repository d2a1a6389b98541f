import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deepfi import analysis
from deepfi.csi import CsiPacket
from deepfi.errors import LengthMismatch

vectors = st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=40)


def test_mean_sum_error_examples():
    assert analysis.mean_sum_error([(1, 2), (3, 4)], [(1, 2), (3, 4)]) == 0.0
    assert analysis.mean_sum_error([(3, 4)], [(0, 0)]) == 5.0
    assert analysis.mean_sum_error([(1, 0), (0, 3)], [(0, 0), (0, 0)]) == 2.0
    with pytest.raises(LengthMismatch):
        analysis.mean_sum_error([(0, 0)], [])


def test_error_cdf_examples():
    assert analysis.error_cdf([1]) == [(1.0, 1.0)]
    assert analysis.error_cdf([1, 1]) == [(1.0, 1.0)]
    got = analysis.error_cdf([2, 1, 3])
    assert [v for v, _ in got] == [1.0, 2.0, 3.0]
    np.testing.assert_allclose([f for _, f in got], [1 / 3, 2 / 3, 1.0])


@given(st.lists(st.floats(0, 100), min_size=1, max_size=50))
def test_error_cdf_monotone(errors):
    cdf = analysis.error_cdf(errors)
    fr = [f for _, f in cdf]
    assert all(a < b for a, b in zip(fr, fr[1:]))
    assert fr[-1] == 1.0


class TestStability:
    def test_constant_packets(self):
        pk = [CsiPacket(np.arange(1, 91, dtype=float)) for _ in range(4)]
        assert np.all(analysis.stability_ratios(pk) == 0.0)

    def test_two_point(self):
        # entries alternate a-d and a+d: population std d, mean a
        a, d = 10.0, 2.0
        pk = [CsiPacket(np.full(90, a - d)), CsiPacket(np.full(90, a + d))]
        np.testing.assert_allclose(analysis.stability_ratios(pk), d / a)

    def test_rss_in_linear_amplitude(self):
        pk = [CsiPacket(np.ones(90), rss=-40.0), CsiPacket(np.ones(90), rss=-60.0)]
        lin = np.array([10 ** -2, 10 ** -3])
        assert analysis.stability_ratios(pk, "rss")[0] == pytest.approx(lin.std() / lin.mean())

    def test_fraction_below(self):
        cdf = analysis.error_cdf([0.01, 0.02, 0.2, 0.05])
        assert analysis.fraction_below(cdf, 0.10) == 0.75
        assert analysis.fraction_below(cdf, 0.001) == 0.0


class TestClusters:
    def test_constant(self):
        assert analysis.count_clusters(np.full(30, 4.2)) == 1

    def test_bimodal(self):
        assert analysis.count_clusters(np.r_[np.full(15, 1.0), np.full(15, 9.0)]) == 2

    def test_three_bands_with_jitter(self, gen):
        v = np.r_[np.full(10, 5.0), np.full(10, 20.0), np.full(10, 40.0)] + gen.uniform(0, 0.5, 30)
        assert analysis.count_clusters(v) == 3

    @given(st.lists(st.floats(0, 100), min_size=30, max_size=30), st.floats(0.01, 100), st.floats(-50, 50))
    def test_affine_invariant(self, v, scale, shift):
        v = np.array(v)
        assert analysis.count_clusters(v * scale + shift) == analysis.count_clusters(v)


class TestCorrelation:
    def test_self_and_negated(self, gen):
        v = gen.normal(size=90)
        assert analysis.correlation(v, v) == pytest.approx(1.0, abs=1e-12)
        assert analysis.correlation(v, 7.0 - v) == pytest.approx(-1.0, abs=1e-12)

    def test_against_covariance_formula(self, gen):
        a, b = gen.normal(size=90), gen.normal(size=90)
        n = len(a)
        ma, mb = sum(a) / n, sum(b) / n
        cov = sum((x - ma) * (y - mb) for x, y in zip(a, b))
        va = sum((x - ma) ** 2 for x in a)
        vb = sum((y - mb) ** 2 for y in b)
        assert analysis.correlation(a, b) == pytest.approx(cov / math.sqrt(va * vb), abs=1e-12)

    @given(vectors, st.floats(0.1, 100))
    def test_symmetric_and_scale_free(self, v, c):
        v = np.array(v)
        w = np.roll(v, 1) + np.arange(len(v))
        if np.ptp(v) < 1e-6 or np.ptp(w) < 1e-6:
            return
        r = analysis.correlation(v, w)
        assert -1.0 <= r <= 1.0
        assert r == pytest.approx(analysis.correlation(w, v), abs=1e-12)
        assert r == pytest.approx(analysis.correlation(c * v, w), abs=1e-9)
