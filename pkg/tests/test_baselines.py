import numpy as np
import pytest

from deepfi import baselines, csi, pipeline
from deepfi.csi import CsiPacket
from deepfi.errors import EmptyDb


def flat_packets(level, n=4, rss=-50.0, jitter=0.0, gen=None):
    out = []
    for i in range(n):
        amps = np.full(csi.N_CSI, level, dtype=float)
        if jitter:
            amps = amps + gen.normal(0, jitter, csi.N_CSI)
        out.append(CsiPacket(np.abs(amps), rss=rss + (i % 2 - 0.5) * jitter))
    return out


@pytest.fixture
def db(gen):
    points = [((0.0, 0.0), flat_packets(5.0, jitter=0.5, gen=gen, rss=-40.0)),
              ((1.0, 0.0), flat_packets(15.0, jitter=0.5, gen=gen, rss=-55.0)),
              ((0.0, 1.0), flat_packets(30.0, jitter=0.5, gen=gen, rss=-70.0))]
    return baselines.build_baseline_db(points)


class TestFifs:
    def test_dominant_location(self, db):
        est = baselines.fifs_estimate(db, flat_packets(15.0))
        assert np.hypot(est.xy[0] - 1.0, est.xy[1]) < 0.5
        assert est.posterior.sum() == pytest.approx(1.0, abs=1e-9)

    def test_symmetric_midpoint(self):
        points = [((0.0, 0.0), flat_packets(5.0, n=2) + flat_packets(7.0, n=2)),
                  ((2.0, 0.0), flat_packets(5.0, n=2) + flat_packets(7.0, n=2))]
        est = baselines.fifs_estimate(baselines.build_baseline_db(points), flat_packets(6.0))
        assert est.xy == pytest.approx((1.0, 0.0))

    def test_std_floor(self):
        points = [((0.0, 0.0), flat_packets(5.0)), ((1.0, 0.0), flat_packets(8.0))]
        bdb = baselines.build_baseline_db(points)
        assert np.all(bdb.csi_std == baselines.STD_FLOOR)
        assert np.isfinite(baselines.fifs_loglik(bdb, flat_packets(6.0))).all()


class TestHorus:
    def test_dominant_location(self, db):
        est = baselines.horus_estimate(db, flat_packets(1.0, rss=-70.0))
        assert np.hypot(est.xy[0], est.xy[1] - 1.0) < 0.5

    def test_symmetric_midpoint(self):
        pk = [CsiPacket(np.ones(90), rss=r) for r in (-50.0, -52.0)]
        points = [((0.0, 0.0), pk), ((0.0, 4.0), pk)]
        est = baselines.horus_estimate(baselines.build_baseline_db(points), pk)
        assert est.xy == pytest.approx((0.0, 2.0))

    def test_needs_rss(self, db):
        with pytest.raises(ValueError):
            baselines.horus_estimate(db, [CsiPacket(np.ones(90))])


class TestMl:
    def test_returns_reference(self, db, gen):
        for _ in range(10):
            est = baselines.ml_estimate(db, flat_packets(1.0, rss=float(gen.uniform(-80, -30))))
            assert any(tuple(loc) == est.xy for loc in db.locations)
            assert est.posterior.sum() == 1.0

    def test_matches_horus_top(self, db, gen):
        for _ in range(10):
            pk = flat_packets(1.0, rss=float(gen.uniform(-80, -30)))
            top = int(np.argmax(baselines.horus_estimate(db, pk).posterior))
            assert baselines.ml_estimate(db, pk).xy == tuple(db.locations[top])

    def test_tie_goes_to_lowest_index(self):
        pk = [CsiPacket(np.ones(90), rss=r) for r in (-50.0, -52.0)]
        bdb = baselines.build_baseline_db([((3.0, 3.0), pk), ((1.0, 1.0), pk)])
        assert baselines.ml_estimate(bdb, pk).xy == (3.0, 3.0)


class TestKnn:
    def test_k1_is_nearest(self, db):
        assert baselines.knn_estimate(db, flat_packets(14.0), k=1).xy == (1.0, 0.0)

    def test_equidistant_centroid(self):
        points = [((0.0, 0.0), flat_packets(4.0)), ((3.0, 0.0), flat_packets(4.0)),
                  ((0.0, 3.0), flat_packets(4.0))]
        bdb = baselines.build_baseline_db(points)
        est = baselines.knn_estimate(bdb, flat_packets(6.0), k=3)
        assert est.xy == pytest.approx((1.0, 1.0))

    def test_hand_computed_weights(self):
        levels = [1.0, 2.0, 4.0, 10.0]
        points = [((float(i), 0.0), flat_packets(lv)) for i, lv in enumerate(levels)]
        bdb = baselines.build_baseline_db(points)
        # feature distance to a flat level-3 vector: |level - 3| * sqrt(90)
        d = np.array([2.0, 1.0, 1.0]) * np.sqrt(90)
        w = 1 / d
        expected_x = (w @ np.array([0.0, 1.0, 2.0])) / w.sum()
        est = baselines.knn_estimate(bdb, flat_packets(3.0), k=3)
        assert est.xy == pytest.approx((expected_x, 0.0), abs=1e-12)

    def test_exact_match(self):
        points = [((0.0, 0.0), flat_packets(1.0)), ((1.0, 0.0), flat_packets(4.0)),
                  ((2.0, 0.0), flat_packets(6.0))]
        est = baselines.knn_estimate(baselines.build_baseline_db(points), flat_packets(4.0), k=3)
        assert est.xy == (1.0, 0.0)

    def test_bad_k(self, db):
        with pytest.raises(ValueError):
            baselines.knn_estimate(db, flat_packets(3.0), k=0)


def test_empty_db():
    with pytest.raises(EmptyDb):
        baselines.build_baseline_db([])


def test_living_room_errors_finite_and_positive():
    exp = pipeline.ExperimentConfig(n_train_packets=30, n_test_packets=30, seed=3)
    res = pipeline.run_experiment(exp, methods=("fifs", "horus", "ml", "knn"))
    for m in ("fifs", "horus", "ml", "knn"):
        err = res.mean_error(m)
        assert np.isfinite(err) and err > 0
