import csv
import io

import pytest

from deepfi import cli, datastore
from deepfi.datastore import DatasetLocation


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert cli.main(["simulate", "--out", str(out), "--train-packets", "6", "--test-packets", "8"]) == 0
    return out


def run_localize(args):
    buf = io.StringIO()
    ns = cli.build_parser().parse_args(["localize"] + args)
    assert cli.cmd_localize(ns, out=buf) == 0
    return list(csv.DictReader(io.StringIO(buf.getvalue())))


class TestSimulate:
    def test_fifty_locations(self, sim_dir):
        train = datastore.read_dataset(sim_dir / "train.csv")
        test = datastore.read_dataset(sim_dir / "test.csv")
        assert len(train) + len(test) == 50
        assert "seed=0" in (sim_dir / "scenario.meta").read_text()

    def test_same_seed_same_bytes(self, tmp_path):
        for name in ("a", "b"):
            assert cli.main(["simulate", "--seed", "1", "--out", str(tmp_path / name),
                             "--train-packets", "2", "--test-packets", "2"]) == 0
        for f in ("train.csv", "test.csv", "scenario.meta"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_missing_out_is_usage_error(self, capsys):
        assert cli.main(["simulate"]) == 2


class TestTrain:
    @pytest.mark.parametrize("layout,shape", [("living_room", (300, 150, 100, 50)),
                                              ("laboratory", (500, 300, 150, 50))])
    def test_default_shape_untrained(self, sim_dir, tmp_path, layout, shape):
        db = tmp_path / "fp.db"
        assert cli.main(["train", "--dataset", str(sim_dir / "train.csv"), "--layout", layout,
                         "--pretrain-epochs", "0", "--finetune-epochs", "0", "--out", str(db)]) == 0
        header = datastore.read_header(db)
        assert header.shape.hidden == shape and header.n_locations == 38

    def test_missing_dataset_is_runtime_error(self, tmp_path):
        assert cli.main(["train", "--dataset", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "x")]) == 1

    def test_bad_shape_is_usage_error(self, sim_dir, tmp_path):
        assert cli.main(["train", "--dataset", str(sim_dir / "train.csv"), "--shape", "5,6,7,8",
                         "--out", str(tmp_path / "x")]) == 2

    def test_bad_antennas_is_usage_error(self, sim_dir, tmp_path):
        assert cli.main(["train", "--dataset", str(sim_dir / "train.csv"), "--antennas", "3",
                         "--out", str(tmp_path / "x")]) == 2


class TestLocalize:
    def test_defaults(self):
        ns = cli.build_parser().parse_args(["localize", "--packets", "x.csv"])
        assert ns.batch_size == 10 and ns.n_test_packets == 100 and ns.method == "deepfi"

    def test_report(self, sim_dir, tmp_path):
        db = tmp_path / "fp.db"
        assert cli.main(["train", "--dataset", str(sim_dir / "train.csv"), "--shape", "20,15,10,5",
                         "--pretrain-epochs", "1", "--finetune-epochs", "1", "--out", str(db)]) == 0
        rows = run_localize(["--db", str(db), "--packets", str(sim_dir / "test.csv")])
        assert len(rows) == 12
        assert list(rows[0]) == ["test_id", "x_hat", "y_hat", "x_true", "y_true", "error_m"]
        assert all(float(r["error_m"]) >= 0 for r in rows)

    def test_single_location_constant(self, sim_dir, tmp_path):
        (loc,) = datastore.read_dataset(sim_dir / "train.csv")[:1]
        one = tmp_path / "one.csv"
        datastore.write_dataset(one, [DatasetLocation("only", loc.x, loc.y, loc.packets)])
        db = tmp_path / "one.db"
        assert cli.main(["train", "--dataset", str(one), "--shape", "20,15,10,5",
                         "--pretrain-epochs", "1", "--finetune-epochs", "1", "--out", str(db)]) == 0
        rows = run_localize(["--db", str(db), "--packets", str(sim_dir / "test.csv")])
        assert {(float(r["x_hat"]), float(r["y_hat"])) for r in rows} == {(loc.x, loc.y)}

    @pytest.mark.parametrize("method", ["fifs", "horus", "ml", "knn"])
    def test_baselines(self, sim_dir, method):
        rows = run_localize(["--method", method, "--train-dataset", str(sim_dir / "train.csv"),
                             "--packets", str(sim_dir / "test.csv")])
        assert len(rows) == 12

    def test_baseline_without_training_data(self, sim_dir):
        assert cli.main(["localize", "--method", "fifs", "--packets", str(sim_dir / "test.csv")]) == 2


class TestBenchmark:
    def test_sweep_values(self):
        assert cli.SWEEPS["test-packets"] == [5, 10, 30, 100, 300]
        assert cli.SWEEPS["batch-size"] == [1, 3, 5, 10, 50, 100]
        assert cli.SWEEPS["antennas"] == [(0, 1, 2), (0,), (1,), (2,)]

    def test_unknown_method(self, tmp_path):
        assert cli.main(["benchmark", "--methods", "deepfi,magic", "--out", str(tmp_path)]) == 2

    def test_antenna_sweep(self, tmp_path):
        assert cli.main(["benchmark", "--sweep", "antennas", "--out", str(tmp_path), "--shape", "12,8,6,4",
                         "--pretrain-epochs", "1", "--finetune-epochs", "1",
                         "--train-packets", "5", "--n-test-packets", "5"]) == 0
        with open(tmp_path / "table.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["method"] for r in rows] == ["deepfi", "deepfi[0]", "deepfi[1]", "deepfi[2]"]
        assert (tmp_path / "cdf_deepfi_0.csv").exists()


class TestAnalyze:
    def test_stability(self, sim_dir):
        buf = io.StringIO()
        ns = cli.build_parser().parse_args(["analyze", "stability", "--dataset", str(sim_dir / "train.csv")])
        assert cli.cmd_analyze(ns, out=buf) == 0
        rows = list(csv.reader(io.StringIO(buf.getvalue())))
        assert rows[0] == ["ratio", "cumulative_fraction"] and float(rows[-1][1]) == 1.0

    def test_clusters(self, sim_dir):
        buf = io.StringIO()
        ns = cli.build_parser().parse_args(["analyze", "clusters", "--dataset", str(sim_dir / "test.csv")])
        cli.cmd_analyze(ns, out=buf)
        rows = list(csv.DictReader(io.StringIO(buf.getvalue())))
        assert len(rows) == 36 and all(1 <= int(r["clusters"]) <= 30 for r in rows)

    def test_error_cdf_needs_report(self):
        assert cli.main(["analyze", "error-cdf"]) == 2
