"""End-to-end command-line behavior, driven in process through main()."""

import hashlib
import json
import os

import numpy as np
import pytest

from archimix.cli import main
from archimix.copula import CopulaModel
from archimix.data import read_points
from archimix.network import init_network, load_model, save_model
from archimix.training import evaluate_nll


def sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "synth"
    rc = main(["synth", "--family", "clayton", "--theta", "3.0",
               "--n-train", "40", "--n-test", "20", "--seed", "1",
               "--out", str(out)])
    assert rc == 0
    return out


@pytest.fixture
def model_path(tmp_path):
    path = tmp_path / "model.json"
    save_model(init_network(2, (3, 3), seed=0), str(path))
    return path


class TestSynth:
    def test_outputs_and_manifest(self, synth_dir):
        train = read_points(str(synth_dir / "train.csv"))
        test = read_points(str(synth_dir / "test.csv"))
        assert (train.n, train.d) == (40, 2)
        assert (test.n, test.d) == (20, 2)
        with open(synth_dir / "manifest.json", encoding="utf-8") as fh:
            manifest = json.load(fh)
        assert manifest["command"] == "synth"
        assert manifest["status"] == "ok"
        assert manifest["seeds"] == {"seed": 1}
        assert manifest["package_version"]
        by_name = {os.path.basename(o["path"]): o["sha256"]
                   for o in manifest["outputs"]}
        assert by_name["train.csv"] == sha256(synth_dir / "train.csv")
        assert by_name["test.csv"] == sha256(synth_dir / "test.csv")

    def test_censor_writes_intervals(self, tmp_path):
        out = tmp_path / "cens"
        rc = main(["synth", "--family", "clayton", "--theta", "3.0",
                   "--n-train", "30", "--n-test", "10", "--seed", "2",
                   "--censor", "0.2", "--out", str(out)])
        assert rc == 0
        assert (out / "train_intervals.csv").exists()
        with open(out / "manifest.json", encoding="utf-8") as fh:
            names = [os.path.basename(o["path"])
                     for o in json.load(fh)["outputs"]]
        assert "train_intervals.csv" in names

    def test_flip_reflects_the_coordinate(self, tmp_path):
        plain_dir, flip_dir = tmp_path / "plain", tmp_path / "flip"
        base = ["synth", "--family", "clayton", "--theta", "3.0",
                "--n-train", "30", "--n-test", "10", "--seed", "3"]
        assert main(base + ["--out", str(plain_dir)]) == 0
        assert main(base + ["--flip", "2", "--out", str(flip_dir)]) == 0
        plain = read_points(str(plain_dir / "train.csv")).values
        flipped = read_points(str(flip_dir / "train.csv")).values
        assert np.array_equal(flipped[:, 0], plain[:, 0])
        assert np.abs(flipped[:, 1] - (1.0 - plain[:, 1])).max() <= 1e-15

    def test_outliers_extend_training_rows(self, tmp_path):
        out = tmp_path / "outl"
        rc = main(["synth", "--family", "clayton", "--theta", "3.0",
                   "--n-train", "100", "--n-test", "10", "--seed", "4",
                   "--outliers", "0.1", "--out", str(out)])
        assert rc == 0
        assert read_points(str(out / "train.csv")).n == 110

    def test_independence_needs_no_theta(self, tmp_path):
        rc = main(["synth", "--family", "independence", "--n-train", "10",
                   "--n-test", "5", "--out", str(tmp_path / "ind")])
        assert rc == 0

    def test_missing_theta_is_usage_error(self, tmp_path, capsys):
        rc = main(["synth", "--family", "clayton", "--n-train", "10",
                   "--n-test", "5", "--out", str(tmp_path / "x")])
        assert rc == 2
        assert "--theta" in capsys.readouterr().err


class TestFit:
    def test_quick_fit_writes_model_and_manifest(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "fitted.json"
        rc = main(["fit", "--train", str(synth_dir / "train.csv"),
                   "--test", str(synth_dir / "test.csv"),
                   "--epochs", "2", "--widths", "3,3", "--batch-size", "20",
                   "--out", str(out)])
        assert rc == 0
        assert "fit 2 epochs" in capsys.readouterr().out
        net = load_model(str(out))
        assert net.widths == (3, 3)
        with open(str(out) + ".manifest.json", encoding="utf-8") as fh:
            manifest = json.load(fh)
        assert manifest["status"] == "ok"
        assert manifest["epochs_run"] == 2
        assert "test_nll" in manifest and "final_train_nll" in manifest

    def test_zero_epochs_saves_the_initialization(self, synth_dir, tmp_path):
        out = tmp_path / "init.json"
        rc = main(["fit", "--train", str(synth_dir / "train.csv"),
                   "--epochs", "0", "--widths", "3,3", "--seed", "5",
                   "--out", str(out)])
        assert rc == 0
        assert np.array_equal(load_model(str(out)).weights(),
                              init_network(2, (3, 3), seed=5).weights())

    def test_rerun_is_byte_identical(self, synth_dir, tmp_path):
        args = ["fit", "--train", str(synth_dir / "train.csv"),
                "--epochs", "2", "--widths", "3,3", "--batch-size", "20"]
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_censored_loss_roundtrip(self, tmp_path):
        out = tmp_path / "cens"
        assert main(["synth", "--family", "clayton", "--theta", "3.0",
                     "--n-train", "30", "--n-test", "10", "--seed", "2",
                     "--censor", "0.2", "--out", str(out)]) == 0
        model_out = tmp_path / "cens_model.json"
        rc = main(["fit", "--train", str(out / "train_intervals.csv"),
                   "--loss", "censored", "--epochs", "1", "--widths", "2,2",
                   "--batch-size", "30", "--out", str(model_out)])
        assert rc == 0

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")  # diverged weights
    def test_divergent_run_aborts_with_exit_4(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "diverged.json"
        rc = main(["fit", "--train", str(synth_dir / "train.csv"),
                   "--epochs", "2", "--widths", "3,3", "--batch-size", "20",
                   "--lr", "1e12", "--out", str(out)])
        assert rc == 4
        assert "numeric error" in capsys.readouterr().err
        with open(str(out) + ".manifest.json", encoding="utf-8") as fh:
            manifest = json.load(fh)
        assert manifest["status"] == "aborted"
        assert "abort_reason" in manifest

    def test_telemetry_output(self, synth_dir, tmp_path):
        out = tmp_path / "tele.json"
        tele = tmp_path / "tele.csv"
        rc = main(["fit", "--train", str(synth_dir / "train.csv"),
                   "--epochs", "3", "--widths", "2,2", "--batch-size", "40",
                   "--eval-every", "1", "--telemetry", str(tele),
                   "--out", str(out)])
        assert rc == 0
        lines = tele.read_text(encoding="utf-8").strip().splitlines()
        assert lines[0] == "epoch,train_nll,test_nll,seconds"
        assert len(lines) == 4

    def test_missing_train_file_is_exit_3(self, tmp_path, capsys):
        rc = main(["fit", "--train", str(tmp_path / "nope.csv"),
                   "--epochs", "1", "--out", str(tmp_path / "m.json")])
        assert rc == 3
        assert "data error" in capsys.readouterr().err


class TestEval:
    def test_prints_the_nll(self, synth_dir, model_path, capsys):
        rc = main(["eval", "--model", str(model_path),
                   "--data", str(synth_dir / "train.csv")])
        assert rc == 0
        out1 = capsys.readouterr().out
        expected = evaluate_nll(load_model(str(model_path)),
                                read_points(str(synth_dir / "train.csv")))
        assert out1.strip() == format(expected, ".12g")
        rc = main(["eval", "--model", str(model_path),
                   "--data", str(synth_dir / "train.csv")])
        assert rc == 0
        assert capsys.readouterr().out == out1

    def test_manifest_only_on_request(self, synth_dir, model_path, tmp_path, capsys):
        rc = main(["eval", "--model", str(model_path),
                   "--data", str(synth_dir / "train.csv")])
        assert rc == 0
        assert list(tmp_path.glob("*.manifest.json")) == []
        man = tmp_path / "eval.manifest.json"
        rc = main(["eval", "--model", str(model_path),
                   "--data", str(synth_dir / "train.csv"),
                   "--manifest", str(man)])
        assert rc == 0
        capsys.readouterr()
        with open(man, encoding="utf-8") as fh:
            doc = json.load(fh)
        assert doc["command"] == "eval" and "nll" in doc

    def test_malformed_csv_is_exit_3(self, model_path, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("u1,u2\n0.5,oops\n", encoding="utf-8")
        rc = main(["eval", "--model", str(model_path), "--data", str(bad)])
        assert rc == 3
        assert "malformed rows" in capsys.readouterr().err


class TestQuery:
    @pytest.fixture
    def model(self, model_path):
        return CopulaModel(2, load_model(str(model_path)))

    def run(self, capsys, *argv):
        rc = main(list(argv))
        assert rc == 0
        return capsys.readouterr().out.strip()

    def test_cdf(self, model_path, model, capsys):
        out = self.run(capsys, "query", "--model", str(model_path),
                       "--kind", "cdf", "--point", "0.3,0.6")
        assert out == format(model.cdf([0.3, 0.6]), ".17g")

    def test_logpdf(self, model_path, model, capsys):
        out = self.run(capsys, "query", "--model", str(model_path),
                       "--kind", "logpdf", "--point", "0.3,0.6")
        assert out == format(model.log_density([0.3, 0.6]), ".17g")

    def test_condcdf(self, model_path, model, capsys):
        out = self.run(capsys, "query", "--model", str(model_path),
                       "--kind", "condcdf", "--point", "0.3,0.6", "--given", "1")
        assert out == format(model.conditional_cdf([0.3, 0.6], [0]), ".17g")

    def test_condpdf(self, model_path, model, capsys):
        out = self.run(capsys, "query", "--model", str(model_path),
                       "--kind", "condpdf", "--point", "0.3,0.6", "--given", "1")
        assert out == format(model.conditional_log_density([0.3, 0.6], [0]), ".17g")

    def test_rect(self, model_path, model, capsys):
        out = self.run(capsys, "query", "--model", str(model_path),
                       "--kind", "rect", "--rect", "0.2:0.7,0.3:0.9")
        assert out == format(model.rectangle_prob([0.2, 0.3], [0.7, 0.9]), ".17g")

    def test_query_manifest(self, model_path, tmp_path, capsys):
        man = tmp_path / "q.manifest.json"
        self.run(capsys, "query", "--model", str(model_path),
                 "--kind", "cdf", "--point", "0.3,0.6", "--manifest", str(man))
        with open(man, encoding="utf-8") as fh:
            doc = json.load(fh)
        assert doc["command"] == "query" and "value" in doc

    def test_missing_rect_is_usage_error(self, model_path, capsys):
        rc = main(["query", "--model", str(model_path), "--kind", "rect"])
        assert rc == 2
        assert "--rect" in capsys.readouterr().err

    def test_bad_point_is_usage_error(self, model_path, capsys):
        rc = main(["query", "--model", str(model_path),
                   "--kind", "cdf", "--point", "0.3,zebra"])
        assert rc == 2
        assert "zebra" in capsys.readouterr().err

    def test_bad_given_index(self, model_path, capsys):
        rc = main(["query", "--model", str(model_path), "--kind", "condcdf",
                   "--point", "0.3,0.6", "--given", "3"])
        assert rc == 2
        rc = main(["query", "--model", str(model_path), "--kind", "condcdf",
                   "--point", "0.3,0.6", "--given", "0"])
        assert rc == 2

    def test_out_of_box_point_is_usage_error(self, model_path, capsys):
        rc = main(["query", "--model", str(model_path),
                   "--kind", "cdf", "--point", "0.3,1.6"])
        assert rc == 2

    def test_missing_model_is_exit_3(self, tmp_path, capsys):
        rc = main(["query", "--model", str(tmp_path / "absent.json"),
                   "--kind", "cdf", "--point", "0.3,0.6"])
        assert rc == 3


class TestSample:
    def test_deterministic_output(self, model_path, tmp_path, capsys):
        a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
        base = ["sample", "--model", str(model_path), "--n", "50"]
        assert main(base + ["--seed", "3", "--out", str(a)]) == 0
        assert main(base + ["--seed", "3", "--out", str(b)]) == 0
        assert main(base + ["--seed", "4", "--out", str(c)]) == 0
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes() != c.read_bytes()
        assert read_points(str(a)).n == 50

    def test_writes_manifest(self, model_path, tmp_path, capsys):
        out = tmp_path / "s.csv"
        assert main(["sample", "--model", str(model_path), "--n", "10",
                     "--out", str(out)]) == 0
        capsys.readouterr()
        with open(str(out) + ".manifest.json", encoding="utf-8") as fh:
            assert json.load(fh)["command"] == "sample"


class TestGrid:
    def test_cdf_grid(self, model_path, tmp_path, capsys):
        out = tmp_path / "grid.csv"
        rc = main(["grid", "--model", str(model_path), "--resolution", "5",
                   "--out", str(out)])
        assert rc == 0
        capsys.readouterr()
        lines = out.read_text(encoding="utf-8").strip().splitlines()
        assert lines[0] == "u1,u2,value"
        assert len(lines) == 26
        model = CopulaModel(2, load_model(str(model_path)))
        first = lines[1].split(",")
        assert float(first[2]) == model.cdf([float(first[0]), float(first[1])])

    def test_bad_resolution(self, model_path, tmp_path, capsys):
        rc = main(["grid", "--model", str(model_path), "--resolution", "0",
                   "--out", str(tmp_path / "g.csv")])
        assert rc == 2
