"""End-to-end tests for the command-line runner."""

import json

import numpy as np
import pytest

from hrrkit import data as dataio
from hrrkit import trainer as tr
from hrrkit.cli import main


def run_cli(args):
    return main(list(args))


def write_synth(tmp_path, name, n, seed, noise=0.05):
    ds = dataio.synth_generate(n, 100, 20, labels_per_point=2, seed=seed, noise=noise)
    path = tmp_path / name
    path.write_text(dataio.serialize_xml_repo(ds), encoding="utf-8")
    return path, ds


class TestCapacityCommand:
    def test_csv_structure_and_determinism(self, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        flags = [
            "capacity", "--vsa", "map-c", "--dims", "25", "--trials", "2",
            "--n-max", "16", "--seed", "1",
        ]
        assert run_cli(flags + ["--out", str(out1)]) == 0
        assert run_cli(flags + ["--out", str(out2)]) == 0
        text = out1.read_text()
        assert out1.read_bytes() == out2.read_bytes()
        assert "# subcommand: capacity" in text
        assert "record,kind,d,n,trial,errors,p_error,capacity" in text
        assert any(line.startswith("capacity,map-c,25") for line in text.splitlines())

    def test_json_format(self, tmp_path):
        out = tmp_path / "a.json"
        assert run_cli([
            "capacity", "--vsa", "hrr", "--dims", "25", "--trials", "2",
            "--n-max", "11", "--format", "json", "--out", str(out),
        ]) == 0
        payload = json.loads(out.read_text())
        assert payload["manifest"]["subcommand"] == "capacity"
        assert payload["capacities"][0]["kind"] == "hrr"

    def test_vtb_non_square_dimension_exits_2(self, capsys):
        assert run_cli(["capacity", "--vsa", "vtb", "--dims", "101", "--trials", "1"]) == 2
        assert "perfect-square" in capsys.readouterr().err

    def test_vtb_square_dimension_runs(self, tmp_path):
        out = tmp_path / "v.csv"
        assert run_cli([
            "capacity", "--vsa", "vtb", "--dims", "100", "--trials", "1",
            "--n-max", "11", "--out", str(out),
        ]) == 0

    def test_parallel_jobs_preserve_output(self, tmp_path):
        outs = []
        for jobs, name in ((1, "j1.csv"), (2, "j2.csv")):
            out = tmp_path / name
            assert run_cli([
                "capacity", "--vsa", "hrr,map-c", "--dims", "25,36",
                "--trials", "2", "--n-max", "11", "--jobs", str(jobs),
                "--out", str(out),
            ]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_config_file_defaults_and_overrides(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("dims=25\ntrials=2\nn-max=11\n# comment\n", encoding="utf-8")
        out = tmp_path / "c.csv"
        assert run_cli([
            "capacity", "--config", str(cfg), "--vsa", "hrr",
            "--trials", "3", "--out", str(out),
        ]) == 0
        text = out.read_text()
        assert "# trials: 3" in text  # flag beats config
        assert "# dims: ['25']" in text

    def test_unknown_config_key_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("no-such-key=1\n", encoding="utf-8")
        with pytest.raises(SystemExit) as err:
            run_cli(["capacity", "--config", str(cfg), "--vsa", "hrr", "--dims", "25"])
        assert err.value.code == 2

    def test_config_boolean_switch(self, tmp_path):
        ds = dataio.synth_generate(12, 30, 4, labels_per_point=1, seed=10)
        shifted = dataio.SparseDataset(
            n_examples=ds.n_examples,
            n_features=ds.n_features,
            n_labels=ds.n_labels,
            examples=[
                dataio.SparseExample(ex.feat_idx + 1, ex.feat_val, ex.labels + 1)
                for ex in ds.examples
            ],
        )
        path = tmp_path / "onebased.txt"
        path.write_text(dataio.serialize_xml_repo(shifted), encoding="utf-8")
        cfg = tmp_path / "t.cfg"
        cfg.write_text("one-based=true\nepochs=1\nhidden=4\n", encoding="utf-8")
        assert run_cli([
            "train", "--config", str(cfg), "--data", str(path), "--head", "fc",
            "--out", str(tmp_path / "ob.ckpt"),
        ]) == 0


class TestResponseCommand:
    def test_csv_rows(self, tmp_path):
        out = tmp_path / "r.csv"
        assert run_cli([
            "response", "--dim", "64", "--n-max", "8", "--trials", "2",
            "--queries", "16", "--out", str(out),
        ]) == 0
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert lines[0] == "n,mean_present,std_present,mean_absent,std_absent"
        assert [int(l.split(",")[0]) for l in lines[1:]] == [4, 8]

    def test_deterministic_bytes(self, tmp_path):
        flags = ["response", "--dim", "64", "--n-max", "4", "--trials", "2", "--seed", "9"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli(flags + ["--out", str(a)])
        run_cli(flags + ["--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestTrainEvalCommands:
    def test_train_then_eval_hrr(self, tmp_path):
        train_path, _ = write_synth(tmp_path, "train.txt", 600, seed=1)
        test_path, _ = write_synth(tmp_path, "test.txt", 200, seed=2)
        ckpt = tmp_path / "model.ckpt"
        assert run_cli([
            "train", "--data", str(train_path), "--head", "hrr",
            "--d-prime", "32", "--epochs", "15", "--batch", "32",
            "--hidden", "32,32", "--seed", "4", "--out", str(ckpt),
        ]) == 0
        assert ckpt.exists() and (tmp_path / "model.ckpt.stats.jsonl").exists()
        stats_lines = (tmp_path / "model.ckpt.stats.jsonl").read_text().splitlines()
        assert json.loads(stats_lines[1])["epoch"] == 0

        report_path = tmp_path / "report.json"
        assert run_cli([
            "eval", "--data", str(test_path), "--checkpoint", str(ckpt),
            "--train-data", str(train_path), "--out", str(report_path),
        ]) == 0
        payload = json.loads(report_path.read_text())
        assert payload["metrics"]["P@1"] >= 0.8
        assert payload["params"]["compression_percent"] == pytest.approx(
            tr.compression_percent(20, 32, 32)
        )

    def test_zero_learning_rate_checkpoint_equals_init(self, tmp_path):
        train_path, ds = write_synth(tmp_path, "train.txt", 64, seed=3)
        ckpt = tmp_path / "frozen.ckpt"
        assert run_cli([
            "train", "--data", str(train_path), "--head", "fc",
            "--epochs", "2", "--lr", "0", "--hidden", "8", "--seed", "11",
            "--out", str(ckpt),
        ]) == 0
        loaded, _ = tr.load_checkpoint(ckpt)
        init = tr.init_model(ds.n_features, [8], ds.n_labels, "fc", seed=11)
        for a, b in zip(loaded.weights + loaded.biases, init.weights + init.biases):
            np.testing.assert_array_equal(a, b)

    def test_train_determinism_bytes(self, tmp_path):
        train_path, _ = write_synth(tmp_path, "train.txt", 128, seed=5)
        blobs = []
        for name in ("a.ckpt", "b.ckpt"):
            ckpt = tmp_path / name
            assert run_cli([
                "train", "--data", str(train_path), "--head", "hrr",
                "--d-prime", "16", "--epochs", "2", "--hidden", "8",
                "--seed", "2", "--out", str(ckpt),
            ]) == 0
            blobs.append(ckpt.read_bytes())
        assert blobs[0] == blobs[1]

    def test_eval_perfect_predictions_file(self, tmp_path):
        test_path, ds = write_synth(tmp_path, "test.txt", 50, seed=6)
        preds = tmp_path / "preds.txt"
        lines = []
        for ex in ds.examples:
            ranked = ex.labels.tolist() + [
                i for i in range(ds.n_labels) if i not in set(ex.labels.tolist())
            ]
            lines.append(" ".join(map(str, ranked)))
        preds.write_text("\n".join(lines) + "\n", encoding="utf-8")
        out = tmp_path / "oracle.json"
        assert run_cli([
            "eval", "--data", str(test_path), "--predictions", str(preds),
            "--k", "1,2", "--out", str(out),
        ]) == 0
        payload = json.loads(out.read_text())
        assert payload["metrics"]["P@1"] == 1.0
        assert payload["metrics"]["P@2"] == 1.0  # every example has 2 labels

    def test_eval_shape_mismatch_exits_2(self, tmp_path, capsys):
        train_path, _ = write_synth(tmp_path, "train.txt", 64, seed=7)
        ckpt = tmp_path / "m.ckpt"
        run_cli([
            "train", "--data", str(train_path), "--head", "fc", "--epochs", "1",
            "--hidden", "8", "--out", str(ckpt),
        ])
        other = dataio.synth_generate(10, 40, 5, labels_per_point=1, seed=8)
        other_path = tmp_path / "other.txt"
        other_path.write_text(dataio.serialize_xml_repo(other), encoding="utf-8")
        assert run_cli([
            "eval", "--data", str(other_path), "--checkpoint", str(ckpt),
        ]) == 2
        assert "features" in capsys.readouterr().err

    def test_malformed_data_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("1 2\n", encoding="utf-8")
        assert run_cli([
            "train", "--data", str(bad), "--head", "fc", "--epochs", "1",
            "--out", str(tmp_path / "x.ckpt"),
        ]) == 2
        assert "header" in capsys.readouterr().err

    def test_divergence_maps_to_exit_3(self, tmp_path, monkeypatch):
        train_path, _ = write_synth(tmp_path, "train.txt", 16, seed=9)

        def explode(*args, **kwargs):
            raise tr.TrainingDivergedError("non-finite loss at epoch 0, batch 0")

        monkeypatch.setattr(tr, "train", explode)
        assert run_cli([
            "train", "--data", str(train_path), "--head", "fc", "--epochs", "1",
            "--hidden", "4", "--out", str(tmp_path / "d.ckpt"),
        ]) == 3
