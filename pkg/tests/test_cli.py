"""
Tests for the command-line surface: exit codes, the gradient-check
suite and a generate → train → rollout → eval pipeline on a tiny
dataset.
"""

import csv
import json

import pytest

from noda import cli
from noda.config import settings
from noda.ledger import RunLedger


@pytest.fixture
def ledger(tmp_path, monkeypatch):
    """Route CLI run records to a throwaway database."""
    db = RunLedger(tmp_path / "runs.db")
    monkeypatch.setattr(cli, "get_ledger", lambda: db)
    return db


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Run generate, train and rollout once; later tests read the files."""
    root = tmp_path_factory.mktemp("pipeline")
    db = RunLedger(root / "runs.db")
    original = cli.get_ledger
    cli.get_ledger = lambda: db
    try:
        data = root / "data"
        assert cli.main(["generate", "--equation", "ks", "--n-traj", "3", "--tf", "1.0",
                         "--dt", "0.25", "--resolution", "32", "--seed", "5", "--out", str(data)]) == 0

        config = root / "train.cfg"
        config.write_text("epochs = 1\nbatch_size = 2\nwidth = 4\nmodes = 4\nhidden = 8\n"
                          "t_h_train = 2\nbptt_window = 2\nn_train = 2\n")
        model = root / "model.nodm"
        assert cli.main(["train", "--data", str(data), "--config", str(config), "--out", str(model)]) == 0

        est, obs = root / "est.noda", root / "obs.noda"
        assert cli.main(["rollout", "--model", str(model), "--traj", str(data / "traj_00002.noda"),
                         "--alpha", "0.5", "--snr", "30", "--th", "0.5", "--seed", "1",
                         "--out", str(est), "--obs-out", str(obs)]) == 0
    finally:
        cli.get_ledger = original
    return {"root": root, "data": data, "model": model, "est": est, "obs": obs, "ledger": db}


# ============================================================
# PARSING AND EXIT CODES
# ============================================================

class TestExitCodes:

    def test_version(self, capsys):
        assert cli.main(["--version"]) == cli.EXIT_OK
        assert "noda" in capsys.readouterr().out

    def test_missing_subcommand(self):
        assert cli.main([]) == cli.EXIT_USAGE

    def test_bad_argument(self):
        assert cli.main(["generate", "--equation", "burgers", "--n-traj", "1", "--tf", "1",
                         "--out", "x"]) == cli.EXIT_USAGE

    def test_missing_file(self, tmp_path, ledger):
        assert cli.main(["eval", "--est", str(tmp_path / "nope.noda"), "--gt", str(tmp_path / "nope.noda"),
                         "--csv", str(tmp_path / "s.csv")]) == cli.EXIT_USAGE

    def test_corrupt_file(self, tmp_path, ledger):
        bad = tmp_path / "bad.noda"
        bad.write_bytes(b"JUNK" + bytes(80))
        assert cli.main(["eval", "--est", str(bad), "--gt", str(bad),
                         "--csv", str(tmp_path / "s.csv")]) == cli.EXIT_FORMAT

    def test_resolution_parsing(self):
        assert cli._resolution("64") == 64
        assert cli._resolution("64,32") == (64, 32)

    def test_dataset_directory_defaults_to_setting(self):
        parser = cli.build_parser()
        assert parser.parse_args(["train", "--config", "c.cfg", "--out", "m.nodm"]).data == settings.DATA_DIR
        args = parser.parse_args(["generate", "--equation", "ks", "--n-traj", "1", "--tf", "1"])
        assert args.out == settings.DATA_DIR


# ============================================================
# GRADIENT CHECK
# ============================================================

class TestGradcheck:

    def test_suite_within_tolerance(self):
        results = cli.gradcheck_suite(seed=0, n_coords=60)
        assert {"rfft_irfft", "spectral_contract", "fno_block", "noda_rollout_3step"} <= set(results)
        assert max(results.values()) < cli.GRADCHECK_TOLERANCE

    @pytest.mark.slow
    def test_command_exit_code(self, ledger, capsys):
        assert cli.main(["gradcheck", "--seed", "0"]) == cli.EXIT_OK
        assert "noda_rollout_3step" in capsys.readouterr().out
        assert ledger.count("gradcheck") == 1


# ============================================================
# PIPELINE
# ============================================================

class TestPipeline:

    def test_dataset_written(self, pipeline):
        manifest = json.loads((pipeline["data"] / "manifest.json").read_text())
        assert manifest["n_trajectories"] == 3
        assert manifest["base_seed"] == 5
        assert len(list(pipeline["data"].glob("traj_*.noda"))) == 3

    def test_model_and_estimate_written(self, pipeline):
        from noda.checkpoint import load_checkpoint
        from noda.trajectory_io import read_trajectory

        ckpt = load_checkpoint(pipeline["model"])
        assert ckpt.params.config.n == 32 and ckpt.adam.step == 1
        est = read_trajectory(pipeline["est"])
        truth = read_trajectory(pipeline["data"] / "traj_00002.noda")
        assert est.n_frames == truth.n_frames == 5
        assert (est.frames[0] == truth.frames[0]).all()

    def test_eval_with_observations(self, pipeline, ledger):
        out = pipeline["root"] / "scores.csv"
        assert cli.main(["eval", "--est", str(pipeline["est"]),
                         "--gt", str(pipeline["data"] / "traj_00002.noda"), "--th", "0.5",
                         "--csv", str(out), "--obs", str(pipeline["obs"])]) == 0
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        assert rows[0]["method"] == "noda" and rows[0]["snr_db"] == "30.0"
        assert float(rows[0]["alpha"]) == 0.5
        assert float(rows[0]["relmse_mean"]) >= 0.0
        assert ledger.count("eval") == 1

    def test_rollout_rejects_other_measurement_operator(self, pipeline, ledger):
        assert cli.main(["rollout", "--model", str(pipeline["model"]),
                         "--traj", str(pipeline["data"] / "traj_00002.noda"), "--c", "random",
                         "--out", str(pipeline["root"] / "other.noda")]) == cli.EXIT_USAGE
        assert not (pipeline["root"] / "other.noda").exists()

    def test_exclude_observed_needs_observations(self, pipeline, ledger, tmp_path):
        assert cli.main(["eval", "--est", str(pipeline["est"]),
                         "--gt", str(pipeline["data"] / "traj_00002.noda"),
                         "--csv", str(tmp_path / "s.csv"), "--exclude-observed"]) == cli.EXIT_USAGE

    def test_experiment(self, pipeline, ledger, tmp_path, capsys):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({
            "equation": "ks", "model": str(pipeline["model"]), "data": str(pipeline["data"]),
            "t_f": [1.0], "snr_db": ["inf"], "alpha": [0.5], "t_h": 0.5, "t_h_sweep": [0.25],
            "seeds": [0],
        }))
        assert cli.main(["experiment", "--spec", str(spec), "--out", str(tmp_path / "results")]) == 0
        assert "ASSIMILATION" in capsys.readouterr().out
        assert (tmp_path / "results" / "warmup.csv").is_file()
        assert (tmp_path / "results" / "heatmap_assimilation.noda").is_file()

    def test_bench(self, pipeline, ledger, capsys):
        assert cli.main(["bench", "--model", str(pipeline["model"]),
                         "--traj", str(pipeline["data"] / "traj_00000.noda"),
                         "--iterations", "3", "--warmup", "1"]) == 0
        assert "ratio" in capsys.readouterr().out

    def test_ledger_chain(self, pipeline):
        db = pipeline["ledger"]
        assert db.count("generate") == 1 and db.count("train") == 1 and db.count("rollout") == 1
        assert db.verify_chain()["verified"]
