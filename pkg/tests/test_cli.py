import json

import numpy as np
import pytest

from comotion.cells import rollout
from comotion.cli import main
from comotion.config import TrainConfig
from comotion.data import load_csv, save_csv, synth_generate
from comotion.losses import mean_angle_error
from comotion.params import load_checkpoint

TOY = {
    "joint_count": 2,
    "obs_len": 4,
    "pred_len": 2,
    "epochs": 1,
    "batch_size": 1,
    "synth_count": 2,
    "seed": 3,
}


def write_config(tmp_path, **extra):
    cfg = {**TOY, **extra}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def make_data(tmp_path, config_path, name="data"):
    out = tmp_path / name
    assert main(["synth", "--config", str(config_path), "--out", str(out)]) == 0
    return out


class TestSynth:
    def test_writes_deterministic_files(self, tmp_path):
        config = write_config(tmp_path)
        a = make_data(tmp_path, config, "a")
        b = make_data(tmp_path, config, "b")
        files_a = sorted(p.name for p in a.glob("*.csv"))
        files_b = sorted(p.name for p in b.glob("*.csv"))
        assert files_a == files_b and len(files_a) == 2
        for name in files_a:
            assert (a / name).read_bytes() == (b / name).read_bytes()


class TestTrain:
    def test_smoke_produces_artifacts(self, tmp_path, capsys):
        config = write_config(tmp_path)
        data = make_data(tmp_path, config)
        out = tmp_path / "run"
        assert main(["train", "--config", str(config), "--data", str(data),
                     "--out", str(out)]) == 0
        assert (out / "checkpoint.ckpt").exists()
        assert (out / "history.csv").exists()
        assert (out / "manifest.json").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["epochs"] == 1
        assert manifest["data_sha256"]
        assert no_tmp_files(out)

    def test_unknown_variant_exit_code_and_message(self, tmp_path, capsys):
        config = write_config(tmp_path)
        data = make_data(tmp_path, config)
        code = main(["train", "--config", str(config), "--data", str(data),
                     "--out", str(tmp_path / "x"), "--set", "variant=no_magic"])
        assert code == 2
        err = capsys.readouterr().err
        assert "error[config]" in err
        for name in ("full", "no_sca", "no_skel_attn", "no_joint_attn"):
            assert name in err

    def test_missing_data_is_data_error(self, tmp_path, capsys):
        config = write_config(tmp_path)
        code = main(["train", "--config", str(config),
                     "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "x")])
        assert code == 3
        assert "error[data]" in capsys.readouterr().err

    def test_deterministic_reruns_are_bitwise(self, tmp_path):
        config = write_config(tmp_path)
        data = make_data(tmp_path, config)
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert main(["train", "--config", str(config), "--data", str(data),
                         "--out", str(out)]) == 0
            outs.append(out)
        assert (outs[0] / "checkpoint.ckpt").read_bytes() == (outs[1] / "checkpoint.ckpt").read_bytes()
        assert (outs[0] / "history.csv").read_bytes() == (outs[1] / "history.csv").read_bytes()


class TestPredict:
    def train_toy(self, tmp_path):
        config = write_config(tmp_path)
        data = make_data(tmp_path, config)
        out = tmp_path / "run"
        assert main(["train", "--config", str(config), "--data", str(data),
                     "--out", str(out)]) == 0
        return config, data, out / "checkpoint.ckpt"

    def test_horizon_one_gives_one_row(self, tmp_path):
        _, data, ckpt = self.train_toy(tmp_path)
        input_csv = sorted(data.glob("*.csv"))[0]
        out_csv = tmp_path / "pred.csv"
        assert main(["predict", "--checkpoint", str(ckpt), "--input", str(input_csv),
                     "--horizon", "1", "--out", str(out_csv)]) == 0
        assert len(out_csv.read_text().strip().splitlines()) == 1

    def test_round_trip_loads_as_sequence(self, tmp_path):
        _, data, ckpt = self.train_toy(tmp_path)
        input_csv = sorted(data.glob("*.csv"))[0]
        out_csv = tmp_path / "pred.csv"
        assert main(["predict", "--checkpoint", str(ckpt), "--input", str(input_csv),
                     "--out", str(out_csv)]) == 0
        seq = load_csv(out_csv)
        assert seq.joint_count == 2 and len(seq) == 2

    def test_matches_library_rollout_bitwise(self, tmp_path):
        _, data, ckpt = self.train_toy(tmp_path)
        input_csv = sorted(data.glob("*.csv"))[0]
        out_csv = tmp_path / "pred.csv"
        assert main(["predict", "--checkpoint", str(ckpt), "--input", str(input_csv),
                     "--out", str(out_csv)]) == 0
        params, config = load_checkpoint(ckpt)
        seq = load_csv(input_csv)
        from comotion.data import SkeletonSequence

        observed = SkeletonSequence(seq.frames[len(seq) - config.obs_len:], 2)
        expected = rollout(observed, config.pred_len, params, config)
        got = load_csv(out_csv)
        assert (got.frames == expected.frames).all()

    def test_joint_mismatch_names_both(self, tmp_path, capsys):
        _, data, ckpt = self.train_toy(tmp_path)
        other = synth_generate("sinusoid", 3, 8, seed=1)
        bad_csv = tmp_path / "bad.csv"
        save_csv(other, bad_csv)
        code = main(["predict", "--checkpoint", str(ckpt), "--input", str(bad_csv),
                     "--out", str(tmp_path / "x.csv")])
        assert code == 4
        err = capsys.readouterr().err
        assert "3" in err and "2" in err


class TestEval:
    def write_pair(self, tmp_path, offset=0.0):
        truth = synth_generate("sinusoid", 2, 5, seed=2)
        pred_frames = truth.frames + offset
        from comotion.data import SkeletonSequence

        pred = SkeletonSequence(pred_frames, 2)
        tp, pp = tmp_path / "truth.csv", tmp_path / "pred.csv"
        save_csv(truth, tp)
        save_csv(pred, pp)
        return pp, tp

    def test_identical_files_zero_row(self, tmp_path, capsys):
        pp, tp = self.write_pair(tmp_path)
        assert main(["eval", "--pred", str(pp), "--truth", str(tp),
                     "--horizons", "80", "120", "--interval", "40"]) == 0
        out = capsys.readouterr().out
        assert "0.0000" in out

    def test_unit_offset_gives_sqrt_of_dim(self, tmp_path, capsys):
        # Adding 1 to every coordinate moves each frame by sqrt(6).
        pp, tp = self.write_pair(tmp_path, offset=1.0)
        assert main(["eval", "--pred", str(pp), "--truth", str(tp),
                     "--horizons", "80", "--interval", "40"]) == 0
        out = capsys.readouterr().out
        assert f"{np.sqrt(6):.4f}" in out

    def test_matches_api(self, tmp_path, capsys):
        pp, tp = self.write_pair(tmp_path, offset=0.3)
        out_csv = tmp_path / "table.csv"
        assert main(["eval", "--pred", str(pp), "--truth", str(tp),
                     "--horizons", "80", "--interval", "40",
                     "--out", str(out_csv)]) == 0
        pred, truth = load_csv(pp), load_csv(tp)
        expected = mean_angle_error(pred, truth, [2])[2]
        value = float(out_csv.read_text().splitlines()[1].split(",")[1])
        assert value == expected

    def test_misaligned_lengths(self, tmp_path, capsys):
        truth = synth_generate("sinusoid", 2, 5, seed=2)
        short = synth_generate("sinusoid", 2, 4, seed=2)
        tp, pp = tmp_path / "t.csv", tmp_path / "p.csv"
        save_csv(truth, tp)
        save_csv(short, pp)
        assert main(["eval", "--pred", str(pp), "--truth", str(tp)]) == 3


class TestGradcheckCommand:
    def test_default_reports_pass(self, capsys):
        assert main(["gradcheck", "--sample", "4"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "max relative error" in out


class TestAblateCommand:
    def test_zero_epoch_table(self, tmp_path, capsys):
        config = write_config(tmp_path, epochs=0, horizons_ms=[80])
        data = make_data(tmp_path, config)
        out = tmp_path / "ablation"
        assert main(["ablate", "--config", str(config), "--data", str(data),
                     "--out", str(out)]) == 0
        table = (out / "ablation.md").read_text()
        assert table.count("\n") == 6
        for variant in ("full", "no_sca", "no_skel_attn", "no_joint_attn"):
            assert variant in table


def no_tmp_files(directory):
    return not list(directory.glob("*.tmp"))


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
