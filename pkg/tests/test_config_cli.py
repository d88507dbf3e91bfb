import numpy as np
import pytest
import yaml

from hdnn_audio.cli import main
from hdnn_audio.config import (RunConfig, config_to_dict, fingerprint,
                               load_config, write_snapshot)
from hdnn_audio.errors import ConfigError
from hdnn_audio.features import load_features


class TestLoadConfig:
    def test_defaults_without_file(self):
        cfg = load_config()
        assert cfg.seed == 0
        assert cfg.context.width == 49
        assert cfg.nn.schedule.initial_lr == 0.002
        assert cfg.gmm.num_components == 256

    def test_yaml_file(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("seed: 9\ncontext:\n  width: 9\n")
        cfg = load_config(path)
        assert cfg.seed == 9
        assert cfg.context.width == 9
        # untouched sections keep their defaults
        assert cfg.gmm.iterations == 20

    def test_unknown_top_level_key(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("sed: 9\n")
        with pytest.raises(ConfigError, match="sed"):
            load_config(path)

    def test_unknown_nested_key_names_path(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("nn:\n  schedule:\n    lr: 0.1\n")
        with pytest.raises(ConfigError, match=r"nn\.schedule"):
            load_config(path)

    def test_scalar_where_mapping_expected(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("nn: 3\n")
        with pytest.raises(ConfigError, match="mapping"):
            load_config(path)

    def test_overrides(self):
        cfg = load_config(None, ["seed=4", "nn.schedule.initial_lr=0.5",
                                 "context.dct_enabled=false"])
        assert cfg.seed == 4
        assert cfg.nn.schedule.initial_lr == 0.5
        assert cfg.context.dct_enabled is False

    def test_override_list_value(self):
        cfg = load_config(None, ["nn.hidden_dims=[64, 32]"])
        assert cfg.nn.hidden_dims == [64, 32]

    def test_override_bad_form(self):
        with pytest.raises(ConfigError, match="key=value"):
            load_config(None, ["seed"])

    def test_override_unknown_key(self):
        with pytest.raises(ConfigError, match="bogus"):
            load_config(None, ["bogus=1"])

    def test_shipped_configs_parse(self):
        from pathlib import Path
        root = Path(__file__).resolve().parents[1] / "configs"
        for name in ("full_scale.yaml", "desk_scale.yaml"):
            cfg = load_config(root / name)
            assert isinstance(cfg, RunConfig)


class TestFingerprint:
    def test_stable_and_sensitive(self):
        a, b = load_config(), load_config()
        assert fingerprint(a) == fingerprint(b)
        assert len(fingerprint(a)) == 16
        c = load_config(None, ["seed=1"])
        assert fingerprint(c) != fingerprint(a)

    def test_snapshot_round_trips(self, tmp_path):
        cfg = load_config(None, ["context.width=17", "seed=5"])
        write_snapshot(cfg, tmp_path)
        reloaded = load_config(tmp_path / "config.yaml")
        assert config_to_dict(reloaded) == config_to_dict(cfg)
        assert (tmp_path / "fingerprint.txt").read_text().strip() \
            == fingerprint(cfg)


@pytest.fixture(scope="module")
def cli_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus"
    rc = main(["--set", f"paths.corpus_dir={corpus}",
               "--set", "synth.clips_per_concept=3",
               "--set", "synth.clip_seconds_min=0.6",
               "--set", "synth.clip_seconds_max=0.9",
               "--out-dir", str(root / "synth_run"),
               "--seed", "7",
               "synth-data"])
    assert rc == 0
    return corpus


class TestCli:
    def test_synth_data_layout(self, cli_corpus):
        assert (cli_corpus / "annotations.csv").exists()
        assert len(list(cli_corpus.glob("*.wav"))) == 24

    def test_snapshot_written(self, tmp_path):
        corpus = tmp_path / "corpus"
        out = tmp_path / "run"
        rc = main(["--set", f"paths.corpus_dir={corpus}",
                   "--set", "synth.clips_per_concept=2",
                   "--set", "synth.clip_seconds_min=0.5",
                   "--set", "synth.clip_seconds_max=0.6",
                   "--out-dir", str(out), "synth-data"])
        assert rc == 0
        snap = yaml.safe_load((out / "config.yaml").read_text())
        assert snap["paths"]["corpus_dir"] == str(corpus)
        assert (out / "fingerprint.txt").exists()

    def test_extract_features(self, cli_corpus, tmp_path):
        out = tmp_path / "feats"
        rc = main(["--set", f"paths.corpus_dir={cli_corpus}",
                   "--out-dir", str(out), "extract-features"])
        assert rc == 0
        cached = sorted((out / "features").glob("*.acft"))
        assert len(cached) == 24
        seq = load_features(cached[0])
        assert seq.frames.shape[1] == 14

    def test_train_gmm_and_evaluate_round_trip(self, cli_corpus, tmp_path):
        out = tmp_path / "gmm"
        common = ["--set", f"paths.corpus_dir={cli_corpus}",
                  "--set", "gmm.num_components=2",
                  "--set", "gmm.iterations=3"]
        rc = main(common + ["--out-dir", str(out), "train-gmm"])
        assert rc == 0
        assert (out / "bank.acgm").exists()
        report = (out / "report.csv").read_text()
        assert "OVERALL" in report

        out2 = tmp_path / "eval"
        rc = main(common + ["--out-dir", str(out2), "evaluate",
                            "--model", str(out / "bank.acgm")])
        assert rc == 0
        assert (out2 / "report.csv").read_text() == report

    def test_train_nn_writes_model_and_history(self, cli_corpus, tmp_path):
        out = tmp_path / "nn"
        rc = main(["--set", f"paths.corpus_dir={cli_corpus}",
                   "--set", "nn.hidden_dims=[8]",
                   "--set", "nn.schedule.max_epochs=2",
                   "--set", "nn.schedule.minibatch_frames=64",
                   "--set", "context.width=5",
                   "--set", "context.dct_enabled=false",
                   "--out-dir", str(out), "train-nn"])
        assert rc == 0
        assert (out / "model.acnn").exists()
        history = (out / "history.csv").read_text().splitlines()
        assert history[0].startswith("epoch")
        assert len(history) >= 2

    def test_config_error_exit_code(self, tmp_path):
        rc = main(["--set", "bogus=1", "--out-dir", str(tmp_path / "x"),
                   "synth-data"])
        assert rc == 2

    def test_data_error_exit_code(self, tmp_path):
        rc = main(["--set", f"paths.corpus_dir={tmp_path / 'missing'}",
                   "--out-dir", str(tmp_path / "y"), "train-gmm"])
        assert rc == 3

    def test_deterministic_reports(self, cli_corpus, tmp_path):
        reports = []
        for name in ("a", "b"):
            out = tmp_path / name
            rc = main(["--set", f"paths.corpus_dir={cli_corpus}",
                       "--set", "gmm.num_components=2",
                       "--set", "gmm.iterations=2",
                       "--out-dir", str(out), "train-gmm"])
            assert rc == 0
            reports.append((out / "bank.acgm").read_bytes())
        assert reports[0] == reports[1]
