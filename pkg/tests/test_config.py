"""Run-config parsing, defaulting, validation, and the resolved echo."""

import pytest

from conftest import write_run_config
from densiprune.config import ConfigError, RunConfig


class TestParsing:
    def test_defaults_fill_everything(self, idx_dataset_dir, tmp_path):
        cfg_path = write_run_config(tmp_path / "run.cfg", idx_dataset_dir)
        cfg = RunConfig.from_file(cfg_path)
        assert cfg.seed == 1234
        assert cfg.batch_size == 128
        assert cfg.values["arch.name"] == "vgg-lite"
        assert cfg.criteria().rho_tolerance == 0.001

    def test_unknown_key_rejected(self, idx_dataset_dir, tmp_path):
        path = write_run_config(tmp_path / "run.cfg", idx_dataset_dir,
                                extra={"dataset.shape": "bad"})
        with pytest.raises(ConfigError, match="unknown key"):
            RunConfig.from_file(path)

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed = 1\nseed = 2\n")
        with pytest.raises(ConfigError, match="duplicate"):
            RunConfig.from_file(path)

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("this is not a key value line\n")
        with pytest.raises(ConfigError, match="key = value"):
            RunConfig.from_file(path)

    def test_missing_config_file_names_path(self, tmp_path):
        with pytest.raises(ConfigError, match="no_such.cfg"):
            RunConfig.from_file(tmp_path / "no_such.cfg")

    def test_missing_dataset_file_names_path(self, idx_dataset_dir, tmp_path):
        path = write_run_config(
            tmp_path / "run.cfg", dict(idx_dataset_dir,
                                       train_images=tmp_path / "missing.idx"))
        with pytest.raises(ConfigError, match="missing.idx"):
            RunConfig.from_file(path)

    def test_overrides_apply(self, idx_dataset_dir, tmp_path):
        path = write_run_config(tmp_path / "run.cfg", idx_dataset_dir)
        cfg = RunConfig.from_file(path, overrides={"seed": 77})
        assert cfg.seed == 77

    def test_bad_schedule_rejected(self, idx_dataset_dir, tmp_path):
        path = write_run_config(tmp_path / "run.cfg", idx_dataset_dir,
                                extra={"optimizer.schedule": "nonsense"})
        with pytest.raises(ConfigError, match="schedule"):
            RunConfig.from_file(path)


class TestComponents:
    def test_datasets_load_with_subset(self, idx_dataset_dir, tmp_path):
        path = write_run_config(tmp_path / "run.cfg", idx_dataset_dir,
                                extra={"dataset.subset_per_class": "10"})
        train, evaluation = RunConfig.from_file(path).load_datasets()
        assert train.count == 100      # 10 classes x 10
        assert evaluation.count == 64

    def test_eval_falls_back_to_train(self, idx_dataset_dir, tmp_path):
        paths = dict(idx_dataset_dir)
        paths.pop("test_images")
        paths.pop("test_labels")
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text("\n".join([
            "dataset.kind = idx",
            f"dataset.train_images = {paths['train_images']}",
            f"dataset.train_labels = {paths['train_labels']}",
        ]) + "\n")
        train, evaluation = RunConfig.from_file(cfg_path).load_datasets()
        assert evaluation is train

    def test_auto_schedule_uses_final_epochs(self, idx_dataset_dir, tmp_path):
        path = write_run_config(tmp_path / "run.cfg", idx_dataset_dir,
                                extra={"criteria.final_train_epochs": "100"})
        opt = RunConfig.from_file(path).optimizer()
        assert opt.schedule == ((50, 0.1), (75, 0.1))

    def test_explicit_schedule(self, idx_dataset_dir, tmp_path):
        path = write_run_config(tmp_path / "run.cfg", idx_dataset_dir,
                                extra={"optimizer.schedule": "5:0.5,9:0.2"})
        opt = RunConfig.from_file(path).optimizer()
        assert opt.schedule == ((5, 0.5), (9, 0.2))

    def test_arch_resolution_builtin(self, idx_dataset_dir, tmp_path):
        path = write_run_config(tmp_path / "run.cfg", idx_dataset_dir,
                                extra={"arch.name": "resnet-lite"})
        arch = RunConfig.from_file(path).resolve_arch((1, 28, 28), 10)
        assert arch.name == "resnet-lite"


class TestResolvedEcho:
    def test_every_key_present_and_sorted(self, idx_dataset_dir, tmp_path):
        path = write_run_config(tmp_path / "run.cfg", idx_dataset_dir)
        cfg = RunConfig.from_file(path)
        text = cfg.resolved_text()
        keys = [line.split(" = ")[0] for line in text.strip().splitlines()]
        assert keys == sorted(keys)
        assert "criteria.rho_tolerance" in keys
        assert "optimizer.schedule" in keys

    def test_auto_schedule_is_materialized(self, idx_dataset_dir, tmp_path):
        path = write_run_config(tmp_path / "run.cfg", idx_dataset_dir)
        text = RunConfig.from_file(path).resolved_text()
        line = [l for l in text.splitlines() if l.startswith("optimizer.schedule")][0]
        assert "auto" not in line

    def test_written_file_reparses_identically(self, idx_dataset_dir, tmp_path):
        path = write_run_config(tmp_path / "run.cfg", idx_dataset_dir)
        cfg = RunConfig.from_file(path)
        out = tmp_path / "out"
        cfg.write_resolved(out)
        again = RunConfig.from_text((out / "resolved_config").read_text(),
                                    base_dir=tmp_path)
        assert again.resolved_text() == cfg.resolved_text()
