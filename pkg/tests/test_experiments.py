import numpy as np
import pytest

from conftest import load_config
from lossland import checkpoint as ckpt_io
from lossland import experiments, net
from lossland.config import ConfigError, CurveTrainSettings, RunConfig, StudyConfig, ZooConfig
from lossland.core import RngStream
from lossland.experiments import (
    config_digest,
    file_digest,
    make_datasets,
    run_mode_zoo,
    run_sgdr_study,
    train_mode,
    variant_config,
    write_schedule_csv,
)


def tiny_run_config(**overrides) -> RunConfig:
    doc = {
        "name": "tiny",
        "seed": 5,
        "task": {"kind": "gaussians", "data_seed": 2, "n_train": 60, "n_val": 60,
                 "classes": 2, "dim": 2, "separation": 4.0},
        "net": {"hidden": [8]},
        "optimizer": {"kind": "sgd", "lr": 0.1, "momentum": 0.9},
        "schedule": {"kind": "constant"},
        "epochs": 4,
        "batch_size": 16,
    }
    doc.update(overrides)
    return RunConfig.model_validate(doc)


class TestTrainMode:
    def test_zero_epochs_checkpoint_equals_initialization(self, tmp_path):
        cfg = tiny_run_config(epochs=0)
        result = train_mode(cfg, tmp_path)
        train_ds, _ = make_datasets(cfg.task)
        spec = cfg.net.build_spec(train_ds.dim, train_ds.n_classes)
        expected = net.init_params(spec, RngStream(cfg.seed, "train:init"))
        loaded = ckpt_io.load(str(result.final_path))
        assert loaded.params.tobytes() == expected.tobytes()
        assert loaded.epoch == 0

    def test_log_csv_structure(self, tmp_path):
        cfg = tiny_run_config(epochs=3)
        result = train_mode(cfg, tmp_path)
        lines = result.log_path.read_text().strip().splitlines()
        assert lines[0] == "epoch,lr,train_loss,train_acc,val_loss,val_acc"
        assert len(lines) == 4

    def test_snapshots_round_trip(self, tmp_path):
        cfg = tiny_run_config(epochs=4, snapshot_epochs=[2, 4])
        result = train_mode(cfg, tmp_path)
        assert sorted(result.snapshots) == [2, 4]
        for epoch, path in result.snapshot_paths.items():
            loaded = ckpt_io.load(str(path))
            assert loaded.params.tobytes() == result.snapshots[epoch].tobytes()
            assert loaded.epoch == epoch
            assert loaded.config_digest == config_digest(cfg)

    def test_rerun_bit_identical(self, tmp_path):
        cfg = tiny_run_config(epochs=4)
        a = train_mode(cfg, tmp_path / "a")
        b = train_mode(cfg, tmp_path / "b")
        assert a.final_params.tobytes() == b.final_params.tobytes()
        assert (a.log_path.read_bytes() == b.log_path.read_bytes())

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_is_reported(self, tmp_path):
        cfg = tiny_run_config(optimizer={"kind": "sgd", "lr": 1e30, "momentum": 0.9})
        with pytest.raises(ConfigError, match="diverged"):
            train_mode(cfg, tmp_path)

    def test_golden_spirals_mode_reaches_99(self, tmp_path):
        cfg = RunConfig.model_validate(load_config("mode_spirals.json"))
        result = train_mode(cfg, tmp_path)
        assert result.final_train.accuracy >= 0.99

    def test_two_seeds_give_distinct_good_modes(self, tmp_path):
        base = load_config("mode_spirals.json")
        a = train_mode(RunConfig.model_validate({**base, "seed": 1, "name": "m1"}), tmp_path)
        b = train_mode(RunConfig.model_validate({**base, "seed": 2, "name": "m2"}), tmp_path)
        assert a.final_train.accuracy >= 0.99
        assert b.final_train.accuracy >= 0.99
        assert np.linalg.norm(a.final_params - b.final_params) > 1.0


class TestVariantConfig:
    def test_unknown_key_rejected(self):
        base = tiny_run_config()
        with pytest.raises(ConfigError, match="lr_max"):
            variant_config(base, "X", {"optimizer": {"lr_max": 0.2}})

    def test_kind_switch_replaces_subconfig(self):
        base = tiny_run_config()
        out = variant_config(base, "B", {"optimizer": {"kind": "adam", "lr": 0.01}})
        assert out.optimizer.kind == "adam"
        assert out.optimizer.beta1 == 0.9

    def test_partial_override_merges(self):
        base = tiny_run_config()
        out = variant_config(base, "X", {"optimizer": {"momentum": 0.5}})
        assert out.optimizer.kind == "sgd"
        assert out.optimizer.momentum == 0.5
        assert out.optimizer.lr == base.optimizer.lr


def tiny_zoo_config(variants, curve=None) -> ZooConfig:
    return ZooConfig.model_validate({
        "base": tiny_run_config().model_dump(mode="json"),
        "variants": variants,
        "curve": curve or {"iters": 20, "lr": 0.05, "batch_size": 16, "grid_points": 5},
    })


class TestRunModeZoo:
    def test_empty_variant_list(self, tmp_path):
        result = run_mode_zoo(tiny_zoo_config([]), tmp_path)
        assert list(result.modes) == ["tiny"]
        assert result.connections == {}
        assert result.manifest.complete
        kinds = {a.kind for a in result.manifest.artifacts}
        assert kinds == {"checkpoint", "train_log"}

    def test_identical_variant_yields_degenerate_flat_pair(self, tmp_path):
        # same seed, no overrides: endpoints coincide, so with zero curve
        # iterations the sweep is exactly the endpoint loss everywhere
        zoo = tiny_zoo_config([{"name": "same", "overrides": {}}],
                              curve={"iters": 0, "lr": 0.05, "grid_points": 9})
        result = run_mode_zoo(zoo, tmp_path)
        w_g = result.modes["tiny"].final_params
        w_x = result.modes["same"].final_params
        assert w_g.tobytes() == w_x.tobytes()
        sweep = result.connections["tinysame"].final_sweep
        endpoint = max(sweep.train_loss[0], sweep.train_loss[-1])
        assert sweep.train_loss.max() <= endpoint + 1e-6

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_failed_leg_recorded_and_run_continues(self, tmp_path):
        zoo = tiny_zoo_config([
            {"name": "bad", "overrides": {"optimizer": {"lr": 1e30}, "epochs": 8}},
            {"name": "ok", "overrides": {"seed": 6}},
        ])
        result = run_mode_zoo(zoo, tmp_path)
        assert not result.manifest.complete
        assert any(f["leg"] == "train:bad" for f in result.manifest.failures)
        assert "ok" in result.modes
        assert "tinyok" in result.connections

    def test_manifest_digests_match_files(self, tmp_path):
        result = run_mode_zoo(tiny_zoo_config([]), tmp_path)
        for artifact in result.manifest.artifacts:
            assert file_digest(tmp_path / artifact.path) == artifact.sha256

    def test_golden_zoo_connects_all_variants(self, tmp_path):
        zoo = ZooConfig.model_validate(load_config("zoo_spirals.json"))
        result = run_mode_zoo(zoo, tmp_path)
        assert result.manifest.complete
        assert set(result.connections) == {"GA", "GB", "GC", "GD", "GE", "GF"}
        for name, leg in result.connections.items():
            sweep = leg.final_sweep
            # three staged sweeps per pair: iters 2000, 4000, 6000
            assert len(leg.sweep_paths) == 3
            gap = min(sweep.train_acc[0], sweep.train_acc[-1]) - sweep.train_acc.min()
            assert gap <= 0.05, f"curve {name} dips {gap:.3f} below its endpoints"


def tiny_study_config(**overrides) -> StudyConfig:
    doc = {
        "run": {
            "name": "mini", "seed": 3,
            "task": {"kind": "gaussians", "data_seed": 2, "n_train": 60, "n_val": 60,
                     "classes": 2, "dim": 2, "separation": 3.0},
            "net": {"hidden": [8]},
            "optimizer": {"kind": "sgd", "lr": 0.2, "momentum": 0.9},
            "schedule": {"kind": "sgdr", "t_0": 5, "t_mult": 2, "eta_min": 1e-6},
            "epochs": 15,
            "batch_size": 16,
            "snapshot_epochs": [5, 15],
        },
        "pairs": [[5, 15]],
        "plane_pair": [5, 15],
        "curve": {"iters": 40, "lr": 0.05, "batch_size": 16, "grid_points": 7},
        "segment_points": 9,
        "surface_resolution": [5, 5],
    }
    doc.update(overrides)
    return StudyConfig.model_validate(doc)


class TestRunSgdrStudy:
    def test_pair_epochs_must_be_pre_restart(self):
        with pytest.raises(ValueError, match=r"restarts at \[5, 15\]"):
            tiny_study_config(pairs=[[5, 12]], plane_pair=None,
                              run={**tiny_study_config().run.model_dump(mode="json"),
                                   "snapshot_epochs": [5, 12, 15]})

    def test_pairs_need_snapshots(self):
        run = tiny_study_config().run.model_dump(mode="json")
        run["snapshot_epochs"] = [5]
        with pytest.raises(ValueError, match="snapshot"):
            tiny_study_config(run=run, plane_pair=None)

    def test_study_artifacts_and_plane_invariant(self, tmp_path):
        result = run_sgdr_study(tiny_study_config(), tmp_path)
        assert result.manifest.complete
        kinds = {a.kind for a in result.manifest.artifacts}
        assert {"checkpoint", "train_log", "segment_scan", "barrier_report",
                "curve_sweep", "bend_checkpoint", "surface_grid", "surface_meta"} <= kinds
        # anchors of the study's plane project with zero residual
        meta = result.surface.sidecar()
        snap_epochs = {it["epoch"]: it for it in meta["projected_iterates"]}
        assert snap_epochs[5]["residual_norm"] < 1e-8
        assert snap_epochs[15]["residual_norm"] < 1e-8

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = tiny_study_config()
        a = run_sgdr_study(cfg, tmp_path / "a")
        b = run_sgdr_study(cfg, tmp_path / "b")
        digests_a = {art.path: art.sha256 for art in a.manifest.artifacts}
        digests_b = {art.path: art.sha256 for art in b.manifest.artifacts}
        assert digests_a == digests_b

    def test_schedule_must_be_sgdr_or_step(self):
        run = tiny_study_config().run.model_dump(mode="json")
        run["schedule"] = {"kind": "constant"}
        run["snapshot_epochs"] = [5, 15]
        with pytest.raises(ValueError, match="sgdr or step"):
            tiny_study_config(run=run, plane_pair=None, pairs=[[5, 15]])


class TestScheduleCsv:
    def test_table_written(self, tmp_path):
        from lossland.config import SgdrScheduleConfig

        path = write_schedule_csv(SgdrScheduleConfig(t_0=3, t_mult=2), 0.1, 9,
                                  tmp_path / "sched.csv")
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epoch,lr"
        assert len(lines) == 10
        assert lines[1] == "0,0.1"
