"""Config-driven experiment orchestration.

Two studies, desk scale: a reference mode plus hyperparameter variants with
pairwise curve connections, and a warm-restart trajectory study that scans
segments between pre-restart iterates, trains connecting curves, and
evaluates the loss surface on the plane spanned by one pair and its bend.

Every output is a CSV or JSON file plus a manifest of digests; reruns with
the same config reproduce all payload files byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from . import checkpoint as ckpt_io
from . import curve as curve_mod
from . import landscape, net, optim
from .config import (
    ConfigError,
    CurveTrainSettings,
    RunConfig,
    ScheduleConfig,
    StudyConfig,
    TaskConfig,
    ZooConfig,
    schedule_table,
)
from .core import RngStream
from .data import Dataset, augment_jitter, batches, load_csv, make_gaussians, make_spirals
from .net import LossReport, MlpSpec


def make_datasets(task: TaskConfig) -> tuple[Dataset, Dataset]:
    """Train/validation datasets, bit-identical for a given task config."""
    if task.kind == "spirals":
        train = make_spirals(task.n_train, task.turns, task.noise,
                             RngStream(task.data_seed, "data:spirals:train"), split="train")
        val = make_spirals(task.n_val, task.turns, task.noise,
                           RngStream(task.data_seed, "data:spirals:val"), split="val")
    elif task.kind == "gaussians":
        train = make_gaussians(task.n_train, task.classes, task.dim, task.separation,
                               RngStream(task.data_seed, "data:gaussians:train"), split="train")
        val = make_gaussians(task.n_val, task.classes, task.dim, task.separation,
                             RngStream(task.data_seed, "data:gaussians:val"), split="val")
    else:
        train = load_csv(task.train_path, split="train")
        val = load_csv(task.val_path, split="val")
    return train, val


def config_digest(config: BaseModel) -> str:
    payload = json.dumps(config.model_dump(mode="json"), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


class Artifact(BaseModel):
    kind: str
    path: str  # relative to the manifest's directory
    sha256: str


class ExperimentManifest(BaseModel):
    complete: bool = True
    artifacts: list[Artifact] = []
    failures: list[dict] = []


def build_manifest(out_dir: Path, entries: list[tuple[str, Path]],
                   failures: list[dict] | None = None) -> ExperimentManifest:
    """Digest every artifact; missing files are a hard error."""
    artifacts = []
    for kind, path in entries:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"manifest references missing artifact: {path}")
        artifacts.append(Artifact(kind=kind, path=str(path.relative_to(out_dir)),
                                  sha256=file_digest(path)))
    failures = failures or []
    return ExperimentManifest(complete=not failures, artifacts=artifacts, failures=failures)


def write_manifest(manifest: ExperimentManifest, out_dir: Path) -> Path:
    path = Path(out_dir) / "manifest.json"
    with open(path, "w") as fh:
        fh.write(manifest.model_dump_json(indent=2))
        fh.write("\n")
    return path


@dataclass
class TrainModeResult:
    config: RunConfig
    spec: MlpSpec
    final_params: np.ndarray
    final_train: LossReport
    final_val: LossReport
    snapshots: dict[int, np.ndarray]
    snapshot_paths: dict[int, Path]
    final_path: Path
    log_path: Path
    log_rows: list[dict] = field(default_factory=list)

    def artifact_entries(self) -> list[tuple[str, Path]]:
        entries = [("checkpoint", p) for _, p in sorted(self.snapshot_paths.items())]
        entries.append(("checkpoint", self.final_path))
        entries.append(("train_log", self.log_path))
        return entries


LOG_COLUMNS = ["epoch", "lr", "train_loss", "train_acc", "val_loss", "val_acc"]


def _write_log(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        for row in rows:
            writer.writerow([row["epoch"]] + [repr(float(row[c])) for c in LOG_COLUMNS[1:]])


def _epoch_lrs(config: RunConfig) -> list[float]:
    return [lr for _, lr in schedule_table(config.schedule, config.optimizer.lr, config.epochs)]


def train_mode(config: RunConfig, out_dir: str | Path) -> TrainModeResult:
    """Train one mode; emit per-epoch metrics CSV and snapshot checkpoints."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_ds, val_ds = make_datasets(config.task)
    spec = config.net.build_spec(train_ds.dim, train_ds.n_classes)

    # streams depend on the seed alone, so identically configured runs
    # produce identical modes regardless of their display name
    init_stream = RngStream(config.seed, "train:init")
    shuffle_stream = RngStream(config.seed, "train:shuffle")
    jitter_stream = RngStream(config.seed, "train:jitter")
    w = net.init_params(spec, init_stream)

    if config.optimizer.kind == "sgd":
        opt_state = optim.SgdState.zeros(spec.param_count, momentum=config.optimizer.momentum,
                                         weight_decay=config.weight_decay)
        step = optim.sgd_step
    else:
        opt_state = optim.AdamState.zeros(spec.param_count, beta1=config.optimizer.beta1,
                                          beta2=config.optimizer.beta2, eps=config.optimizer.eps,
                                          weight_decay=config.weight_decay)
        step = optim.adam_step

    batch_size = train_ds.n if config.batch_size == "full" else config.batch_size
    lrs = _epoch_lrs(config)
    digest = config_digest(config)
    seeds = {"run_seed": config.seed}
    if config.task.kind != "csv":
        seeds["data_seed"] = config.task.data_seed

    wanted = set(config.snapshot_epochs)
    snapshots: dict[int, np.ndarray] = {}
    snapshot_paths: dict[int, Path] = {}
    log_rows: list[dict] = []
    train_eval, val_eval = train_ds.as_batch(), val_ds.as_batch()

    def schedule_state(epoch: int) -> dict:
        state = {"kind": config.schedule.kind, "epoch": epoch}
        if config.schedule.kind == "sgdr":
            state.update({"t_0": config.schedule.t_0, "t_mult": config.schedule.t_mult,
                          "eta_min": config.schedule.eta_min, "eta_max": config.optimizer.lr})
        return state

    for epoch_idx in range(config.epochs):
        lr = lrs[epoch_idx]
        for batch in batches(train_ds, batch_size, shuffle_stream):
            if config.augment_sigma > 0:
                batch = augment_jitter(batch, config.augment_sigma, jitter_stream)
            _, grad = net.backward(spec, w, batch)
            w = step(w, grad, lr, opt_state)
        completed = epoch_idx + 1
        if not np.isfinite(w).all():
            raise ConfigError(f"training diverged at epoch {completed} (non-finite parameters); "
                              "reduce the learning rate")
        train_report = net.forward_loss(spec, w, train_eval)
        val_report = net.forward_loss(spec, w, val_eval)
        log_rows.append({"epoch": completed, "lr": lr,
                         "train_loss": train_report.cross_entropy, "train_acc": train_report.accuracy,
                         "val_loss": val_report.cross_entropy, "val_acc": val_report.accuracy})
        if completed in wanted:
            snapshots[completed] = w.copy()
            path = out / f"{config.name}_epoch{completed:04d}.ckpt"
            ckpt_io.save(ckpt_io.Checkpoint(epoch=completed, params=w, spec=spec,
                                            schedule_state=schedule_state(completed),
                                            rng_seeds=seeds, config_digest=digest), str(path))
            snapshot_paths[completed] = path

    final_train = net.forward_loss(spec, w, train_eval)
    final_val = net.forward_loss(spec, w, val_eval)
    final_path = out / f"{config.name}_final.ckpt"
    ckpt_io.save(ckpt_io.Checkpoint(epoch=config.epochs, params=w, spec=spec,
                                    schedule_state=schedule_state(config.epochs),
                                    rng_seeds=seeds, config_digest=digest), str(final_path))
    log_path = out / f"{config.name}_log.csv"
    _write_log(log_path, log_rows)
    return TrainModeResult(config=config, spec=spec, final_params=w,
                           final_train=final_train, final_val=final_val,
                           snapshots=snapshots, snapshot_paths=snapshot_paths,
                           final_path=final_path, log_path=log_path, log_rows=log_rows)


def _deep_merge(base: dict, overrides: dict) -> dict:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            if value.get("kind", merged[key].get("kind")) != merged[key].get("kind"):
                merged[key] = value  # switching a tagged union: replace, don't mix fields
            else:
                merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def variant_config(base: RunConfig, name: str, overrides: dict) -> RunConfig:
    """Apply variant overrides on top of the base run config and revalidate."""
    merged = _deep_merge(base.model_dump(mode="json"), overrides)
    merged["name"] = name
    try:
        return RunConfig.model_validate(merged)
    except ValueError as exc:
        raise ConfigError(f"variant {name!r} produced an invalid config: {exc}") from exc


@dataclass
class CurveLeg:
    """A trained connection between two modes with staged sweep exports."""

    name: str
    chain: curve_mod.CurveChain
    sweep_paths: list[Path]
    bend_path: Path
    final_sweep: curve_mod.CurveSweep


def _train_connection(name: str, w_a: np.ndarray, w_b: np.ndarray, spec: MlpSpec,
                      train_ds: Dataset, val_ds: Dataset, settings: CurveTrainSettings,
                      seed: int, out: Path, digest: str) -> CurveLeg:
    """Train a bend in stages, sweeping after each requested stage and at the end."""
    chain = curve_mod.init_bend(w_a, w_b)
    stream = RngStream(seed, f"curve:{name}:train")
    grid = curve_mod.uniform_grid(settings.grid_points)
    stages = sorted(set(settings.checkpoint_iters) | {settings.iters})
    sweep_paths = []
    done = 0
    sweep = None
    for stage in stages:
        chain = curve_mod.train_curve(chain, spec, train_ds, stage - done, settings.lr, stream,
                                      batch_size=settings.batch_size, momentum=settings.momentum)
        done = stage
        sweep = curve_mod.sweep_curve(chain, spec, train_ds, val_ds, grid)
        path = out / f"curve_{name}_iter{stage:06d}.csv"
        sweep.to_csv(str(path))
        sweep_paths.append(path)
    bend_path = out / f"bend_{name}.ckpt"
    ckpt_io.save(ckpt_io.Checkpoint(epoch=settings.iters, params=chain.theta, spec=spec,
                                    schedule_state={"kind": "curve", "iters": settings.iters},
                                    rng_seeds={"curve_seed": seed}, config_digest=digest),
                 str(bend_path))
    return CurveLeg(name=name, chain=chain, sweep_paths=sweep_paths, bend_path=bend_path,
                    final_sweep=sweep)


@dataclass
class ZooResult:
    manifest: ExperimentManifest
    manifest_path: Path
    modes: dict[str, TrainModeResult]
    connections: dict[str, CurveLeg]


def run_mode_zoo(cfg: ZooConfig, out_dir: str | Path) -> ZooResult:
    """Train the reference mode and all variants, then connect each pair."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digest = config_digest(cfg)
    entries: list[tuple[str, Path]] = []
    failures: list[dict] = []

    mode_configs = [cfg.base] + [variant_config(cfg.base, v.name, v.overrides)
                                 for v in cfg.variants]
    modes: dict[str, TrainModeResult] = {}
    for mode_cfg in mode_configs:
        try:
            result = train_mode(mode_cfg, out)
            modes[mode_cfg.name] = result
            entries.extend(result.artifact_entries())
        except Exception as exc:  # record the failed leg, keep going
            failures.append({"leg": f"train:{mode_cfg.name}", "error": str(exc)})

    connections: dict[str, CurveLeg] = {}
    base_name = cfg.base.name
    if base_name in modes:
        train_ds, val_ds = make_datasets(cfg.base.task)
        base_result = modes[base_name]
        for v in cfg.variants:
            if v.name not in modes:
                continue
            pair_name = f"{base_name}{v.name}"
            try:
                leg = _train_connection(pair_name, base_result.final_params,
                                        modes[v.name].final_params, base_result.spec,
                                        train_ds, val_ds, cfg.curve, cfg.base.seed, out, digest)
                connections[pair_name] = leg
                entries.extend(("curve_sweep", p) for p in leg.sweep_paths)
                entries.append(("bend_checkpoint", leg.bend_path))
            except Exception as exc:
                failures.append({"leg": f"connect:{pair_name}", "error": str(exc)})
    else:
        failures.append({"leg": "connect:*", "error": f"base mode {base_name!r} failed to train"})

    manifest = build_manifest(out, entries, failures)
    manifest_path = write_manifest(manifest, out)
    return ZooResult(manifest=manifest, manifest_path=manifest_path, modes=modes,
                     connections=connections)


@dataclass
class PairAnalysis:
    pair: tuple[int, int]
    scan_path: Path
    barrier_path: Path
    barrier: landscape.BarrierReport
    leg: CurveLeg


@dataclass
class StudyResult:
    manifest: ExperimentManifest
    manifest_path: Path
    training: TrainModeResult
    pair_reports: dict[tuple[int, int], PairAnalysis]
    surface_csv: Path | None
    surface_meta: Path | None
    surface: landscape.SurfaceGrid | None


def run_sgdr_study(cfg: StudyConfig, out_dir: str | Path) -> StudyResult:
    """Trajectory study: per-pair segment scan, barrier verdict, curve, and one plane."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digest = config_digest(cfg)

    training = train_mode(cfg.run, out)
    entries = training.artifact_entries()
    train_ds, val_ds = make_datasets(cfg.run.task)
    spec = training.spec

    lambda_grid = np.linspace(0.0, 1.0, cfg.segment_points)
    pair_reports: dict[tuple[int, int], PairAnalysis] = {}
    bends: dict[tuple[int, int], np.ndarray] = {}
    for m, n in cfg.pairs:
        w_m, w_n = training.snapshots[m], training.snapshots[n]
        scan = landscape.scan_segment(w_m, w_n, lambda_grid, spec, train_ds)
        scan_path = out / f"segment_{m:04d}_{n:04d}.csv"
        scan.to_csv(str(scan_path))
        barrier = landscape.detect_barrier(scan)
        barrier_path = out / f"barrier_{m:04d}_{n:04d}.json"
        barrier.to_json(str(barrier_path))
        leg = _train_connection(f"{m:04d}_{n:04d}", w_m, w_n, spec, train_ds, val_ds,
                                cfg.curve, cfg.run.seed, out, digest)
        bends[(m, n)] = leg.chain.theta
        entries.extend([("segment_scan", scan_path), ("barrier_report", barrier_path)])
        entries.extend(("curve_sweep", p) for p in leg.sweep_paths)
        entries.append(("bend_checkpoint", leg.bend_path))
        pair_reports[(m, n)] = PairAnalysis(pair=(m, n), scan_path=scan_path,
                                            barrier_path=barrier_path, barrier=barrier, leg=leg)

    surface_csv = surface_meta = None
    surface = None
    if cfg.plane_pair is not None:
        m, n = cfg.plane_pair
        plane = landscape.build_plane(training.snapshots[m], training.snapshots[n], bends[(m, n)])
        x_range, y_range = landscape.default_ranges(plane, cfg.surface_margin)
        iterates = [(epoch, params) for epoch, params in sorted(training.snapshots.items())]
        surface = landscape.eval_surface(plane, x_range, y_range, cfg.surface_resolution,
                                         spec, train_ds, val_ds, iterates=iterates)
        surface_csv = out / f"surface_{m:04d}_{n:04d}.csv"
        surface.to_csv(str(surface_csv))
        surface_meta = out / f"surface_{m:04d}_{n:04d}.meta.json"
        surface.to_sidecar_json(str(surface_meta))
        entries.extend([("surface_grid", surface_csv), ("surface_meta", surface_meta)])

    manifest = build_manifest(out, entries)
    manifest_path = write_manifest(manifest, out)
    return StudyResult(manifest=manifest, manifest_path=manifest_path, training=training,
                       pair_reports=pair_reports, surface_csv=surface_csv,
                       surface_meta=surface_meta, surface=surface)


def _load_matching(paths: list[str]) -> tuple[MlpSpec, list[np.ndarray]]:
    ckpts = [ckpt_io.load(p) for p in paths]
    spec = ckpts[0].spec
    for p, c in zip(paths[1:], ckpts[1:]):
        if c.spec != spec:
            raise ConfigError(f"checkpoint {p} has architecture {c.spec.layer_sizes}, "
                              f"expected {spec.layer_sizes}")
    return spec, [c.params for c in ckpts]


def connect_checkpoints(path_a: str, path_b: str, task: TaskConfig,
                        settings: CurveTrainSettings, seed: int, out_dir: str | Path,
                        name: str = "pair") -> tuple[CurveLeg, ExperimentManifest, Path]:
    """Train a connecting curve between two stored modes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec, (w_a, w_b) = _load_matching([path_a, path_b])
    train_ds, val_ds = make_datasets(task)
    leg = _train_connection(name, w_a, w_b, spec, train_ds, val_ds, settings, seed, out,
                            digest="")
    entries = [("curve_sweep", p) for p in leg.sweep_paths]
    entries.append(("bend_checkpoint", leg.bend_path))
    manifest = build_manifest(out, entries)
    return leg, manifest, write_manifest(manifest, out)


def segment_checkpoints(path_m: str, path_n: str, task: TaskConfig, points: int,
                        out_dir: str | Path, name: str = "pair",
                        ) -> tuple[landscape.BarrierReport, ExperimentManifest, Path]:
    """Scan the straight segment between two stored modes and report barriers."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if points < 3:
        raise ConfigError(f"segment scan needs at least 3 points, got {points}")
    spec, (w_m, w_n) = _load_matching([path_m, path_n])
    train_ds, _ = make_datasets(task)
    scan = landscape.scan_segment(w_m, w_n, np.linspace(0.0, 1.0, points), spec, train_ds)
    scan_path = out / f"segment_{name}.csv"
    scan.to_csv(str(scan_path))
    barrier = landscape.detect_barrier(scan)
    barrier_path = out / f"barrier_{name}.json"
    barrier.to_json(str(barrier_path))
    manifest = build_manifest(out, [("segment_scan", scan_path), ("barrier_report", barrier_path)])
    return barrier, manifest, write_manifest(manifest, out)


def plane_checkpoints(anchor_paths: list[str], task: TaskConfig, resolution: tuple[int, int],
                      margin: float, iterate_paths: list[str], out_dir: str | Path,
                      name: str = "plane",
                      ) -> tuple[landscape.SurfaceGrid, ExperimentManifest, Path]:
    """Evaluate the loss surface on the plane through three stored points."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if len(anchor_paths) != 3:
        raise ConfigError(f"a plane needs exactly 3 anchor checkpoints, got {len(anchor_paths)}")
    spec, anchors = _load_matching(list(anchor_paths) + list(iterate_paths))
    p0, p1, p2 = anchors[:3]
    iterate_params = anchors[3:]
    iterate_epochs = [ckpt_io.load(p).epoch for p in iterate_paths]
    plane = landscape.build_plane(p0, p1, p2)
    train_ds, val_ds = make_datasets(task)
    x_range, y_range = landscape.default_ranges(plane, margin)
    surface = landscape.eval_surface(plane, x_range, y_range, resolution, spec, train_ds, val_ds,
                                     iterates=list(zip(iterate_epochs, iterate_params)))
    csv_path = out / f"surface_{name}.csv"
    surface.to_csv(str(csv_path))
    meta_path = out / f"surface_{name}.meta.json"
    surface.to_sidecar_json(str(meta_path))
    manifest = build_manifest(out, [("surface_grid", csv_path), ("surface_meta", meta_path)])
    return surface, manifest, write_manifest(manifest, out)


def write_schedule_csv(schedule: ScheduleConfig, base_lr: float, epochs: int,
                       path: str | Path) -> Path:
    """Per-epoch LR table: the data behind a schedule comparison plot."""
    rows = schedule_table(schedule, base_lr, epochs)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "lr"])
        for epoch, lr in rows:
            writer.writerow([epoch, repr(float(lr))])
    return path
