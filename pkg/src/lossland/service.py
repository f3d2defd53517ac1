"""HTTP service exposing the toolkit's experiment operations.

Every operation writes its artifacts (CSV, JSON, checkpoints) under the
requested output directory on the server's filesystem and returns paths,
digests, and headline numbers. The CLI is a thin client of these endpoints.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import experiments
from .checkpoint import CheckpointFormatError
from .config import (
    ConfigError,
    CurveTrainSettings,
    RunConfig,
    ScheduleConfig,
    StudyConfig,
    TaskConfig,
    ZooConfig,
)
from .core import DimensionMismatch
from .experiments import ExperimentManifest
from .landscape import DegeneratePlaneError

app = FastAPI(
    title="lossland",
    description="Loss-landscape analysis: train modes, connect them, scan for barriers, "
                "slice loss surfaces.",
    version="0.1.0",
)


class MetricsOut(BaseModel):
    loss: float
    accuracy: float


class TrainRequest(BaseModel):
    config: RunConfig
    out_dir: str


class TrainResponse(BaseModel):
    final_checkpoint: str
    snapshot_checkpoints: dict[int, str]
    log: str
    train: MetricsOut
    val: MetricsOut


class ZooRequest(BaseModel):
    config: ZooConfig
    out_dir: str


class ModeSummary(BaseModel):
    name: str
    train: MetricsOut
    val: MetricsOut
    final_checkpoint: str


class ConnectionSummary(BaseModel):
    name: str
    sweeps: list[str]
    bend_checkpoint: str
    max_curve_train_loss: float
    min_curve_val_acc: float


class ZooResponse(BaseModel):
    manifest: ExperimentManifest
    manifest_path: str
    modes: list[ModeSummary]
    connections: list[ConnectionSummary]


class StudyRequest(BaseModel):
    config: StudyConfig
    out_dir: str


class BarrierOut(BaseModel):
    pair: tuple[int, int]
    has_barrier: bool
    max_interior_loss: float
    barrier_height: float
    argmax_lambda: float
    segment_csv: str
    barrier_json: str
    curve_csv: str


class StudyResponse(BaseModel):
    manifest: ExperimentManifest
    manifest_path: str
    barriers: list[BarrierOut]
    surface_csv: str | None
    surface_meta: str | None


class ConnectRequest(BaseModel):
    checkpoint_a: str
    checkpoint_b: str
    task: TaskConfig
    curve: CurveTrainSettings = Field(default_factory=CurveTrainSettings)
    seed: int = 0
    name: str = "pair"
    out_dir: str


class ConnectResponse(BaseModel):
    sweeps: list[str]
    bend_checkpoint: str
    max_curve_train_loss: float
    endpoint_train_loss: tuple[float, float]
    manifest_path: str


class SegmentRequest(BaseModel):
    checkpoint_m: str
    checkpoint_n: str
    task: TaskConfig
    points: int = 25
    name: str = "pair"
    out_dir: str


class SegmentResponse(BaseModel):
    has_barrier: bool
    max_interior_loss: float
    barrier_height: float
    argmax_lambda: float
    segment_csv: str
    barrier_json: str
    manifest_path: str


class PlaneRequest(BaseModel):
    anchors: list[str]
    task: TaskConfig
    resolution: tuple[int, int] = (25, 25)
    margin: float = 0.2
    iterates: list[str] = Field(default_factory=list)
    name: str = "plane"
    out_dir: str


class PlaneResponse(BaseModel):
    surface_csv: str
    surface_meta: str
    warnings: list[str]
    manifest_path: str


class ScheduleDumpRequest(BaseModel):
    schedule: ScheduleConfig
    base_lr: float = Field(gt=0)
    epochs: int = Field(ge=0)
    out_path: str | None = None


class ScheduleDumpResponse(BaseModel):
    rows: list[tuple[int, float]]
    csv_path: str | None


_CLIENT_ERRORS = (ConfigError, ValueError, DimensionMismatch, DegeneratePlaneError,
                  CheckpointFormatError, FileNotFoundError, np.linalg.LinAlgError)


def _client_error(exc: Exception) -> HTTPException:
    return HTTPException(status_code=400, detail=str(exc))


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/train", response_model=TrainResponse)
def train(req: TrainRequest) -> TrainResponse:
    try:
        result = experiments.train_mode(req.config, req.out_dir)
    except _CLIENT_ERRORS as exc:
        raise _client_error(exc) from exc
    return TrainResponse(
        final_checkpoint=str(result.final_path),
        snapshot_checkpoints={e: str(p) for e, p in result.snapshot_paths.items()},
        log=str(result.log_path),
        train=MetricsOut(loss=result.final_train.cross_entropy, accuracy=result.final_train.accuracy),
        val=MetricsOut(loss=result.final_val.cross_entropy, accuracy=result.final_val.accuracy),
    )


@app.post("/zoo", response_model=ZooResponse)
def zoo(req: ZooRequest) -> ZooResponse:
    try:
        result = experiments.run_mode_zoo(req.config, req.out_dir)
    except _CLIENT_ERRORS as exc:
        raise _client_error(exc) from exc
    modes = [
        ModeSummary(name=name,
                    train=MetricsOut(loss=r.final_train.cross_entropy, accuracy=r.final_train.accuracy),
                    val=MetricsOut(loss=r.final_val.cross_entropy, accuracy=r.final_val.accuracy),
                    final_checkpoint=str(r.final_path))
        for name, r in result.modes.items()
    ]
    connections = [
        ConnectionSummary(name=name, sweeps=[str(p) for p in leg.sweep_paths],
                          bend_checkpoint=str(leg.bend_path),
                          max_curve_train_loss=float(leg.final_sweep.train_loss.max()),
                          min_curve_val_acc=float(leg.final_sweep.val_acc.min()))
        for name, leg in result.connections.items()
    ]
    return ZooResponse(manifest=result.manifest, manifest_path=str(result.manifest_path),
                       modes=modes, connections=connections)


@app.post("/sgdr-study", response_model=StudyResponse)
def sgdr_study(req: StudyRequest) -> StudyResponse:
    try:
        result = experiments.run_sgdr_study(req.config, req.out_dir)
    except _CLIENT_ERRORS as exc:
        raise _client_error(exc) from exc
    barriers = [
        BarrierOut(pair=pair, has_barrier=pa.barrier.has_barrier,
                   max_interior_loss=pa.barrier.max_interior_loss,
                   barrier_height=pa.barrier.barrier_height,
                   argmax_lambda=pa.barrier.argmax_lambda,
                   segment_csv=str(pa.scan_path), barrier_json=str(pa.barrier_path),
                   curve_csv=str(pa.leg.sweep_paths[-1]))
        for pair, pa in result.pair_reports.items()
    ]
    return StudyResponse(manifest=result.manifest, manifest_path=str(result.manifest_path),
                         barriers=barriers,
                         surface_csv=str(result.surface_csv) if result.surface_csv else None,
                         surface_meta=str(result.surface_meta) if result.surface_meta else None)


@app.post("/connect", response_model=ConnectResponse)
def connect(req: ConnectRequest) -> ConnectResponse:
    try:
        leg, _, manifest_path = experiments.connect_checkpoints(
            req.checkpoint_a, req.checkpoint_b, req.task, req.curve, req.seed, req.out_dir,
            name=req.name)
    except _CLIENT_ERRORS as exc:
        raise _client_error(exc) from exc
    sweep = leg.final_sweep
    return ConnectResponse(
        sweeps=[str(p) for p in leg.sweep_paths],
        bend_checkpoint=str(leg.bend_path),
        max_curve_train_loss=float(sweep.train_loss.max()),
        endpoint_train_loss=(float(sweep.train_loss[0]), float(sweep.train_loss[-1])),
        manifest_path=str(manifest_path),
    )


@app.post("/segment", response_model=SegmentResponse)
def segment(req: SegmentRequest) -> SegmentResponse:
    try:
        barrier, _, manifest_path = experiments.segment_checkpoints(
            req.checkpoint_m, req.checkpoint_n, req.task, req.points, req.out_dir, name=req.name)
    except _CLIENT_ERRORS as exc:
        raise _client_error(exc) from exc
    out = Path(req.out_dir)
    return SegmentResponse(
        has_barrier=barrier.has_barrier, max_interior_loss=barrier.max_interior_loss,
        barrier_height=barrier.barrier_height, argmax_lambda=barrier.argmax_lambda,
        segment_csv=str(out / f"segment_{req.name}.csv"),
        barrier_json=str(out / f"barrier_{req.name}.json"),
        manifest_path=str(manifest_path),
    )


@app.post("/plane", response_model=PlaneResponse)
def plane(req: PlaneRequest) -> PlaneResponse:
    try:
        surface, _, manifest_path = experiments.plane_checkpoints(
            req.anchors, req.task, req.resolution, req.margin, req.iterates, req.out_dir,
            name=req.name)
    except _CLIENT_ERRORS as exc:
        raise _client_error(exc) from exc
    out = Path(req.out_dir)
    return PlaneResponse(
        surface_csv=str(out / f"surface_{req.name}.csv"),
        surface_meta=str(out / f"surface_{req.name}.meta.json"),
        warnings=surface.warnings,
        manifest_path=str(manifest_path),
    )


@app.post("/schedule-dump", response_model=ScheduleDumpResponse)
def schedule_dump(req: ScheduleDumpRequest) -> ScheduleDumpResponse:
    try:
        rows = experiments.schedule_table(req.schedule, req.base_lr, req.epochs)
        csv_path = None
        if req.out_path:
            csv_path = str(experiments.write_schedule_csv(req.schedule, req.base_lr, req.epochs,
                                                          req.out_path))
    except _CLIENT_ERRORS as exc:
        raise _client_error(exc) from exc
    return ScheduleDumpResponse(rows=rows, csv_path=csv_path)
