"""Validated run configuration.

Every experiment is driven by a single JSON document parsed into these
models. Unknown keys are rejected everywhere so a typo fails loudly before
any compute starts. Dataset generation is seeded by the task's own
data_seed, independent of the run seed, so differently seeded modes still
train on identical data.
"""

from __future__ import annotations

from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import optim
from .net import MlpSpec


class ConfigError(ValueError):
    pass


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SpiralsTask(StrictModel):
    kind: Literal["spirals"] = "spirals"
    data_seed: int = 0
    n_train: int = Field(400, ge=1)
    n_val: int = Field(400, ge=1)
    turns: float = 1.5
    noise: float = Field(0.1, ge=0)


class GaussiansTask(StrictModel):
    kind: Literal["gaussians"] = "gaussians"
    data_seed: int = 0
    n_train: int = Field(200, ge=1)
    n_val: int = Field(200, ge=1)
    classes: int = Field(2, ge=2)
    dim: int = Field(2, ge=1)
    separation: float = 4.0


class CsvTask(StrictModel):
    kind: Literal["csv"] = "csv"
    train_path: str
    val_path: str


TaskConfig = Annotated[Union[SpiralsTask, GaussiansTask, CsvTask], Field(discriminator="kind")]


class NetConfig(StrictModel):
    hidden: list[int] = Field(default_factory=lambda: [64, 64])
    activation: Literal["relu", "tanh"] = "relu"
    init_scale_multiplier: float = Field(1.0, ge=0)

    def build_spec(self, input_dim: int, n_classes: int) -> MlpSpec:
        return MlpSpec(
            layer_sizes=(input_dim, *self.hidden, n_classes),
            activation=self.activation,
            init_scale_multiplier=self.init_scale_multiplier,
        )


class SgdConfig(StrictModel):
    kind: Literal["sgd"] = "sgd"
    lr: float = Field(gt=0)
    momentum: float = Field(0.9, ge=0, lt=1)


class AdamConfig(StrictModel):
    kind: Literal["adam"] = "adam"
    lr: float = Field(gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)


OptimizerConfig = Annotated[Union[SgdConfig, AdamConfig], Field(discriminator="kind")]


class ConstantSchedule(StrictModel):
    kind: Literal["constant"] = "constant"


class StepSchedule(StrictModel):
    kind: Literal["step"] = "step"
    milestones: list[int]
    factor: float = Field(5.0, gt=0)

    @model_validator(mode="after")
    def _sorted(self):
        if sorted(self.milestones) != self.milestones:
            raise ValueError(f"milestones must be sorted ascending, got {self.milestones}")
        return self


class LinearSchedule(StrictModel):
    kind: Literal["linear"] = "linear"
    eta_end: float = Field(0.0, ge=0)


class SgdrScheduleConfig(StrictModel):
    kind: Literal["sgdr"] = "sgdr"
    t_0: int = Field(ge=1)
    t_mult: int = Field(2, ge=1)
    eta_min: float = Field(1e-6, ge=0)


ScheduleConfig = Annotated[
    Union[ConstantSchedule, StepSchedule, LinearSchedule, SgdrScheduleConfig],
    Field(discriminator="kind"),
]


class RunConfig(StrictModel):
    """One training run: task, architecture, optimizer, schedule, budget."""

    name: str = "mode"
    seed: int = 0
    task: TaskConfig
    net: NetConfig = Field(default_factory=NetConfig)
    optimizer: OptimizerConfig
    schedule: ScheduleConfig = Field(default_factory=ConstantSchedule)
    epochs: int = Field(ge=0)
    batch_size: Union[int, Literal["full"]] = 32
    weight_decay: float = Field(0.0, ge=0)
    augment_sigma: float = Field(0.0, ge=0)
    snapshot_epochs: list[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check(self):
        if isinstance(self.batch_size, int) and self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1 or 'full', got {self.batch_size}")
        bad = [e for e in self.snapshot_epochs if not (1 <= e <= self.epochs)]
        if bad:
            raise ValueError(f"snapshot epochs {bad} outside [1, {self.epochs}]")
        if len(set(self.snapshot_epochs)) != len(self.snapshot_epochs):
            raise ValueError("snapshot epochs must be unique")
        if isinstance(self.schedule, SgdrScheduleConfig) and self.schedule.eta_min > self.optimizer.lr:
            raise ValueError("sgdr eta_min exceeds the base learning rate (eta_max)")
        return self


class CurveTrainSettings(StrictModel):
    """Budget and hyperparameters for training a connecting curve's bend."""

    iters: int = Field(3000, ge=0)
    lr: float = Field(0.05, gt=0)
    momentum: float = Field(0.0, ge=0, lt=1)
    batch_size: int = Field(32, ge=1)
    grid_points: int = Field(21, ge=2)
    checkpoint_iters: list[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check(self):
        if any(i < 1 or i > self.iters for i in self.checkpoint_iters):
            raise ValueError(f"checkpoint iters must lie in [1, {self.iters}]")
        if sorted(self.checkpoint_iters) != self.checkpoint_iters:
            raise ValueError("checkpoint iters must be sorted ascending")
        return self


class ZooVariant(StrictModel):
    name: str
    overrides: dict


class ZooConfig(StrictModel):
    """Reference mode plus hyperparameter variants, each connected back to it."""

    base: RunConfig
    variants: list[ZooVariant] = Field(default_factory=list)
    curve: CurveTrainSettings = Field(default_factory=CurveTrainSettings)

    @model_validator(mode="after")
    def _check(self):
        names = [self.base.name] + [v.name for v in self.variants]
        if len(set(names)) != len(names):
            raise ValueError(f"mode names must be unique, got {names}")
        for v in self.variants:
            if "task" in v.overrides:
                raise ValueError(f"variant {v.name!r} may not override the task; modes must share data")
            if "name" in v.overrides:
                raise ValueError(f"variant {v.name!r} sets name inside overrides; use the variant name")
        return self


class StudyConfig(StrictModel):
    """Trajectory study: snapshot pairs scanned, connected, and planed."""

    run: RunConfig
    pairs: list[tuple[int, int]]
    plane_pair: tuple[int, int] | None = None
    curve: CurveTrainSettings = Field(default_factory=CurveTrainSettings)
    segment_points: int = Field(25, ge=3)
    surface_resolution: tuple[int, int] = (25, 25)
    surface_margin: float = Field(0.2, ge=0)

    @model_validator(mode="after")
    def _check(self):
        if self.run.schedule.kind not in ("sgdr", "step"):
            raise ValueError(f"study schedule must be sgdr or step, got {self.run.schedule.kind!r}")
        snapshots = set(self.run.snapshot_epochs)
        for m, n in self.pairs:
            if n <= m:
                raise ValueError(f"pair ({m}, {n}) must have the later epoch second")
            missing = {m, n} - snapshots
            if missing:
                raise ValueError(f"pair ({m}, {n}) needs snapshot epochs {sorted(missing)}")
        if self.plane_pair is not None and tuple(self.plane_pair) not in {tuple(p) for p in self.pairs}:
            raise ValueError(f"plane pair {self.plane_pair} is not among the configured pairs")
        if self.run.schedule.kind == "sgdr":
            restarts = set(optim.restart_epochs(self.run.schedule.t_0, self.run.schedule.t_mult,
                                                self.run.epochs))
            off = sorted({e for pair in self.pairs for e in pair} - restarts)
            if off:
                raise ValueError(
                    f"pair epochs {off} are not pre-restart iterates; this schedule restarts at "
                    f"{sorted(restarts)}")
        return self


def schedule_table(schedule: ScheduleConfig, base_lr: float, epochs: int) -> list[tuple[int, float]]:
    """Per-epoch learning rates: row (e, lr) is the LR used during epoch e+1."""
    if epochs < 0:
        raise ConfigError(f"epochs must be >= 0, got {epochs}")
    rows = []
    if schedule.kind == "sgdr":
        state = optim.SgdrSchedule(eta_min=schedule.eta_min, eta_max=base_lr,
                                   t_0=schedule.t_0, t_mult=schedule.t_mult)
        for epoch in range(epochs):
            rows.append((epoch, optim.sgdr_lr(state)))
            state, _ = optim.sgdr_advance(state)
    else:
        for epoch in range(epochs):
            if schedule.kind == "constant":
                lr = base_lr
            elif schedule.kind == "step":
                lr = optim.step_decay_lr(epoch, base_lr, schedule.milestones, schedule.factor)
            else:
                lr = optim.linear_decay_lr(epoch, epochs, base_lr, schedule.eta_end)
            rows.append((epoch, lr))
    return rows
