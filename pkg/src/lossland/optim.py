"""Optimizers and learning-rate schedules.

SGD with momentum and coupled L2 weight decay, bias-corrected Adam, step
decay, linear decay, and cosine annealing with warm restarts. Schedule
granularity is per epoch; warm-restart state advances once per completed
epoch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import ParamVector, check_same_length


@dataclass(frozen=True)
class SgdrSchedule:
    """Cosine annealing with warm restarts.

    t_cur counts epochs since the last restart; t_i is the current period
    length, multiplied by t_mult at each restart.
    """

    eta_min: float
    eta_max: float
    t_0: int
    t_mult: int = 1
    t_cur: int = 0
    t_i: int | None = None

    def __post_init__(self):
        if not (0 <= self.eta_min <= self.eta_max):
            raise ValueError(f"need 0 <= eta_min <= eta_max, got ({self.eta_min}, {self.eta_max})")
        if self.t_0 < 1 or self.t_mult < 1:
            raise ValueError(f"t_0 and t_mult must be positive integers, got ({self.t_0}, {self.t_mult})")
        if self.t_i is None:
            object.__setattr__(self, "t_i", self.t_0)
        if not (0 <= self.t_cur <= self.t_i):
            raise ValueError(f"need 0 <= t_cur <= t_i, got ({self.t_cur}, {self.t_i})")

    def state_dict(self) -> dict:
        return {
            "kind": "sgdr",
            "eta_min": self.eta_min,
            "eta_max": self.eta_max,
            "t_0": self.t_0,
            "t_mult": self.t_mult,
            "t_cur": self.t_cur,
            "t_i": self.t_i,
        }


def sgdr_lr(s: SgdrSchedule) -> float:
    """Current learning rate: eta_min + (eta_max - eta_min)(1 + cos(pi t_cur/t_i))/2."""
    return s.eta_min + 0.5 * (s.eta_max - s.eta_min) * (1.0 + math.cos(math.pi * s.t_cur / s.t_i))


def sgdr_advance(s: SgdrSchedule) -> tuple[SgdrSchedule, bool]:
    """Advance by one epoch; on completing a period, reset t_cur and grow t_i."""
    t_cur = s.t_cur + 1
    if t_cur >= s.t_i:
        return replace(s, t_cur=0, t_i=s.t_i * s.t_mult), True
    return replace(s, t_cur=t_cur), False


def restart_epochs(t_0: int, t_mult: int, total_epochs: int) -> list[int]:
    """Cumulative epochs at which warm restarts occur, within the budget."""
    s = SgdrSchedule(eta_min=0.0, eta_max=1.0, t_0=t_0, t_mult=t_mult)
    out = []
    for epoch in range(1, total_epochs + 1):
        s, restarted = sgdr_advance(s)
        if restarted:
            out.append(epoch)
    return out


def step_decay_lr(epoch: int, eta0: float, milestones, factor: float) -> float:
    """eta0 divided by factor once per milestone at or before epoch."""
    milestones = list(milestones)
    if any(b < a for a, b in zip(milestones, milestones[1:])):
        raise ValueError(f"milestones must be sorted ascending, got {milestones}")
    if factor <= 0:
        raise ValueError(f"factor must be positive, got {factor}")
    hits = sum(1 for m in milestones if m <= epoch)
    return eta0 / factor**hits


def linear_decay_lr(epoch: int, total: int, eta0: float, eta_end: float) -> float:
    """Linear interpolation from eta0 at epoch 0 to eta_end at epoch total."""
    if total <= 0:
        raise ValueError(f"total must be positive, got {total}")
    if not (0 <= epoch <= total):
        raise ValueError(f"epoch {epoch} outside [0, {total}]")
    return eta0 + (eta_end - eta0) * epoch / total


@dataclass
class SgdState:
    """Momentum buffer plus hyperparameters for SGD with coupled L2 decay."""

    momentum_buffer: ParamVector
    momentum: float = 0.0
    weight_decay: float = 0.0

    def __post_init__(self):
        if not (0 <= self.momentum < 1):
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")

    @classmethod
    def zeros(cls, dim: int, momentum: float = 0.0, weight_decay: float = 0.0) -> "SgdState":
        return cls(np.zeros(dim), momentum=momentum, weight_decay=weight_decay)


def sgd_step(w: ParamVector, g: ParamVector, lr: float, state: SgdState) -> ParamVector:
    """buf <- momentum*buf + (g + weight_decay*w); w <- w - lr*buf.

    Mutates state.momentum_buffer; returns the new parameter vector.
    """
    check_same_length(w, g, "sgd_step params vs grad")
    check_same_length(w, state.momentum_buffer, "sgd_step params vs buffer")
    effective = g + state.weight_decay * w
    state.momentum_buffer = state.momentum * state.momentum_buffer + effective
    return w - lr * state.momentum_buffer


@dataclass
class AdamState:
    """First/second moment estimates and step counter for bias-corrected Adam."""

    m: ParamVector
    v: ParamVector
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    weight_decay: float = 0.0

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError(f"betas must be in [0, 1), got ({self.beta1}, {self.beta2})")

    @classmethod
    def zeros(cls, dim: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              weight_decay: float = 0.0) -> "AdamState":
        return cls(np.zeros(dim), np.zeros(dim), beta1=beta1, beta2=beta2, eps=eps,
                   weight_decay=weight_decay)


def adam_step(w: ParamVector, g: ParamVector, lr: float, state: AdamState) -> ParamVector:
    """Standard bias-corrected Adam update; mutates state, returns new params."""
    check_same_length(w, g, "adam_step params vs grad")
    check_same_length(w, state.m, "adam_step params vs moments")
    effective = g + state.weight_decay * w
    state.step_count += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * effective
    state.v = state.beta2 * state.v + (1 - state.beta2) * effective**2
    m_hat = state.m / (1 - state.beta1**state.step_count)
    v_hat = state.v / (1 - state.beta2**state.step_count)
    return w - lr * m_hat / (np.sqrt(v_hat) + state.eps)
