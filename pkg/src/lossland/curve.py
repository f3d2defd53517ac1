"""Mode connectivity: single-bend polygonal chains and curve training.

A chain runs from frozen endpoint w_a through a trainable bend theta to
frozen endpoint w_b, parameterized over t in [0, 1]. Training minimizes the
expected loss along the chain by sampling one t per mini-batch iteration and
following the chain-rule gradient with respect to theta.
"""

from __future__ import annotations

import csv
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from . import net, optim
from .core import ParamVector, RngStream, check_same_length
from .data import Batch, Dataset, batches
from .net import LossReport, MlpSpec


@dataclass(frozen=True)
class CurveChain:
    """Frozen endpoints plus the trainable bend; all three the same length."""

    w_a: ParamVector
    w_b: ParamVector
    theta: ParamVector

    def __post_init__(self):
        check_same_length(self.w_a, self.w_b, "chain endpoints")
        check_same_length(self.w_a, self.theta, "chain endpoint vs bend")
        self.w_a.setflags(write=False)
        self.w_b.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.w_a.shape[0]

    def with_theta(self, theta: ParamVector) -> "CurveChain":
        return CurveChain(self.w_a, self.w_b, theta)


def init_bend(w_a: ParamVector, w_b: ParamVector) -> CurveChain:
    """Chain whose bend starts at the elementwise midpoint of the endpoints."""
    check_same_length(w_a, w_b, "init_bend endpoints")
    theta = 0.5 * (np.asarray(w_a, dtype=np.float64) + np.asarray(w_b, dtype=np.float64))
    return CurveChain(np.asarray(w_a, dtype=np.float64).copy(),
                      np.asarray(w_b, dtype=np.float64).copy(), theta)


def _check_t(t: float) -> float:
    t = float(t)
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return t


def phi(chain: CurveChain, t: float) -> ParamVector:
    """Point on the chain: both linear pieces agree at the bend (t = 0.5)."""
    t = _check_t(t)
    if t <= 0.5:
        return 2.0 * (t * chain.theta + (0.5 - t) * chain.w_a)
    return 2.0 * ((t - 0.5) * chain.w_b + (1.0 - t) * chain.theta)


def bend_factor(t: float) -> float:
    """d phi / d theta along either piece: 2t below the bend, 2(1-t) above."""
    t = _check_t(t)
    return 2.0 * t if t <= 0.5 else 2.0 * (1.0 - t)


def curve_grad_general(chain: CurveChain, t: float,
                       loss_grad: Callable[[ParamVector], tuple[float, ParamVector]],
                       ) -> tuple[float, ParamVector]:
    """Chain-rule gradient of an arbitrary loss at phi(t) with respect to theta."""
    w = phi(chain, t)
    loss, gw = loss_grad(w)
    return loss, bend_factor(t) * gw


def curve_grad(chain: CurveChain, t: float, spec: MlpSpec, batch: Batch,
               ) -> tuple[float, ParamVector]:
    """Loss at phi(t) and the stochastic gradient estimate for the bend."""

    def loss_grad(w: ParamVector) -> tuple[float, ParamVector]:
        report, g = net.backward(spec, w, batch)
        return report.cross_entropy, g

    return curve_grad_general(chain, t, loss_grad)


def _validate_train_args(iters: int, lr: float) -> None:
    if iters < 0:
        raise ValueError(f"iters must be >= 0, got {iters}")
    if not np.isfinite(lr) or lr <= 0:
        raise ValueError(f"learning rate must be positive and finite, got {lr}")


def train_curve_general(chain: CurveChain, loss_grad, iters: int, lr: float,
                        stream: RngStream, momentum: float = 0.0) -> CurveChain:
    """SGD on the bend against an arbitrary loss_grad(w) -> (loss, grad) callable."""
    _validate_train_args(iters, lr)
    theta = chain.theta.copy()
    state = optim.SgdState.zeros(chain.dim, momentum=momentum)
    for _ in range(iters):
        t = stream.uniform01()
        _, g = curve_grad_general(chain.with_theta(theta), t, loss_grad)
        theta = optim.sgd_step(theta, g, lr, state)
    return chain.with_theta(theta)


def train_curve(chain: CurveChain, spec: MlpSpec, data: Dataset, iters: int, lr: float,
                stream: RngStream, batch_size: int = 32, momentum: float = 0.0,
                ) -> CurveChain:
    """Train the bend: one fresh t and one mini-batch per iteration.

    Endpoints pass through bit-identical; zero iterations returns the chain
    unchanged.
    """
    _validate_train_args(iters, lr)
    theta = chain.theta.copy()
    state = optim.SgdState.zeros(chain.dim, momentum=momentum)
    done = 0
    while done < iters:
        for batch in batches(data, batch_size, stream):
            if done >= iters:
                break
            t = stream.uniform01()
            _, g = curve_grad(chain.with_theta(theta), t, spec, batch)
            theta = optim.sgd_step(theta, g, lr, state)
            done += 1
    if not np.isfinite(theta).all():
        raise ValueError("curve training diverged (non-finite bend); reduce the learning rate")
    return chain.with_theta(theta)


@dataclass(frozen=True)
class CurveSweep:
    """Metrics along the chain at a sorted t grid."""

    t_grid: np.ndarray
    train_loss: np.ndarray
    train_acc: np.ndarray
    val_loss: np.ndarray
    val_acc: np.ndarray

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "train_loss", "train_acc", "val_loss", "val_acc"])
            for i, t in enumerate(self.t_grid):
                writer.writerow([repr(float(t)), repr(float(self.train_loss[i])),
                                 repr(float(self.train_acc[i])), repr(float(self.val_loss[i])),
                                 repr(float(self.val_acc[i]))])


def uniform_grid(n: int) -> np.ndarray:
    """n evenly spaced t values covering [0, 1] inclusive."""
    if n < 2:
        raise ValueError(f"grid needs at least 2 points, got {n}")
    return np.linspace(0.0, 1.0, n)


def _validate_grid(t_grid) -> np.ndarray:
    grid = np.asarray(t_grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("empty t grid")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("t grid must be strictly increasing")
    if grid[0] != 0.0 or grid[-1] != 1.0:
        raise ValueError("t grid must start at 0 and end at 1")
    return grid


def sweep_curve(chain: CurveChain, spec: MlpSpec, train: Dataset, val: Dataset,
               t_grid) -> CurveSweep:
    """Evaluate all four metrics at every grid point over the full datasets."""
    grid = _validate_grid(t_grid)
    train_batch, val_batch = train.as_batch(), val.as_batch()
    rows: list[tuple[LossReport, LossReport]] = []
    for t in grid:
        w = phi(chain, float(t))
        rows.append((net.forward_loss(spec, w, train_batch), net.forward_loss(spec, w, val_batch)))
    return CurveSweep(
        t_grid=grid,
        train_loss=np.array([r[0].cross_entropy for r in rows]),
        train_acc=np.array([r[0].accuracy for r in rows]),
        val_loss=np.array([r[1].cross_entropy for r in rows]),
        val_acc=np.array([r[1].accuracy for r in rows]),
    )
