"""Parameter-space geometry: segment scans, barriers, planes, and surfaces.

A barrier exists on the straight segment between two parameter vectors when
some interior point's loss strictly exceeds the larger endpoint loss. Planes
are spanned by three anchors with an orthonormal affine basis; iterates off
the plane are drawn as their orthogonal projections, with the residual norm
recording how far off-plane they really are.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import net
from .core import ParamVector, check_same_length
from .data import Dataset
from .net import MlpSpec


def _validate_lambda_grid(grid) -> np.ndarray:
    arr = np.asarray(grid, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("empty lambda grid")
    if np.any(np.diff(arr) <= 0):
        raise ValueError("lambda grid must be strictly increasing")
    if arr[0] != 0.0 or arr[-1] != 1.0:
        raise ValueError("lambda grid must start at 0 and end at 1")
    return arr


@dataclass(frozen=True)
class SegmentScan:
    """Losses along lam*w_m + (1-lam)*w_n; lam=0 is w_n, lam=1 is w_m."""

    w_m: ParamVector
    w_n: ParamVector
    lambda_grid: np.ndarray
    losses: np.ndarray

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lambda", "loss"])
            for lam, loss in zip(self.lambda_grid, self.losses):
                writer.writerow([repr(float(lam)), repr(float(loss))])


@dataclass(frozen=True)
class BarrierReport:
    has_barrier: bool
    max_interior_loss: float
    barrier_height: float  # max interior loss minus max endpoint loss
    argmax_lambda: float

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(
                {
                    "has_barrier": self.has_barrier,
                    "max_interior_loss": self.max_interior_loss,
                    "barrier_height": self.barrier_height,
                    "argmax_lambda": self.argmax_lambda,
                },
                fh,
                indent=2,
            )
            fh.write("\n")


def scan_segment(w_m: ParamVector, w_n: ParamVector, grid, spec: MlpSpec,
                 data: Dataset) -> SegmentScan:
    """Cross-entropy of every convex combination on the grid, full-dataset."""
    check_same_length(w_m, w_n, "scan_segment endpoints")
    lambda_grid = _validate_lambda_grid(grid)
    batch = data.as_batch()
    losses = np.empty(lambda_grid.shape[0])
    for i, lam in enumerate(lambda_grid):
        w = lam * w_m + (1.0 - lam) * w_n
        losses[i] = net.forward_loss(spec, w, batch).cross_entropy
    return SegmentScan(w_m=w_m, w_n=w_n, lambda_grid=lambda_grid, losses=losses)


def detect_barrier(scan: SegmentScan) -> BarrierReport:
    """Barrier iff some interior loss strictly exceeds the max endpoint loss.

    Argmax ties break toward the smallest lambda.
    """
    losses = np.asarray(scan.losses, dtype=np.float64)
    if losses.shape[0] < 3:
        raise ValueError(f"need at least 3 grid points, got {losses.shape[0]}")
    endpoint_max = max(losses[0], losses[-1])
    interior = losses[1:-1]
    arg = int(np.argmax(interior))
    max_interior = float(interior[arg])
    height = max_interior - float(endpoint_max)
    return BarrierReport(
        has_barrier=height > 0,
        max_interior_loss=max_interior,
        barrier_height=height,
        argmax_lambda=float(scan.lambda_grid[1 + arg]),
    )


class DegeneratePlaneError(ValueError):
    """The three anchors are collinear or coincident; no plane is defined."""


@dataclass(frozen=True)
class Plane:
    """Affine plane through three anchors with an orthonormal basis (u, v)."""

    p0: ParamVector
    p1: ParamVector
    p2: ParamVector
    u: ParamVector
    v: ParamVector
    anchor_coords: np.ndarray  # (3, 2) plane coordinates of p0, p1, p2

    @property
    def dim(self) -> int:
        return self.p0.shape[0]


def build_plane(p0: ParamVector, p1: ParamVector, p2: ParamVector) -> Plane:
    """Gram-Schmidt basis of the affine plane through the anchors.

    Re-orthogonalizes once so u.v stays at rounding level even for nearly
    collinear anchors.
    """
    check_same_length(p0, p1, "build_plane p0 vs p1")
    check_same_length(p0, p2, "build_plane p0 vs p2")
    d1 = p1 - p0
    d2 = p2 - p0
    scale = max(np.linalg.norm(d1), np.linalg.norm(d2))
    norm1 = np.linalg.norm(d1)
    if scale == 0 or norm1 <= 1e-13 * scale:
        raise DegeneratePlaneError("anchors p0 and p1 coincide")
    u = d1 / norm1
    w = d2 - (d2 @ u) * u
    w = w - (w @ u) * u
    norm2 = np.linalg.norm(w)
    if norm2 <= 1e-12 * scale:
        raise DegeneratePlaneError("anchors are collinear; p2 lies on the p0-p1 line")
    v = w / norm2
    coords = np.array([[0.0, 0.0], [d1 @ u, d1 @ v], [d2 @ u, d2 @ v]])
    return Plane(p0=np.asarray(p0, dtype=np.float64), p1=np.asarray(p1, dtype=np.float64),
                 p2=np.asarray(p2, dtype=np.float64), u=u, v=v, anchor_coords=coords)


def plane_point(plane: Plane, x: float, y: float) -> ParamVector:
    """Vector at plane coordinates (x, y): p0 + x*u + y*v."""
    return plane.p0 + x * plane.u + y * plane.v


def project_iterate(plane: Plane, w: ParamVector) -> tuple[np.ndarray, ParamVector, float]:
    """Orthogonal projection onto the affine plane.

    Returns (coords, projected, residual_norm) with coords relative to
    (p0, u, v).
    """
    check_same_length(plane.p0, w, "project_iterate")
    rel = w - plane.p0
    coords = np.array([rel @ plane.u, rel @ plane.v])
    projected = plane_point(plane, coords[0], coords[1])
    residual = float(np.linalg.norm(w - projected))
    return coords, projected, residual


def project_linear(p0: ParamVector, p1: ParamVector, p2: ParamVector, w: ParamVector,
                   ) -> tuple[np.ndarray, ParamVector]:
    """Least-squares combination lam0*p0 + lam1*p1 + lam2*p2 closest to w.

    This minimizes over the linear span of the three anchors (coefficients
    unconstrained), which differs in general from the affine projection of
    project_iterate.
    """
    check_same_length(p0, w, "project_linear")
    check_same_length(p0, p1, "project_linear anchors")
    check_same_length(p0, p2, "project_linear anchors")
    A = np.stack([p0, p1, p2], axis=1)
    gram = A.T @ A
    if np.linalg.matrix_rank(gram) < 3:
        raise np.linalg.LinAlgError(
            "anchors are linearly dependent as vectors; normal matrix is singular")
    lam = np.linalg.solve(gram, A.T @ w)
    return lam, A @ lam


@dataclass
class SurfaceGrid:
    """Train/validation loss over a rectangle in plane coordinates."""

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    resolution: tuple[int, int]
    xs: np.ndarray
    ys: np.ndarray
    train_loss: np.ndarray  # shape (ny, nx), row i is y=ys[i]
    val_loss: np.ndarray
    anchor_coords: np.ndarray
    projected_iterates: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "train_loss", "val_loss"])
            for iy, y in enumerate(self.ys):
                for ix, x in enumerate(self.xs):
                    writer.writerow([repr(float(x)), repr(float(y)),
                                     repr(float(self.train_loss[iy, ix])),
                                     repr(float(self.val_loss[iy, ix]))])

    def sidecar(self) -> dict:
        return {
            "x_range": list(self.x_range),
            "y_range": list(self.y_range),
            "resolution": list(self.resolution),
            "anchors": [{"x": float(c[0]), "y": float(c[1])} for c in self.anchor_coords],
            "projected_iterates": self.projected_iterates,
            "warnings": self.warnings,
        }

    def to_sidecar_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.sidecar(), fh, indent=2)
            fh.write("\n")


def default_ranges(plane: Plane, margin: float = 0.2) -> tuple[tuple[float, float], tuple[float, float]]:
    """Bounding box of the anchor coordinates expanded by margin per side."""
    lo = plane.anchor_coords.min(axis=0)
    hi = plane.anchor_coords.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    return ((float(lo[0] - margin * span[0]), float(hi[0] + margin * span[0])),
            (float(lo[1] - margin * span[1]), float(hi[1] + margin * span[1])))


def eval_surface(plane: Plane, x_range, y_range, resolution, spec: MlpSpec,
                 train: Dataset, val: Dataset, iterates=None) -> SurfaceGrid:
    """Full-dataset train and validation loss at every grid point.

    iterates: optional sequence of (label, ParamVector) projected onto the
    plane and recorded with their residual norms. Ranges that exclude an
    anchor produce a warning on the result, not an error.
    """
    nx, ny = int(resolution[0]), int(resolution[1])
    if nx < 1 or ny < 1:
        raise ValueError(f"resolution must be positive, got {resolution}")
    x_lo, x_hi = float(x_range[0]), float(x_range[1])
    y_lo, y_hi = float(y_range[0]), float(y_range[1])
    if x_hi < x_lo or y_hi < y_lo:
        raise ValueError("ranges must be nondecreasing intervals")
    xs = np.linspace(x_lo, x_hi, nx) if nx > 1 else np.array([x_lo])
    ys = np.linspace(y_lo, y_hi, ny) if ny > 1 else np.array([y_lo])

    warnings = []
    for i, (cx, cy) in enumerate(plane.anchor_coords):
        if not (x_lo <= cx <= x_hi and y_lo <= cy <= y_hi):
            warnings.append(f"anchor {i} at ({cx:.6g}, {cy:.6g}) lies outside the evaluated ranges")

    train_batch, val_batch = train.as_batch(), val.as_batch()
    train_loss = np.empty((ny, nx))
    val_loss = np.empty((ny, nx))
    for iy, y in enumerate(ys):
        for ix, x in enumerate(xs):
            w = plane_point(plane, float(x), float(y))
            train_loss[iy, ix] = net.forward_loss(spec, w, train_batch).cross_entropy
            val_loss[iy, ix] = net.forward_loss(spec, w, val_batch).cross_entropy

    projected = []
    for label, w in iterates or []:
        coords, _, residual = project_iterate(plane, w)
        projected.append({"epoch": label, "x": float(coords[0]), "y": float(coords[1]),
                          "residual_norm": residual})

    return SurfaceGrid(
        x_range=(x_lo, x_hi), y_range=(y_lo, y_hi), resolution=(nx, ny), xs=xs, ys=ys,
        train_loss=train_loss, val_loss=val_loss, anchor_coords=plane.anchor_coords,
        projected_iterates=projected, warnings=warnings,
    )
