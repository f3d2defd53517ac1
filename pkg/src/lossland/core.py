"""Deterministic dense numerics: flat parameter vectors and seeded RNG streams.

Every network, curve, and plane in this toolkit lives in a flat float64
parameter vector. All randomness flows through named RngStream objects so a
run is reproducible bit-for-bit from (seed, stream_id) pairs alone.
"""

from __future__ import annotations

import hashlib
from collections.abc import Sequence

import numpy as np

ParamVector = np.ndarray  # 1-D float64 array; the point type for all geometry


class DimensionMismatch(ValueError):
    """Two parameter vectors (or a vector and a spec) disagree in length."""

    def __init__(self, expected: int, actual: int, context: str = ""):
        self.expected = expected
        self.actual = actual
        prefix = f"{context}: " if context else ""
        super().__init__(f"{prefix}dimension mismatch, expected length {expected}, got {actual}")


def as_params(values) -> ParamVector:
    """Coerce to a contiguous 1-D float64 array."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    return arr


def check_same_length(a: ParamVector, b: ParamVector, context: str = "") -> None:
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(a.shape[0], b.shape[0], context)


def axpy_combine(coeffs: Sequence[float], points: Sequence[ParamVector]) -> ParamVector:
    """Linear combination sum_i coeffs[i] * points[i] of equal-length vectors.

    Inputs are never modified; the result is a fresh array.
    """
    if len(coeffs) != len(points):
        raise ValueError(f"got {len(coeffs)} coefficients for {len(points)} points")
    if len(points) == 0:
        raise ValueError("need at least one point")
    first = points[0]
    for p in points[1:]:
        check_same_length(first, p, "axpy_combine")
    out = np.zeros_like(first, dtype=np.float64)
    for c, p in zip(coeffs, points):
        out += float(c) * np.asarray(p, dtype=np.float64)
    return out


class RngStream:
    """Named deterministic random stream.

    The underlying generator is counter-based (Philox) keyed by a SHA-256
    hash of (seed, stream_id), so distinct stream ids derived from one seed
    behave independently, and identical pairs replay identical sequences on
    any platform.

    Single-owner: a stream advances as it is consumed and must not be shared
    across concurrent consumers.
    """

    def __init__(self, seed: int, stream_id: str):
        self.seed = int(seed)
        self.stream_id = str(stream_id)
        digest = hashlib.sha256(f"{self.seed}:{self.stream_id}".encode()).digest()
        key = int.from_bytes(digest[:16], "little")
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def child(self, suffix: str) -> "RngStream":
        """Derive an independent stream with an extended id."""
        return RngStream(self.seed, f"{self.stream_id}/{suffix}")

    def uniform01(self) -> float:
        """Next draw from U[0, 1)."""
        return float(self._gen.random())

    def gaussian(self, mean: float, stddev: float) -> float:
        """Next draw from N(mean, stddev^2); stddev 0 returns mean exactly."""
        if stddev < 0:
            raise ValueError(f"stddev must be nonnegative, got {stddev}")
        if stddev == 0.0:
            return float(mean)
        return float(mean + stddev * self._gen.standard_normal())

    # Vectorized conveniences; draw order is part of the reproducibility
    # contract, so callers must not mix scalar and array draws expecting
    # element-level equivalence.
    def uniform_array(self, n: int) -> np.ndarray:
        return self._gen.random(n)

    def gaussian_array(self, n: int, mean: float = 0.0, stddev: float = 1.0) -> np.ndarray:
        if stddev < 0:
            raise ValueError(f"stddev must be nonnegative, got {stddev}")
        return mean + stddev * self._gen.standard_normal(n)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id!r})"
