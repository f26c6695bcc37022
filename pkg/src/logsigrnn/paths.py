"""Discrete multivariate paths and their transformations.

A :class:`Path` is a strictly increasing time grid plus an (n, d) value
matrix; everywhere in this package it stands for its piecewise-linear
interpolation, which pins all iterated integrals to closed form.  The
file format is CSV with header ``time,x1,...,xd``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .exceptions import ShapeMismatchError

__all__ = [
    "Path",
    "CoarsePartition",
    "p_variation",
    "time_incorporate",
    "accumulate",
    "drop_points",
    "downsample",
    "reparameterize",
    "make_partition",
    "read_path_csv",
    "write_path_csv",
]


@dataclass(frozen=True)
class Path:
    """Timestamped d-dimensional series; row i of values is the sample at times[i]."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64, copy=True)
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or values.ndim != 2 or times.size != values.shape[0]:
            raise ShapeMismatchError(
                f"times {times.shape} and values {values.shape} do not align"
            )
        if times.size < 1:
            raise ValueError("a path needs at least one sample")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise ValueError("path entries must be finite")
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def length(self) -> int:
        return self.times.size

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_values(cls, values: np.ndarray) -> "Path":
        """Path on the integer grid 0, 1, ..., n-1."""
        values = np.asarray(values, dtype=np.float64)
        n = values.shape[0]
        return cls(np.arange(n, dtype=np.float64), values)


@dataclass(frozen=True)
class CoarsePartition:
    """Segment boundaries u_0 < ... < u_N, each a sample point of the path.

    ``indices`` locate the boundaries inside the sample grid; ``boundaries``
    are the corresponding times.
    """

    indices: np.ndarray
    boundaries: np.ndarray

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64, copy=True)
        bd = np.array(self.boundaries, dtype=np.float64, copy=True)
        if idx.ndim != 1 or bd.shape != idx.shape:
            raise ShapeMismatchError("indices and boundaries must align")
        if idx.size < 2:
            raise ValueError("a partition needs at least two boundaries")
        if not np.all(np.diff(idx) > 0):
            raise ValueError("boundaries must be strictly increasing")
        idx.flags.writeable = False
        bd.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "boundaries", bd)

    @property
    def segments(self) -> int:
        return self.indices.size - 1

    def validate_for(self, x: Path) -> None:
        idx = self.indices
        if idx[0] != 0 or idx[-1] != x.length - 1:
            raise ValueError("partition must span the whole path")
        if not np.array_equal(x.times[idx], self.boundaries):
            raise ValueError("partition boundaries are not sample points of this path")


def p_variation(x: Path, p: float) -> float:
    """p-variation of the piecewise-linear interpolation of x.

    The supremum over partitions is attained on a subset of the sample
    points (the summand is convex along each linear segment), so an O(n^2)
    dynamic program over vertices is exact:
    best[j] = max_{i<j} best[i] + |x_j - x_i|^p.
    """
    if p < 1:
        raise ValueError(f"p-variation needs p >= 1, got {p}")
    if x.length < 2:
        raise ValueError("p-variation needs at least two samples")
    v = x.values
    best = np.zeros(x.length)
    for j in range(1, x.length):
        step = np.linalg.norm(v[:j] - v[j], axis=1) ** p
        best[j] = np.max(best[:j] + step)
    return float(best[-1] ** (1.0 / p))


def time_incorporate(x: Path) -> Path:
    """Prepend a normalized-time channel: channel 0 = (t - t_1)/(t_n - t_1)."""
    span = x.times[-1] - x.times[0]
    if span > 0:
        tcol = (x.times - x.times[0]) / span
    else:
        tcol = np.zeros(x.length)
    return Path(x.times, np.column_stack([tcol, x.values]))


def accumulate(x: Path) -> Path:
    """Partial-sum sequence: y_i = x_1 + ... + x_i, same times and width."""
    return Path(x.times, np.cumsum(x.values, axis=0))


def drop_points(x: Path, ratio: float, seed: int, fill: str = "remove") -> Path:
    """Drop floor(ratio * n) interior samples uniformly at random.

    Endpoints are always kept; deterministic for a given seed.  The default
    removes the rows, so the surviving neighbours get joined by linear
    interpolation (how all downstream features read the path); ``fill="zero"``
    keeps the rows and zeroes their values instead (the convention of
    frame-dropping benchmarks).
    """
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"drop ratio must be in [0, 1), got {ratio}")
    if fill not in ("remove", "zero"):
        raise ValueError(f"fill must be 'remove' or 'zero', got {fill!r}")
    n = x.length
    k = min(int(ratio * n), max(n - 2, 0))
    if k == 0:
        return x
    rng = np.random.default_rng(seed)
    doomed = rng.choice(np.arange(1, n - 1), size=k, replace=False)
    if fill == "zero":
        values = x.values.copy()
        values[doomed] = 0.0
        return Path(x.times, values)
    keep = np.setdiff1d(np.arange(n), doomed)
    return Path(x.times[keep], x.values[keep])


def _nearest_indices(times: np.ndarray, targets: np.ndarray) -> np.ndarray:
    pos = np.searchsorted(times, targets)
    pos = np.clip(pos, 1, times.size - 1)
    left = times[pos - 1]
    right = times[pos]
    choose_left = (targets - left) <= (right - targets)
    return np.where(choose_left, pos - 1, pos)


def downsample(x: Path, num_steps: int) -> Path:
    """Keep the num_steps+1 samples nearest to a uniform grid over [t_1, t_n]."""
    if num_steps < 1 or num_steps > x.length - 1:
        raise ValueError(f"cannot downsample a {x.length}-point path to {num_steps} steps")
    targets = np.linspace(x.times[0], x.times[-1], num_steps + 1)
    idx = _nearest_indices(x.times, targets)
    idx[0], idx[-1] = 0, x.length - 1
    idx = np.unique(idx)
    return Path(x.times[idx], x.values[idx])


def reparameterize(x: Path, warp) -> Path:
    """Traverse the same trajectory at a different speed.

    ``warp`` is either a non-decreasing array of sample positions covering
    [t_1, t_n] (may repeat, may insert new interior positions), or a
    non-decreasing callable on [0, 1] with warp(0) = 0 and warp(1) = 1
    applied to normalized time.  The result carries a fresh uniform clock;
    only the trajectory matters to signature-type features.
    """
    t0, t1 = x.times[0], x.times[-1]
    if callable(warp):
        if x.length == 1:
            return x
        u = (x.times - t0) / (t1 - t0)
        positions = t0 + np.asarray([float(warp(v)) for v in u]) * (t1 - t0)
    else:
        positions = np.asarray(warp, dtype=np.float64)
    if positions.ndim != 1 or positions.size < 2:
        raise ValueError("warp must give at least two sample positions")
    if np.any(np.diff(positions) < 0):
        raise ValueError("warp must be non-decreasing")
    if not (np.isclose(positions[0], t0) and np.isclose(positions[-1], t1)):
        raise ValueError("warp must map onto the full interval")
    positions = np.clip(positions, t0, t1)
    values = np.column_stack(
        [np.interp(positions, x.times, x.values[:, c]) for c in range(x.width)]
    )
    return Path(np.linspace(t0, t1, positions.size), values)


def make_partition(x: Path, num_segments: int) -> CoarsePartition:
    """Coarse partition with boundaries at the samples nearest to uniform times.

    Boundaries are deduplicated and pinned to the endpoints, so every
    segment contains at least one increment.
    """
    if num_segments < 1:
        raise ValueError("need at least one segment")
    if num_segments > x.length - 1:
        raise ValueError(
            f"cannot cut a {x.length}-point path into {num_segments} segments"
        )
    targets = np.linspace(x.times[0], x.times[-1], num_segments + 1)
    idx = _nearest_indices(x.times, targets)
    idx[0], idx[-1] = 0, x.length - 1
    idx = np.unique(idx)
    return CoarsePartition(idx, x.times[idx])


def write_path_csv(x: Path, stream) -> None:
    close = False
    if isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__"):
        stream = open(stream, "w")
        close = True
    try:
        stream.write("time," + ",".join(f"x{i + 1}" for i in range(x.width)) + "\n")
        for t, row in zip(x.times, x.values):
            stream.write(repr(float(t)) + "," + ",".join(repr(float(v)) for v in row) + "\n")
    finally:
        if close:
            stream.close()


def read_path_csv(stream) -> Path:
    if isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__"):
        with open(stream, "r") as fh:
            text = fh.read()
    else:
        text = stream.read()
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty path file")
    header = [h.strip() for h in lines[0].split(",")]
    if header[0] != "time":
        raise ValueError("path CSV must start with a 'time' column")
    data = np.loadtxt(io.StringIO("\n".join(lines[1:])), delimiter=",", ndmin=2)
    if data.shape[1] != len(header):
        raise ShapeMismatchError(
            f"rows have {data.shape[1]} columns, header promises {len(header)}"
        )
    return Path(data[:, 0], data[:, 1:])
