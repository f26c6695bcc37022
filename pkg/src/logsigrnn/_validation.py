"""Input validation helpers for the estimator API."""

from __future__ import annotations

import numpy as np

from .paths import Path

__all__ = ["as_path_list", "check_targets"]


def as_path_list(X) -> list:
    """Coerce estimator input into a list of paths.

    Accepts a list of :class:`Path`, a list of (n_i, d) arrays (variable
    lengths allowed, interpreted on the integer time grid), or one stacked
    (n_samples, n_points, d) array.
    """
    if isinstance(X, np.ndarray):
        if X.ndim != 3:
            raise ValueError(
                f"array input must be 3-d (n_samples, n_points, d), got shape {X.shape}"
            )
        return [Path.from_values(sample) for sample in X]
    out = []
    for item in X:
        if isinstance(item, Path):
            out.append(item)
        else:
            out.append(Path.from_values(np.asarray(item, dtype=np.float64)))
    if not out:
        raise ValueError("empty input: need at least one path")
    widths = {p.width for p in out}
    if len(widths) != 1:
        raise ValueError(f"paths have inconsistent widths {sorted(widths)}")
    return out


def check_targets(y, n_samples: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2 or y.shape[0] != n_samples:
        raise ValueError(f"targets have shape {y.shape}, expected ({n_samples}, e)")
    return y
