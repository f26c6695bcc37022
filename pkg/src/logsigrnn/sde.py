"""Synthetic data generation and the multi-step Taylor (log-ODE) estimator.

The benchmark system is the scalar Stratonovich equation

    dY = (-pi Y + sin(pi t)) dX1 + Y dX2,   Y_0 = 0,

driven by X = (t, W) with W a Brownian motion.  Simulation uses the
Milstein scheme with the Stratonovich correction (for diffusion b(y) = y
the correction is Y (dW)^2 / 2).  Normal increments come from a seeded
64-bit counter-based generator (Philox) through an explicit Box-Muller
map, so fixtures are reproducible.

The Taylor estimator pastes local expansions over a coarse partition:
each step adds sum_j f_circ_j(Y) X^j over the segment's signature levels
X^j, with the iterated vector fields f_circ_(k+1) = D(f_circ_k) f
supplied in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .nn import Dataset
from .paths import Path
from .tensoralg import TensorElement

__all__ = [
    "VectorFieldSet",
    "SdeSample",
    "example2_fields",
    "linear_field",
    "milstein_strat",
    "simulate_example2",
    "gen_dataset",
    "taylor_estimate",
    "write_dataset",
    "load_dataset",
]


@dataclass(frozen=True)
class VectorFieldSet:
    """Closed-form iterated vector fields for the Taylor estimator.

    ``fields[j-1]`` evaluates f_circ_j: state (e,) -> array (e, d**j), the
    coefficient of signature level j.  fields[0] is f itself.
    """

    e: int
    d: int
    fields: tuple

    @property
    def order(self) -> int:
        return len(self.fields)

    def apply(self, j: int, y: np.ndarray) -> np.ndarray:
        out = np.asarray(self.fields[j - 1](y), dtype=np.float64)
        return out.reshape(self.e, self.d**j)


@dataclass(frozen=True)
class SdeSample:
    """One simulated draw: the (t, W) driver path and the terminal value."""

    driver: Path
    terminal: float
    seed: int

    def __post_init__(self):
        if not np.array_equal(self.driver.values[:, 0], self.driver.times):
            raise ValueError("driver channel 0 must equal the sample times")


# ---------------------------------------------------------------------------
# Vector fields.
# ---------------------------------------------------------------------------


def example2_fields(order: int = 3) -> VectorFieldSet:
    """Iterated fields of the benchmark SDE on the extended state z = (t, y).

    The sin(pi t) drift coefficient is state-dependent once time is part of
    the state, driven by channel 1 (which is t itself).  Hand-derived
    closed forms up to order 3; index convention: the earliest integration
    letter comes first in each level's word.
    """
    if not 1 <= order <= 3:
        raise ValueError("closed forms available for orders 1..3 only")
    pi = np.pi

    def f1(z):
        t, y = z
        return np.array([[1.0, 0.0], [-pi * y + np.sin(pi * t), y]])

    def f2(z):
        t, y = z
        s, c = np.sin(pi * t), np.cos(pi * t)
        out = np.zeros((2, 2, 2))
        out[1, 0, 0] = pi * c - pi * s + pi**2 * y
        out[1, 1, 0] = -pi * y
        out[1, 0, 1] = -pi * y + s
        out[1, 1, 1] = y
        return out

    def f3(z):
        t, y = z
        s, c = np.sin(pi * t), np.cos(pi * t)
        out = np.zeros((2, 2, 2, 2))
        out[1, 0, 0, 0] = -(pi**2) * c - pi**3 * y
        out[1, 0, 1, 0] = pi**2 * y - pi * s
        out[1, 0, 0, 1] = pi * c + pi**2 * y - pi * s
        out[1, 0, 1, 1] = -pi * y + s
        out[1, 1, 0, 0] = pi**2 * y
        out[1, 1, 1, 0] = -pi * y
        out[1, 1, 0, 1] = -pi * y
        out[1, 1, 1, 1] = y
        return out

    return VectorFieldSet(e=2, d=2, fields=(f1, f2, f3)[:order])


def linear_field(a: float, order: int) -> VectorFieldSet:
    """1-d linear field f(y) = a y, with f_circ_j(y) = a^j y."""

    def make(j):
        return lambda y: np.array([[a**j * float(np.asarray(y).ravel()[0])]]).reshape(1, 1 ** j)

    return VectorFieldSet(e=1, d=1, fields=tuple(make(j) for j in range(1, order + 1)))


# ---------------------------------------------------------------------------
# Simulation.
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def _philox(seed: int, stream: int = 0):
    key = np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _box_muller(rng, count: int) -> np.ndarray:
    """Standard normals from uniforms; counter-based and platform-stable."""
    pairs = (count + 1) // 2
    u = rng.random((pairs, 2))
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))  # 1 - u in (0, 1], log is safe
    theta = 2.0 * np.pi * u[:, 1]
    z = np.column_stack([r * np.cos(theta), r * np.sin(theta)]).ravel()
    return z[:count]


def milstein_strat(
    times: np.ndarray,
    dW: np.ndarray,
    drift: Callable,
    diffusion: Callable,
    diffusion_dy: Callable,
    y0=0.0,
) -> np.ndarray:
    """Stratonovich Milstein for a scalar equation dY = a(t, Y) dt + b(Y) o dW.

    Update: Y += a dt + b dW + (1/2) b b' dW^2.  State may be a vector of
    independent copies (one per dW column); returns the terminal values.
    """
    dW = np.asarray(dW, dtype=np.float64)
    y = np.full(dW.shape[1:], float(y0)) if dW.ndim > 1 else float(y0)
    dts = np.diff(times)
    for i, dt in enumerate(dts):
        t = times[i]
        b = diffusion(y)
        dw = dW[i]
        y = y + drift(t, y) * dt + b * dw + 0.5 * b * diffusion_dy(y) * dw * dw
    return y


def _example2_coeffs():
    pi = np.pi
    return (
        lambda t, y: -pi * y + np.sin(pi * t),
        lambda y: y,
        lambda y: np.ones_like(np.asarray(y)) if np.ndim(y) else 1.0,
    )


def _simulate_batch(count: int, steps: int, T: float, seed: int):
    """Brownian drivers and terminal values for samples (seed, 0..count-1)."""
    times = np.linspace(0.0, T, steps + 1)
    dt = T / steps
    dW = np.empty((steps, count))
    for i in range(count):
        dW[:, i] = _box_muller(_philox(seed, i), steps) * np.sqrt(dt)
    drift, b, db = _example2_coeffs()
    terminal = milstein_strat(times, dW, drift, b, db, y0=0.0)
    W = np.vstack([np.zeros((1, count)), np.cumsum(dW, axis=0)])
    return times, W, np.atleast_1d(terminal)


def simulate_example2(steps: int, T: float, seed: int) -> SdeSample:
    """One draw of the benchmark SDE on a uniform grid of the given size."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    times, W, terminal = _simulate_batch(1, steps, T, seed)
    driver = Path(times, np.column_stack([times, W[:, 0]]))
    return SdeSample(driver=driver, terminal=float(terminal[0]), seed=seed)


def gen_dataset(
    count: int, steps: int, T: float, seed: int, split: float = 0.8
) -> tuple[Dataset, Dataset]:
    """Independent seeded samples, deterministically split train/test.

    Sample i runs on its own counter-based stream (seed, i), so datasets
    with different base seeds never share drivers.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    n_train = int(count * split)
    if n_train == 0 or n_train == count:
        raise ValueError(
            f"split {split} leaves an empty part for count={count}; both must be nonempty"
        )
    times, W, terminal = _simulate_batch(count, steps, T, seed)
    paths = [Path(times, np.column_stack([times, W[:, i]])) for i in range(count)]
    targets = terminal.reshape(-1, 1)
    train = Dataset(paths[:n_train], targets[:n_train], split="train")
    test = Dataset(paths[n_train:], targets[n_train:], split="test")
    return train, test


# ---------------------------------------------------------------------------
# Taylor / log-ODE estimator.
# ---------------------------------------------------------------------------


def taylor_estimate(
    vf: VectorFieldSet,
    y0: np.ndarray,
    segment_signatures: Sequence[TensorElement],
    order: int,
) -> np.ndarray:
    """Paste local M-step Taylor approximations over a coarse partition.

    Each segment contributes sum_{j=1..order} f_circ_j(Y) X^j with X^j the
    segment's signature levels; returns the terminal estimate.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if order > vf.order:
        raise ValueError(
            f"estimator order {order} exceeds the {vf.order} available iterated fields"
        )
    y = np.asarray(y0, dtype=np.float64).reshape(vf.e).copy()
    for sig in segment_signatures:
        if sig.width != vf.d:
            raise ValueError(f"driver width {sig.width} != field width {vf.d}")
        inc = np.zeros(vf.e)
        for j in range(1, order + 1):
            inc += vf.apply(j, y) @ sig.levels[j]
        y = y + inc
    return y


# ---------------------------------------------------------------------------
# Disk format: one CSV per driver plus a manifest.
# ---------------------------------------------------------------------------


def write_dataset(directory, train: Dataset, test: Dataset, meta: dict | None = None) -> None:
    import json
    import os

    from .paths import write_path_csv

    os.makedirs(directory, exist_ok=True)
    samples = []
    counter = 0
    for ds in (train, test):
        for x, y in zip(ds.paths, ds.targets):
            name = f"driver_{counter:05d}.csv"
            write_path_csv(x, os.path.join(directory, name))
            samples.append({"file": name, "y_T": float(y[0]), "split": ds.split})
            counter += 1
    manifest = {"samples": samples}
    manifest.update(meta or {})
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)


def load_dataset(directory) -> tuple[Dataset, Dataset]:
    import json
    import os

    from .paths import read_path_csv

    manifest_path = os.path.join(directory, "manifest.json")
    if not os.path.exists(manifest_path):
        raise FileNotFoundError(f"no dataset manifest at {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    parts: dict = {"train": ([], []), "test": ([], [])}
    for entry in manifest["samples"]:
        x = read_path_csv(os.path.join(directory, entry["file"]))
        paths, ys = parts[entry["split"]]
        paths.append(x)
        ys.append([entry["y_T"]])
    train = Dataset(parts["train"][0], np.asarray(parts["train"][1]), split="train")
    test = Dataset(parts["test"][0], np.asarray(parts["test"][1]), split="test")
    return train, test
