"""Benchmark runner: train the four model variants on SDE datasets under
the three input scenarios (full-rate, downsampled, downsampled with
missing points) and tabulate accuracy and wall-clock cost."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from . import nn
from .nn import Dataset, ModelConfig
from .paths import downsample, drop_points
from .sde import load_dataset

__all__ = ["ExperimentSpec", "run_experiment", "write_results", "plot_metrics"]

SCENARIOS = ("high_frequency", "downsample", "missing")


@dataclass
class ExperimentSpec:
    data_dir: str
    out_dir: str = "results"
    scenario: str = "high_frequency"
    downsample_to: int | None = None
    drop_ratio: float | None = None
    seeds: tuple = (0,)
    normalize_targets: bool = True
    models: list = field(default_factory=list)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}, known: {SCENARIOS}")
        # scenario parameters are present exactly when the scenario uses them
        needs_down = self.scenario in ("downsample", "missing")
        if needs_down and self.downsample_to is None:
            raise ValueError(f"scenario {self.scenario!r} requires downsample_to")
        if not needs_down and self.downsample_to is not None:
            raise ValueError("downsample_to only applies to downsample/missing scenarios")
        if self.scenario == "missing" and self.drop_ratio is None:
            raise ValueError("scenario 'missing' requires drop_ratio")
        if self.scenario != "missing" and self.drop_ratio is not None:
            raise ValueError("drop_ratio only applies to the missing scenario")
        self.seeds = tuple(int(s) for s in self.seeds)
        parsed = []
        for m in self.models:
            parsed.append(m if isinstance(m, ModelConfig) else ModelConfig(**m))
        self.models = parsed

    @classmethod
    def from_json(cls, stream) -> "ExperimentSpec":
        if isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__"):
            with open(stream) as fh:
                doc = json.load(fh)
        else:
            doc = json.load(stream)
        return cls(**doc)


def _apply_scenario(spec: ExperimentSpec, ds: Dataset, seed_base: int) -> Dataset:
    paths = ds.paths
    if spec.scenario in ("downsample", "missing"):
        paths = [downsample(x, spec.downsample_to) for x in paths]
    if spec.scenario == "missing" and spec.drop_ratio > 0:
        paths = [
            drop_points(x, spec.drop_ratio, seed=seed_base + i)
            for i, x in enumerate(paths)
        ]
    return Dataset(paths, ds.targets, split=ds.split)


def _feature_shape(cfg: ModelConfig, width: int) -> str:
    dim = nn.feature_dim(cfg, width)
    if cfg.model == "sig_olr":
        return str(dim)
    return f"({cfg.segments},{dim})"


def run_experiment(spec: ExperimentSpec):
    """Train every configured model on the scenario data, one row per
    (model, seed): feature dims, test MSE, training wall-clock."""
    train_raw, test_raw = load_dataset(spec.data_dir)
    train_ds = _apply_scenario(spec, train_raw, seed_base=1_000_003)
    test_ds = _apply_scenario(spec, test_raw, seed_base=2_000_003)

    y_train = train_raw.targets
    if spec.normalize_targets:
        mean = y_train.mean(axis=0)
        std = y_train.std(axis=0)
        std[std == 0] = 1.0
        train_ds = Dataset(train_ds.paths, (train_ds.targets - mean) / std, "train")
        test_ds = Dataset(test_ds.paths, (test_ds.targets - mean) / std, "test")

    rows = []
    histories = {}
    width = train_ds.paths[0].width
    for m_idx, cfg in enumerate(spec.models):
        for seed in spec.seeds:
            run_cfg = ModelConfig(**{**asdict(cfg), "seed": seed})
            params, metrics = nn.train(run_cfg, train_ds, test_ds)
            key = f"{spec.scenario}_m{m_idx}_{run_cfg.model}_seed{seed}"
            histories[key] = metrics
            rows.append(
                {
                    "scenario": spec.scenario,
                    "model": run_cfg.model,
                    "seed": seed,
                    "feature_dim": _feature_shape(run_cfg, width),
                    "test_mse": metrics.final_test_mse,
                    "train_seconds": round(metrics.wall_clock_seconds, 3),
                }
            )
    return rows, histories


RESULT_COLUMNS = ("scenario", "model", "seed", "feature_dim", "test_mse", "train_seconds")


def write_results(rows, out_dir: str, histories=None) -> str:
    import csv

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "results.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for r in rows:
            writer.writerow(
                [repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in RESULT_COLUMNS]
            )
    widths = {c: max(len(c), *(len(str(r[c])) for r in rows)) if rows else len(c) for c in RESULT_COLUMNS}
    with open(os.path.join(out_dir, "table.txt"), "w") as fh:
        fh.write("  ".join(c.ljust(widths[c]) for c in RESULT_COLUMNS).rstrip() + "\n")
        for r in rows:
            cells = []
            for c in RESULT_COLUMNS:
                v = r[c]
                cells.append((f"{v:.3e}" if c == "test_mse" else str(v)).ljust(widths[c]))
            fh.write("  ".join(cells).rstrip() + "\n")
    if histories:
        run_dir = os.path.join(out_dir, "runs")
        os.makedirs(run_dir, exist_ok=True)
        for key, metrics in histories.items():
            metrics.to_csv(os.path.join(run_dir, key + ".csv"))
    return csv_path


def read_results(csv_path: str):
    import csv

    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for row in reader:
            row["test_mse"] = float(row["test_mse"])
            row["train_seconds"] = float(row["train_seconds"])
            rows.append(row)
    return rows


def _configure_deterministic_svg():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "logsigrnn"
    return matplotlib


def plot_metrics(rows, out_dir: str, run_dir: str | None = None) -> list:
    """Scenario bar charts (test MSE per model) and loss curves as SVG,
    plus the raw CSV.  Regenerating from the same inputs is byte-stable."""
    os.makedirs(out_dir, exist_ok=True)
    written = [write_results(rows, out_dir)]
    if not rows:
        return written
    _configure_deterministic_svg()
    import matplotlib.pyplot as plt

    scenarios = sorted({r["scenario"] for r in rows})
    models = sorted({r["model"] for r in rows})
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / max(len(models), 1)
    for j, model in enumerate(models):
        xs, ys = [], []
        for i, sc in enumerate(scenarios):
            vals = [r["test_mse"] for r in rows if r["scenario"] == sc and r["model"] == model]
            if vals:
                xs.append(i + j * width)
                ys.append(float(np.mean(vals)))
        ax.bar(xs, ys, width=width, label=model)
    ax.set_yscale("log")
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(scenarios))])
    ax.set_xticklabels(scenarios)
    ax.set_ylabel("test MSE")
    ax.legend()
    bar_path = os.path.join(out_dir, "scenario_mse.svg")
    fig.savefig(bar_path, metadata={"Date": None})
    plt.close(fig)
    written.append(bar_path)

    if run_dir and os.path.isdir(run_dir):
        fig, ax = plt.subplots(figsize=(7, 4))
        plotted = False
        for name in sorted(os.listdir(run_dir)):
            if not name.endswith(".csv"):
                continue
            data = np.genfromtxt(
                os.path.join(run_dir, name), delimiter=",", names=True
            )
            if data.size == 0:
                continue
            ax.plot(
                np.atleast_1d(data["epoch"]),
                np.atleast_1d(data["train_mse"]),
                label=name[:-4],
            )
            plotted = True
        if plotted:
            ax.set_yscale("log")
            ax.set_xlabel("epoch")
            ax.set_ylabel("train MSE")
            ax.legend(fontsize=6)
            curve_path = os.path.join(out_dir, "loss_curves.svg")
            fig.savefig(curve_path, metadata={"Date": None})
            written.append(curve_path)
        plt.close(fig)
    return written
