"""Minimal reverse-mode trainable stack.

One plain recurrent cell (h_t = sigma(U x_t + W h_{t-1}), linear readout),
composed with the log-signature sequence layer and optional path
transformations (trainable pointwise embedding, time incorporation,
accumulation).  Four model variants share the pipeline:

* ``logsig_rnn``: per-segment log-signatures into the RNN;
* ``rnn0``: the depth-1 reduction, i.e. the RNN fed raw segment increments;
* ``sig_rnn``: per-segment flattened signatures (no scalar term) into the RNN;
* ``sig_olr``: one linear map on the whole-path flattened signature.

Training is single-threaded minibatch Adam on MSE, bitwise deterministic
for a fixed seed.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .exceptions import ShapeMismatchError, TrainingDivergedError
from .features import (
    batch_logsig_segments,
    batch_signature_segments,
    logsig_sequence,
    logsig_sequence_vjp,
    signature,
    signature_dim,
)
from .lyndon import logsig_dim
from .paths import Path, make_partition

__all__ = [
    "ModelConfig",
    "RnnParams",
    "LinearParams",
    "Dataset",
    "TrainingMetrics",
    "rnn_forward",
    "logsig_rnn_forward",
    "sig_olr_forward",
    "train",
    "predict",
    "mse",
    "init_params",
    "save_checkpoint",
    "load_checkpoint",
]

MODEL_TAGS = ("logsig_rnn", "rnn0", "sig_olr", "sig_rnn")


@dataclass
class ModelConfig:
    """Hyperparameters of one model run."""

    depth: int = 2
    segments: int = 4
    hidden: int = 64
    transforms: tuple = ()
    model: str = "logsig_rnn"
    output_dim: int = 1
    seed: int = 0
    learning_rate: float = 1e-3
    epochs: int = 500
    batch_size: int = 64
    append_starts: bool = False
    activation: str = "tanh"

    def __post_init__(self):
        if self.depth < 1 or self.segments < 1 or self.hidden < 1:
            raise ValueError("depth, segments and hidden must be >= 1")
        if self.model not in MODEL_TAGS:
            raise ValueError(f"unknown model tag {self.model!r}, known: {MODEL_TAGS}")
        if self.activation not in ("tanh", "identity"):
            raise ValueError("activation must be 'tanh' or 'identity'")
        self.transforms = tuple(self.transforms)
        for t in self.transforms:
            name = t.split(":")[0]
            if name not in ("embed", "time_incorporate", "accumulate"):
                raise ValueError(f"unknown transform {t!r}")

    @property
    def feature_depth(self) -> int:
        # rnn0 is the depth-1 reduction regardless of the configured depth
        return 1 if self.model == "rnn0" else self.depth


@dataclass
class RnnParams:
    """Weights of the recurrent models: U (d_in x H), W (H x H), V (H x e),
    output bias b, fixed zero initial state, plus the optional trainable
    path-embedding matrix."""

    U: np.ndarray
    W: np.ndarray
    V: np.ndarray
    b: np.ndarray
    h0: np.ndarray
    activation: str = "tanh"
    embed: Optional[np.ndarray] = None

    def trainable(self) -> dict:
        out = {"U": self.U, "W": self.W, "V": self.V, "b": self.b}
        if self.embed is not None:
            out["embed"] = self.embed
        return out


@dataclass
class LinearParams:
    """Weights of the signature linear model: y = A @ features + b."""

    A: np.ndarray
    b: np.ndarray
    embed: Optional[np.ndarray] = None

    def trainable(self) -> dict:
        out = {"A": self.A, "b": self.b}
        if self.embed is not None:
            out["embed"] = self.embed
        return out


@dataclass
class Dataset:
    """Aligned paths and targets for one split."""

    paths: list
    targets: np.ndarray
    split: str = "train"

    def __post_init__(self):
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=np.float64))
        if self.targets.shape[0] == 1 and len(self.paths) != 1:
            self.targets = self.targets.T
        if len(self.paths) != self.targets.shape[0]:
            raise ShapeMismatchError(
                f"{len(self.paths)} paths vs {self.targets.shape[0]} targets"
            )

    def __len__(self) -> int:
        return len(self.paths)


@dataclass
class TrainingMetrics:
    history: list = field(default_factory=list)  # rows: (epoch, train_mse, test_mse, seconds)
    final_train_mse: float = float("nan")
    final_test_mse: float = float("nan")
    wall_clock_seconds: float = 0.0

    def to_csv(self, stream) -> None:
        close = False
        if isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__"):
            stream = open(stream, "w")
            close = True
        try:
            stream.write("epoch,train_mse,test_mse,seconds\n")
            for epoch, tr, te, sec in self.history:
                te_s = repr(float(te)) if te == te else ""
                stream.write(f"{epoch},{float(tr)!r},{te_s},{sec:.3f}\n")
        finally:
            if close:
                stream.close()


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    return float(np.mean((pred - target) ** 2))


# ---------------------------------------------------------------------------
# Path transforms (applied to the value matrix before the feature stage).
# ---------------------------------------------------------------------------


def _parse_embed_width(token: str) -> int:
    try:
        return int(token.split(":", 1)[1])
    except (IndexError, ValueError):
        raise ValueError(f"embed transform must look like 'embed:K', got {token!r}")


def transformed_width(cfg: ModelConfig, input_width: int) -> int:
    w = input_width
    for t in cfg.transforms:
        if t.startswith("embed"):
            w = _parse_embed_width(t)
        elif t == "time_incorporate":
            w += 1
    return w


def _apply_transforms(cfg: ModelConfig, embed, x: Path):
    """Returns (value matrix after transforms, per-stage cache for the vjp)."""
    vals = x.values
    cache = []
    for t in cfg.transforms:
        if t.startswith("embed"):
            cache.append(("embed", vals))
            vals = vals @ embed
        elif t == "time_incorporate":
            cache.append(("time_incorporate", None))
            span = x.times[-1] - x.times[0]
            tcol = (x.times - x.times[0]) / span if span > 0 else np.zeros(x.length)
            vals = np.column_stack([tcol, vals])
        elif t == "accumulate":
            cache.append(("accumulate", None))
            vals = np.cumsum(vals, axis=0)
    return vals, cache


def _transforms_vjp(cache, gbar: np.ndarray):
    """Backward through the transform pipeline; returns grad for embed (or None)."""
    embed_grad = None
    for name, saved in reversed(cache):
        if name == "accumulate":
            gbar = np.cumsum(gbar[::-1], axis=0)[::-1]
        elif name == "time_incorporate":
            gbar = gbar[:, 1:]
        elif name == "embed":
            embed_grad = saved.T @ gbar
            # no gradient past the raw input values
    return embed_grad


# ---------------------------------------------------------------------------
# Recurrent cell.
# ---------------------------------------------------------------------------


def _rnn_forward_batch(params: RnnParams, X: np.ndarray):
    """X: (B, T, d_in) -> (outputs (B, e), hidden states [h_0..h_T])."""
    B, T, _ = X.shape
    h = np.zeros((B, params.W.shape[0]))
    hs = [h]
    tanh = params.activation == "tanh"
    for t in range(T):
        z = X[:, t] @ params.U + h @ params.W
        h = np.tanh(z) if tanh else z
        hs.append(h)
    return hs[-1] @ params.V + params.b, hs


def _rnn_backward_batch(params: RnnParams, X, hs, dout, need_dx: bool):
    B, T, _ = X.shape
    tanh = params.activation == "tanh"
    grads = {
        "U": np.zeros_like(params.U),
        "W": np.zeros_like(params.W),
        "V": hs[-1].T @ dout,
        "b": dout.sum(axis=0),
    }
    dX = np.zeros_like(X) if need_dx else None
    dh = dout @ params.V.T
    for t in range(T - 1, -1, -1):
        dz = dh * (1.0 - hs[t + 1] ** 2) if tanh else dh
        grads["U"] += X[:, t].T @ dz
        grads["W"] += hs[t].T @ dz
        if need_dx:
            dX[:, t] = dz @ params.U.T
        dh = dz @ params.W.T
    return grads, dX


def rnn_forward(params: RnnParams, seq: np.ndarray) -> np.ndarray:
    """Run the cell over one sequence (T, d_in); returns the final output."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[1] != params.U.shape[0]:
        raise ShapeMismatchError(
            f"sequence has shape {seq.shape}, expected (T, {params.U.shape[0]})"
        )
    out, _ = _rnn_forward_batch(params, seq[None])
    return out[0]


# ---------------------------------------------------------------------------
# Feature stage.
# ---------------------------------------------------------------------------


def _sequence_features(cfg: ModelConfig, embed, x: Path) -> np.ndarray:
    """(T, F) feature matrix for the recurrent models, single path."""
    vals, _ = _apply_transforms(cfg, embed, x)
    xt = Path(x.times, vals)
    D = make_partition(xt, cfg.segments)
    depth = cfg.feature_depth
    if cfg.model in ("logsig_rnn", "rnn0"):
        feats = logsig_sequence(xt, D, depth).features
    elif cfg.model == "sig_rnn":
        feats = batch_signature_segments(vals, D.indices, depth)[0]
    else:
        raise ValueError(f"{cfg.model} has no sequence features")
    if cfg.append_starts:
        feats = np.hstack([feats, vals[D.indices[:-1]]])
    return feats


def feature_dim(cfg: ModelConfig, input_width: int) -> int:
    w = transformed_width(cfg, input_width)
    if cfg.model in ("logsig_rnn", "rnn0"):
        dim = logsig_dim(w, cfg.feature_depth)
    else:
        dim = signature_dim(w, cfg.feature_depth)
    if cfg.append_starts and cfg.model != "sig_olr":
        dim += w
    return dim


def logsig_rnn_forward(cfg: ModelConfig, params: RnnParams, x: Path) -> np.ndarray:
    """Full forward pass of a recurrent model variant on one path."""
    return rnn_forward(params, _sequence_features(cfg, params.embed, x))


def sig_olr_forward(params: LinearParams, x: Path, depth: int) -> np.ndarray:
    """Linear model on the whole-path flattened signature."""
    vals = x.values if params.embed is None else x.values @ params.embed
    feats = signature(Path(x.times, vals), depth).flatten()
    return feats @ params.A + params.b


# ---------------------------------------------------------------------------
# Dataset-level feature precomputation (static pipelines only).
# ---------------------------------------------------------------------------


def _has_trainable_transform(cfg: ModelConfig) -> bool:
    return any(t.startswith("embed") for t in cfg.transforms)


def compute_dataset_features(cfg: ModelConfig, paths, embed=None) -> np.ndarray:
    """Stacked features for many paths: (B, T, F), or (B, F) for sig_olr.

    Paths are grouped by (length, partition) so each group runs through the
    vectorized feature kernels in one shot.
    """
    B = len(paths)
    depth = cfg.feature_depth
    groups: dict = {}
    transformed = []
    for i, x in enumerate(paths):
        vals, _ = _apply_transforms(cfg, embed, x)
        transformed.append(vals)
        if cfg.model == "sig_olr":
            key = (x.length,)
            seg = np.array([0, x.length - 1])
        else:
            D = make_partition(Path(x.times, vals), cfg.segments)
            seg = D.indices
            key = (x.length, tuple(seg))
        groups.setdefault(key, (seg, []))[1].append(i)
    out = None
    for seg, members in groups.values():
        stack = np.stack([transformed[i] for i in members])
        if cfg.model in ("logsig_rnn", "rnn0"):
            feats = batch_logsig_segments(stack, seg, depth)
        else:
            feats = batch_signature_segments(stack, seg, depth)
        if cfg.append_starts and cfg.model != "sig_olr":
            feats = np.concatenate([feats, stack[:, seg[:-1]]], axis=2)
        if cfg.model == "sig_olr":
            feats = feats[:, 0]
        if out is None:
            out = np.empty((B,) + feats.shape[1:])
        out[members] = feats
    return out


# ---------------------------------------------------------------------------
# Initialization, optimizer, training loop.
# ---------------------------------------------------------------------------


def _glorot(rng, fan_in, fan_out):
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


def init_params(cfg: ModelConfig, input_width: int, rng=None):
    """Seeded uniform(-a, a) initialization with a = sqrt(6 / (fan_in + fan_out))."""
    rng = rng or np.random.default_rng(cfg.seed)
    embed = None
    for t in cfg.transforms:
        if t.startswith("embed"):
            embed = _glorot(rng, input_width, _parse_embed_width(t))
            break
    F = feature_dim(cfg, input_width)
    e = cfg.output_dim
    if cfg.model == "sig_olr":
        return LinearParams(A=_glorot(rng, F, e), b=np.zeros(e), embed=embed)
    H = cfg.hidden
    return RnnParams(
        U=_glorot(rng, F, H),
        W=_glorot(rng, H, H),
        V=_glorot(rng, H, e),
        b=np.zeros(e),
        h0=np.zeros(H),
        activation=cfg.activation,
        embed=embed,
    )


class _Adam:
    def __init__(self, arrays: dict, lr: float, betas=(0.9, 0.999), eps=1e-8):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in arrays.items()}

    def step(self, arrays: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            arrays[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def _forward_static(cfg, params, feats):
    if cfg.model == "sig_olr":
        return feats @ params.A + params.b, None
    return _rnn_forward_batch(params, feats)


def _backward_static(cfg, params, feats, aux, dout):
    if cfg.model == "sig_olr":
        return {"A": feats.T @ dout, "b": dout.sum(axis=0)}
    grads, _ = _rnn_backward_batch(params, feats, aux, dout, need_dx=False)
    return grads


def _batch_forward_backward_dynamic(cfg, params, paths, targets):
    """Forward+backward when the embedding makes features parameter-dependent.

    Gradients reach the embedding through the log-signature layer's
    vector-Jacobian product, one path at a time.
    """
    B = len(paths)
    feats = []
    caches = []
    for x in paths:
        vals, cache = _apply_transforms(cfg, params.embed, x)
        xt = Path(x.times, vals)
        D = make_partition(xt, cfg.segments)
        depth = cfg.feature_depth
        if cfg.model in ("logsig_rnn", "rnn0"):
            f = logsig_sequence(xt, D, depth).features
        elif cfg.model == "sig_rnn":
            f = batch_signature_segments(vals, D.indices, depth)[0]
        else:  # sig_olr
            f = signature(xt, depth).flatten()[None, :]
        if cfg.append_starts and cfg.model != "sig_olr":
            f = np.hstack([f, vals[D.indices[:-1]]])
        feats.append(f)
        caches.append((xt, D, cache))
    T = {f.shape[0] for f in feats}
    if len(T) != 1:
        raise ShapeMismatchError("paths produced ragged feature sequences")
    X = np.stack(feats)
    if cfg.model == "sig_olr":
        pred = X[:, 0] @ params.A + params.b
        loss = mse(pred, targets)
        dout = 2.0 * (pred - targets) / pred.size
        grads = {"A": X[:, 0].T @ dout, "b": dout.sum(axis=0)}
        dX = (dout @ params.A.T)[:, None, :]
    else:
        pred, hs = _rnn_forward_batch(params, X)
        loss = mse(pred, targets)
        dout = 2.0 * (pred - targets) / pred.size
        grads, dX = _rnn_backward_batch(params, X, hs, dout, need_dx=True)
    embed_grad = np.zeros_like(params.embed)
    depth = cfg.feature_depth
    for b in range(B):
        xt, D, cache = caches[b]
        gX = dX[b]
        w = xt.width
        if cfg.append_starts and cfg.model != "sig_olr":
            gfeat, gstart = gX[:, :-w], gX[:, -w:]
        else:
            gfeat, gstart = gX, None
        if cfg.model in ("logsig_rnn", "rnn0"):
            gvals = logsig_sequence_vjp(xt, D, depth, gfeat)
        elif cfg.model == "sig_rnn":
            gvals = _signature_segments_vjp(xt, D, depth, gfeat)
        else:
            gvals = _signature_segments_vjp(
                xt, CoarsePartitionWhole(xt), depth, gfeat
            )
        if gstart is not None:
            gvals = gvals.copy()
            gvals[D.indices[:-1]] += gstart
        g = _transforms_vjp(cache, gvals)
        if g is not None:
            embed_grad += g
    grads["embed"] = embed_grad
    return loss, pred, grads


def _signature_segments_vjp(x: Path, D, depth: int, upstream: np.ndarray) -> np.ndarray:
    """Adjoint of per-segment flattened signatures via finite composition of
    the same stage adjoints used by the log-signature layer (no log/project)."""
    from .tensoralg import TensorElement, from_increment, tensor_exp, tensor_mul
    from .tensoralg import exp_vjp, mul_vjp_left, mul_vjp_right, unit

    grad = np.zeros_like(x.values)
    idx = D.indices
    d = x.width
    for k in range(len(idx) - 1):
        lo, hi = idx[k], idx[k + 1]
        rowbar = upstream[k]
        if not np.any(rowbar):
            continue
        incs = np.diff(x.values[lo : hi + 1], axis=0)
        elems = [from_increment(inc, depth) for inc in incs]
        exps = [tensor_exp(a) for a in elems]
        prefixes = [unit(d, depth)]
        for e in exps:
            prefixes.append(tensor_mul(prefixes[-1], e))
        # unflatten upstream into level blocks (levels 1..depth)
        levels = [np.zeros(1)]
        off = 0
        for kk in range(1, depth + 1):
            levels.append(rowbar[off : off + d**kk].astype(np.float64))
            off += d**kk
        sbar = TensorElement(d, depth, levels)
        for i in range(len(incs) - 1, -1, -1):
            ebar = mul_vjp_right(sbar, prefixes[i])
            sbar = mul_vjp_left(sbar, exps[i])
            dbar = exp_vjp(elems[i], ebar).levels[1]
            grad[lo + i + 1] += dbar
            grad[lo + i] -= dbar
    return grad


class CoarsePartitionWhole:
    """Trivial one-segment partition helper for whole-path adjoints."""

    def __init__(self, x: Path):
        self.indices = np.array([0, x.length - 1])


def train(cfg: ModelConfig, train_data: Dataset, test_data: Optional[Dataset] = None):
    """Minibatch Adam on MSE.  Returns (params, TrainingMetrics).

    Deterministic for a fixed config seed.  When no trainable transform
    precedes the feature stage, features are precomputed once for the whole
    dataset; otherwise every step backpropagates through the log-signature
    layer into the embedding.
    """
    if len(train_data) == 0:
        raise ValueError("training split is empty")
    input_width = train_data.paths[0].width
    e = train_data.targets.shape[1]
    if e != cfg.output_dim:
        cfg = ModelConfig(**{**asdict(cfg), "output_dim": e})
    rng = np.random.default_rng(cfg.seed)
    params = init_params(cfg, input_width, rng)
    dynamic = _has_trainable_transform(cfg)
    y = train_data.targets
    n = len(train_data)
    bs = min(cfg.batch_size, n)

    feats = test_feats = None
    if not dynamic:
        feats = compute_dataset_features(cfg, train_data.paths)
        if test_data is not None and len(test_data):
            test_feats = compute_dataset_features(cfg, test_data.paths)

    arrays = params.trainable()
    opt = _Adam(arrays, cfg.learning_rate)
    metrics = TrainingMetrics()
    t0 = time.perf_counter()
    train_mse = float("nan")
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        sq_sum = 0.0
        for lo in range(0, n, bs):
            take = perm[lo : lo + bs]
            yb = y[take]
            if dynamic:
                loss, pred, grads = _batch_forward_backward_dynamic(
                    cfg, params, [train_data.paths[i] for i in take], yb
                )
            else:
                Xb = feats[take]
                pred, aux = _forward_static(cfg, params, Xb)
                loss = mse(pred, yb)
                dout = 2.0 * (pred - yb) / pred.size
                grads = _backward_static(cfg, params, Xb, aux, dout)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            opt.step(arrays, grads)
            sq_sum += loss * len(take)
        train_mse = sq_sum / n
        test_mse = float("nan")
        if test_data is not None and len(test_data):
            test_pred = _predict_internal(cfg, params, test_data.paths, test_feats)
            test_mse = mse(test_pred, test_data.targets)
        metrics.history.append(
            (epoch, train_mse, test_mse, time.perf_counter() - t0)
        )
    metrics.wall_clock_seconds = time.perf_counter() - t0
    metrics.final_train_mse = train_mse
    metrics.final_test_mse = metrics.history[-1][2] if metrics.history else float("nan")
    return params, metrics


def _predict_internal(cfg, params, paths, feats=None):
    if feats is None:
        feats = compute_dataset_features(cfg, paths, embed=getattr(params, "embed", None))
    pred, _ = _forward_static(cfg, params, feats)
    return pred


def predict(cfg: ModelConfig, params, paths) -> np.ndarray:
    """Model outputs for a list of paths, shape (B, e)."""
    return _predict_internal(cfg, params, paths)


# ---------------------------------------------------------------------------
# Checkpoints.
# ---------------------------------------------------------------------------


def save_checkpoint(stream, cfg: ModelConfig, params) -> None:
    from . import __version__

    weights = {k: v.tolist() for k, v in params.trainable().items()}
    kind = "linear" if isinstance(params, LinearParams) else "rnn"
    doc = {
        "version": __version__,
        "kind": kind,
        "config": asdict(cfg),
        "weights": weights,
    }
    close = False
    if isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__"):
        stream = open(stream, "w")
        close = True
    try:
        json.dump(doc, stream, indent=1)
    finally:
        if close:
            stream.close()


def load_checkpoint(stream):
    close = False
    if isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__"):
        stream = open(stream, "r")
        close = True
    try:
        doc = json.load(stream)
    finally:
        if close:
            stream.close()
    cfg = ModelConfig(**doc["config"])
    w = {k: np.asarray(v, dtype=np.float64) for k, v in doc["weights"].items()}
    embed = w.get("embed")
    if doc["kind"] == "linear":
        params = LinearParams(A=w["A"], b=w["b"], embed=embed)
    else:
        params = RnnParams(
            U=w["U"],
            W=w["W"],
            V=w["V"],
            b=w["b"],
            h0=np.zeros(w["W"].shape[0]),
            activation=cfg.activation,
            embed=embed,
        )
    return cfg, params
