"""Signatures and log-signatures of piecewise-linear paths, and the
log-signature sequence layer with its reverse-mode adjoint.

The signature of a sampled path is the ordered tensor product of the
exponentials of its increments (each linear piece contributes
``exp(increment)``, and concatenation multiplies signatures).  The
log-signature is the tensor logarithm projected onto Lyndon coordinates.

The sequence layer cuts a path along a coarse partition and emits one
log-signature row per segment; its vector-Jacobian product is assembled
from the closed-form adjoints of each stage (increment embedding,
per-increment exponential, left-to-right products, logarithm, and the
triangular Lyndon projection), never from finite differences.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .exceptions import NotLieElementError, ShapeMismatchError
from .lyndon import LieCoords, LyndonBasis, lie_project, lie_project_vjp, logsig_dim, lyndon_words
from .paths import CoarsePartition, Path
from .tensoralg import (
    TensorElement,
    exp_vjp,
    from_increment,
    mul_vjp_left,
    mul_vjp_right,
    log_vjp,
    tensor_exp,
    tensor_log,
    tensor_mul,
    unit,
)

__all__ = [
    "signature",
    "log_signature",
    "signature_sequence",
    "logsig_sequence",
    "logsig_sequence_vjp",
    "LogsigSequence",
    "shuffle",
    "signature_dim",
    "batch_logsig_segments",
    "batch_signature_segments",
]


def signature_dim(width: int, depth: int) -> int:
    """Length of the flattened signature, levels 1..depth (no scalar term)."""
    return sum(width**k for k in range(1, depth + 1))


def _segment_signature(increments: np.ndarray, depth: int) -> TensorElement:
    d = increments.shape[1]
    sig = unit(d, depth)
    for inc in increments:
        sig = tensor_mul(sig, tensor_exp(from_increment(inc, depth)))
    return sig


def signature(x: Path, depth: int) -> TensorElement:
    """Truncated signature of the path's piecewise-linear interpolation.

    A single sample gives the unit element; its dimension depends only on
    (width, depth), never on the number of samples.
    """
    if depth < 1:
        raise ValueError("depth must be positive")
    if x.length == 1:
        return unit(x.width, depth)
    return _segment_signature(np.diff(x.values, axis=0), depth)


def log_signature(x: Path, depth: int) -> LieCoords:
    """Log-signature in Lyndon coordinates: lie_project(log(signature))."""
    return lie_project(tensor_log(signature(x, depth)))


def signature_sequence(
    x: Path, partition: CoarsePartition, depth: int
) -> list[TensorElement]:
    """Per-segment signatures over a coarse partition (segments are closed,
    so boundary samples belong to both neighbours)."""
    partition.validate_for(x)
    incs = np.diff(x.values, axis=0)
    out = []
    for k in range(partition.segments):
        lo, hi = partition.indices[k], partition.indices[k + 1]
        out.append(_segment_signature(incs[lo:hi], depth))
    return out


@dataclass(frozen=True)
class LogsigSequence:
    """Output of the log-signature sequence layer: row k is the degree-M
    log-signature of the path restricted to [u_k, u_{k+1}]."""

    features: np.ndarray
    partition: CoarsePartition
    depth: int
    width: int

    @property
    def segments(self) -> int:
        return self.features.shape[0]


def logsig_sequence(x: Path, partition: CoarsePartition, depth: int) -> LogsigSequence:
    """(N, d_ls) matrix of per-segment log-signatures.

    At depth 1 the rows are exactly the segment increments
    x[u_{k+1}] - x[u_k] (computed as direct differences, the reduction to
    a plain increment-fed recurrent model).
    """
    partition.validate_for(x)
    idx = partition.indices
    if depth == 1:
        feats = x.values[idx[1:]] - x.values[idx[:-1]]
    else:
        rows = [
            lie_project(
                tensor_log(_segment_signature(np.diff(x.values[lo : hi + 1], axis=0), depth))
            ).coords
            for lo, hi in zip(idx[:-1], idx[1:])
        ]
        feats = np.vstack(rows)
    return LogsigSequence(feats, partition, depth, x.width)


def logsig_sequence_vjp(
    x: Path, partition: CoarsePartition, depth: int, upstream: np.ndarray
) -> np.ndarray:
    """Gradient of <upstream, logsig_sequence(x)> with respect to x.values.

    A sample interior to segment k only receives contributions from row k;
    a boundary sample u_k accumulates rows k-1 and k.  Samples outside the
    supported segments of a sparse upstream get exact zeros.
    """
    partition.validate_for(x)
    d_ls = logsig_dim(x.width, depth)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (partition.segments, d_ls):
        raise ShapeMismatchError(
            f"upstream has shape {upstream.shape}, expected ({partition.segments}, {d_ls})"
        )
    grad = np.zeros_like(x.values)
    idx = partition.indices
    for k in range(partition.segments):
        rowbar = upstream[k]
        if not np.any(rowbar):
            continue
        lo, hi = idx[k], idx[k + 1]
        seg_grad = _segment_vjp(x.values[lo : hi + 1], depth, rowbar)
        grad[lo : hi + 1] += seg_grad
    return grad


def _segment_vjp(values: np.ndarray, depth: int, rowbar: np.ndarray) -> np.ndarray:
    """Reverse pass through one segment's feature computation."""
    d = values.shape[1]
    incs = np.diff(values, axis=0)
    m = incs.shape[0]
    if depth == 1:
        g = np.zeros_like(values)
        g[-1] += rowbar
        g[0] -= rowbar
        return g
    elems = [from_increment(inc, depth) for inc in incs]
    exps = [tensor_exp(a) for a in elems]
    prefixes = [unit(d, depth)]
    for e in exps:
        prefixes.append(tensor_mul(prefixes[-1], e))
    lbar = lie_project_vjp(d, depth, rowbar)
    sbar = log_vjp(prefixes[-1], lbar)
    grad = np.zeros_like(values)
    for i in range(m - 1, -1, -1):
        ebar = mul_vjp_right(sbar, prefixes[i])
        sbar = mul_vjp_left(sbar, exps[i])
        dbar = exp_vjp(elems[i], ebar).levels[1]
        grad[i + 1] += dbar
        grad[i] -= dbar
    return grad


# ---------------------------------------------------------------------------
# Shuffle products (test utility for the linear-functional algebra identity).
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def shuffle(u: tuple, v: tuple) -> dict:
    """All riffle interleavings of two words, with multiplicities."""
    u, v = tuple(u), tuple(v)
    if not u:
        return {v: 1}
    if not v:
        return {u: 1}
    out: dict[tuple, int] = {}
    for w, c in shuffle(u[:-1], v).items():
        key = w + (u[-1],)
        out[key] = out.get(key, 0) + c
    for w, c in shuffle(u, v[:-1]).items():
        key = w + (v[-1],)
        out[key] = out.get(key, 0) + c
    return out


# ---------------------------------------------------------------------------
# Vectorized evaluation across many increments / samples.
#
# Same math as above (tensor products of increment exponentials, then log
# and Lyndon projection) but with the Chen products reduced pairwise in a
# balanced tree so whole batches move through numpy at once.  Results agree
# with the sequential functions to roundoff; bit-exactness is only promised
# by the sequential path.
# ---------------------------------------------------------------------------


def _batch_mul(a: list, b: list, d: int, depth: int) -> list:
    out = []
    for k in range(depth + 1):
        acc = None
        for i in range(k + 1):
            ai, bj = a[i], b[k - i]
            if i == 0:
                term = ai * bj
            elif i == k:
                term = ai * bj
            else:
                term = np.einsum("...i,...j->...ij", ai, bj).reshape(
                    np.broadcast_shapes(ai.shape[:-1], bj.shape[:-1]) + (d**k,)
                )
            acc = term if acc is None else acc + term
        out.append(acc)
    return out


def _batch_exp_of_increments(incs: np.ndarray, depth: int) -> list:
    """Exponentials of pure level-1 elements: level k = inc^(x)k / k!."""
    d = incs.shape[-1]
    levels = [np.ones(incs.shape[:-1] + (1,)), incs.astype(np.float64, copy=True)]
    for k in range(2, depth + 1):
        nxt = np.einsum("...i,...j->...ij", levels[-1], incs).reshape(
            incs.shape[:-1] + (d**k,)
        )
        levels.append(nxt / k)
    return levels


def _tree_chen(levels: list, d: int, depth: int) -> list:
    """Reduce the second-to-last axis by repeated pairwise tensor products."""
    m = levels[1].shape[-2]
    while m > 1:
        half = m // 2
        a = [lvl[..., 0 : 2 * half : 2, :] for lvl in levels]
        b = [lvl[..., 1 : 2 * half : 2, :] for lvl in levels]
        prod = _batch_mul(a, b, d, depth)
        if m % 2:
            levels = [
                np.concatenate([p, lvl[..., -1:, :]], axis=-2)
                for p, lvl in zip(prod, levels)
            ]
            m = half + 1
        else:
            levels = prod
            m = half
    return [lvl[..., 0, :] for lvl in levels]


def _batch_log(s_levels: list, d: int, depth: int) -> list:
    t = [lvl.copy() for lvl in s_levels]
    t[0] = np.zeros_like(t[0])
    powers = [t]
    for _ in range(2, depth + 1):
        powers.append(_batch_mul(powers[-1], t, d, depth))
    out = [np.zeros_like(lvl) for lvl in s_levels]
    for n, p in enumerate(powers, start=1):
        c = (-1.0) ** (n - 1) / n
        for k in range(depth + 1):
            out[k] = out[k] + c * p[k]
    return out


def _batch_project(lie_levels: list, basis: LyndonBasis, tolerance: float = 1e-8) -> np.ndarray:
    lead = lie_levels[1].shape[:-1]
    out = np.empty(lead + (basis.dim,))
    pos = 0
    for n in range(1, basis.depth + 1):
        r = lie_levels[n].copy()
        while pos < basis.dim and len(basis.words[pos]) == n:
            c = r[..., basis._self_index[pos]]
            out[..., pos] = c
            idx, coeff = basis.expansion(pos)
            r[..., idx] -= c[..., None] * coeff
            pos += 1
        worst = float(np.max(np.abs(r))) if r.size else 0.0
        if worst > tolerance:
            raise NotLieElementError(
                f"batch projection residual {worst:.3e} exceeds {tolerance:.1e}"
            )
    return out


def _segment_tensor_levels(values: np.ndarray, seg_indices: np.ndarray, depth: int) -> list:
    """Per-segment signature levels for a (B, n, d) stack of aligned paths.

    Returns levels shaped (B, N, d**k).  Batches are chunked so the
    intermediate increment exponentials stay within a modest memory budget.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 2:
        values = values[None]
    B, n, d = values.shape
    seg_indices = np.asarray(seg_indices, dtype=np.int64)
    n_seg = seg_indices.size - 1
    widest = int(np.max(np.diff(seg_indices)))
    per_sample = widest * sum(d**k for k in range(depth + 1)) * 8 * 3
    chunk = max(1, int(32e6 // max(per_sample, 1)))
    out = [np.empty((B, n_seg, d**k)) for k in range(depth + 1)]
    incs_all = np.diff(values, axis=1)
    for lo in range(0, B, chunk):
        hi = min(B, lo + chunk)
        for s in range(n_seg):
            a, b = seg_indices[s], seg_indices[s + 1]
            exps = _batch_exp_of_increments(incs_all[lo:hi, a:b], depth)
            sig = _tree_chen(exps, d, depth)
            for k in range(depth + 1):
                out[k][lo:hi, s] = sig[k]
    return out


def batch_signature_segments(values: np.ndarray, seg_indices, depth: int) -> np.ndarray:
    """Flattened per-segment signatures (levels 1..depth) for aligned paths.

    values: (B, n, d) or (n, d); returns (B, N, sig_dim).
    """
    levels = _segment_tensor_levels(values, seg_indices, depth)
    return np.concatenate(levels[1:], axis=-1)


def batch_logsig_segments(values: np.ndarray, seg_indices, depth: int) -> np.ndarray:
    """Per-segment log-signature coordinates for aligned paths.

    values: (B, n, d) or (n, d); returns (B, N, d_ls).  Depth 1 reduces to
    direct segment increments.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 2:
        values = values[None]
    seg_indices = np.asarray(seg_indices, dtype=np.int64)
    if depth == 1:
        return values[:, seg_indices[1:]] - values[:, seg_indices[:-1]]
    d = values.shape[-1]
    levels = _segment_tensor_levels(values, seg_indices, depth)
    basis = lyndon_words(d, depth)
    return _batch_project(_batch_log(levels, d, depth), basis)
