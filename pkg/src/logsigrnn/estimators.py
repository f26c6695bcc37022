"""Scikit-learn compatible wrappers around the feature and model stack.

The transformers map collections of paths to fixed-dimension feature
matrices (signatures or log-signatures are what make that possible:
their dimension never depends on how finely a path is sampled), so they
drop straight into sklearn pipelines.  ``LogsigRnnRegressor`` wraps the
trainable models behind the usual fit/predict surface.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin

from . import nn
from ._validation import as_path_list, check_targets
from .features import batch_logsig_segments, batch_signature_segments, signature_dim
from .lyndon import logsig_dim
from .paths import accumulate, make_partition, time_incorporate

__all__ = [
    "SignatureFeatures",
    "LogSignatureFeatures",
    "LogsigSequenceFeatures",
    "LogsigRnnRegressor",
]


def _apply_static_transforms(paths, add_time: bool, accumulate_first: bool):
    out = []
    for x in paths:
        if accumulate_first:
            x = accumulate(x)
        if add_time:
            x = time_incorporate(x)
        out.append(x)
    return out


class _PathFeatureMixin:
    def _prepare(self, X):
        paths = as_path_list(X)
        return _apply_static_transforms(paths, self.add_time, self.accumulate)


class SignatureFeatures(_PathFeatureMixin, TransformerMixin, BaseEstimator):
    """Whole-path truncated signature, flattened levels 1..depth."""

    def __init__(self, depth=2, add_time=False, accumulate=False):
        self.depth = depth
        self.add_time = add_time
        self.accumulate = accumulate

    def fit(self, X, y=None):
        paths = self._prepare(X)
        self.width_in_ = paths[0].width
        self.n_features_out_ = signature_dim(paths[0].width, self.depth)
        return self

    def transform(self, X):
        paths = self._prepare(X)
        rows = [
            batch_signature_segments(x.values, [0, x.length - 1], self.depth)[0, 0]
            for x in paths
        ]
        return np.vstack(rows)


class LogSignatureFeatures(_PathFeatureMixin, TransformerMixin, BaseEstimator):
    """Whole-path truncated log-signature in Lyndon coordinates."""

    def __init__(self, depth=2, add_time=False, accumulate=False):
        self.depth = depth
        self.add_time = add_time
        self.accumulate = accumulate

    def fit(self, X, y=None):
        paths = self._prepare(X)
        self.width_in_ = paths[0].width
        self.n_features_out_ = logsig_dim(paths[0].width, self.depth)
        return self

    def transform(self, X):
        paths = self._prepare(X)
        rows = [
            batch_logsig_segments(x.values, [0, x.length - 1], self.depth)[0, 0]
            for x in paths
        ]
        return np.vstack(rows)


class LogsigSequenceFeatures(_PathFeatureMixin, TransformerMixin, BaseEstimator):
    """Per-segment log-signatures over a coarse partition.

    ``transform`` returns (n_samples, segments * d_ls) when ``flatten`` is
    set (the default, so pipelines see a plain matrix) and the raw
    (n_samples, segments, d_ls) stack otherwise.
    """

    def __init__(self, depth=2, segments=4, flatten=True, add_time=False, accumulate=False):
        self.depth = depth
        self.segments = segments
        self.flatten = flatten
        self.add_time = add_time
        self.accumulate = accumulate

    def fit(self, X, y=None):
        paths = self._prepare(X)
        self.width_in_ = paths[0].width
        self.n_features_out_ = self.segments * logsig_dim(paths[0].width, self.depth)
        return self

    def transform(self, X):
        paths = self._prepare(X)
        rows = []
        for x in paths:
            seg = make_partition(x, self.segments).indices
            rows.append(batch_logsig_segments(x.values, seg, self.depth)[0])
        out = np.stack(rows)
        return out.reshape(out.shape[0], -1) if self.flatten else out


class LogsigRnnRegressor(RegressorMixin, BaseEstimator):
    """Recurrent model on log-signature sequences, behind fit/predict.

    ``model`` selects the variant: "logsig_rnn" (default), "rnn0" (raw
    segment increments), "sig_rnn" (signature sequences) or "sig_olr"
    (linear map on the whole-path signature).
    """

    def __init__(
        self,
        depth=2,
        segments=4,
        hidden=64,
        model="logsig_rnn",
        transforms=(),
        epochs=500,
        learning_rate=1e-3,
        batch_size=64,
        seed=0,
        append_starts=False,
        activation="tanh",
    ):
        self.depth = depth
        self.segments = segments
        self.hidden = hidden
        self.model = model
        self.transforms = transforms
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed
        self.append_starts = append_starts
        self.activation = activation

    def _config(self, output_dim):
        return nn.ModelConfig(
            depth=self.depth,
            segments=self.segments,
            hidden=self.hidden,
            transforms=tuple(self.transforms),
            model=self.model,
            output_dim=output_dim,
            seed=self.seed,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            append_starts=self.append_starts,
            activation=self.activation,
        )

    def fit(self, X, y):
        paths = as_path_list(X)
        targets = check_targets(y, len(paths))
        self._squeeze_output = np.asarray(y).ndim == 1
        cfg = self._config(targets.shape[1])
        data = nn.Dataset(paths, targets, split="train")
        self.params_, self.metrics_ = nn.train(cfg, data)
        self.config_ = cfg
        return self

    def predict(self, X):
        if not hasattr(self, "params_"):
            raise RuntimeError("estimator is not fitted yet")
        paths = as_path_list(X)
        pred = nn.predict(self.config_, self.params_, paths)
        return pred[:, 0] if self._squeeze_output else pred
