"""Truncated signatures and log-signatures of discrete paths, the
differentiable log-signature sequence layer, recurrent models on top of
it, and Stratonovich SDE tooling for benchmarking them.

The sklearn-style entry points live in :mod:`logsigrnn.estimators`; the
numerical core is importable piecemeal from the submodules re-exported
here.
"""

__version__ = "0.1.0"

from .exceptions import (
    NotLieElementError,
    ScalarTermError,
    ShapeMismatchError,
    TrainingDivergedError,
)
from .tensoralg import (
    TensorElement,
    from_increment,
    tensor_exp,
    tensor_log,
    tensor_mul,
    unit,
    zero,
)
from .lyndon import LieCoords, LyndonBasis, lie_expand, lie_project, logsig_dim, lyndon_words
from .paths import (
    CoarsePartition,
    Path,
    accumulate,
    downsample,
    drop_points,
    make_partition,
    p_variation,
    read_path_csv,
    reparameterize,
    time_incorporate,
    write_path_csv,
)
from .features import (
    LogsigSequence,
    log_signature,
    logsig_sequence,
    logsig_sequence_vjp,
    shuffle,
    signature,
    signature_dim,
    signature_sequence,
)
from .nn import (
    Dataset,
    LinearParams,
    ModelConfig,
    RnnParams,
    logsig_rnn_forward,
    rnn_forward,
    sig_olr_forward,
    train,
)
from .sde import (
    SdeSample,
    VectorFieldSet,
    example2_fields,
    gen_dataset,
    simulate_example2,
    taylor_estimate,
)

_ESTIMATOR_NAMES = (
    "SignatureFeatures",
    "LogSignatureFeatures",
    "LogsigSequenceFeatures",
    "LogsigRnnRegressor",
)


def __getattr__(name):
    # the sklearn-backed layer loads lazily so CLI start-up stays light
    if name in _ESTIMATOR_NAMES:
        from . import estimators

        return getattr(estimators, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")

__all__ = [
    "__version__",
    "TensorElement",
    "unit",
    "zero",
    "from_increment",
    "tensor_mul",
    "tensor_exp",
    "tensor_log",
    "LyndonBasis",
    "LieCoords",
    "lyndon_words",
    "logsig_dim",
    "lie_project",
    "lie_expand",
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
    "signature",
    "log_signature",
    "signature_sequence",
    "logsig_sequence",
    "logsig_sequence_vjp",
    "LogsigSequence",
    "shuffle",
    "signature_dim",
    "ModelConfig",
    "RnnParams",
    "LinearParams",
    "Dataset",
    "rnn_forward",
    "logsig_rnn_forward",
    "sig_olr_forward",
    "train",
    "VectorFieldSet",
    "SdeSample",
    "example2_fields",
    "simulate_example2",
    "gen_dataset",
    "taylor_estimate",
    "SignatureFeatures",
    "LogSignatureFeatures",
    "LogsigSequenceFeatures",
    "LogsigRnnRegressor",
    "ShapeMismatchError",
    "ScalarTermError",
    "NotLieElementError",
    "TrainingDivergedError",
]
