"""From-scratch feedforward neural-network classifier and experiment
harness for the 13-attribute heart-disease table."""

from .data import (
    CLASS_NAMES,
    DataError,
    Dataset,
    FormatError,
    HEART_SCHEMA,
    ImputationError,
    ParseError,
    Scaler,
    ValidationError,
    bundled_fixture_path,
    decode_output,
    encode_class,
    encode_labels,
    fit_scaler,
    impute,
    load_dataset,
    load_scaler,
    save_scaler,
    split,
)
from .evaluation import (
    DEFAULT_GRID,
    ExperimentCell,
    ExperimentReport,
    Metrics,
    evaluate,
    export_report,
    format_report,
    run_experiment,
)
from .network import (
    Gradients,
    Network,
    backward,
    forward,
    load_network,
    new_network,
    predict,
    save_network,
    sigmoid,
    sse,
)
from .parallel import NeuronPool
from .trainer import (
    DivergenceError,
    EpochRecord,
    TrainConfig,
    TrainingHistory,
    adapt_learning_rate,
    train,
    write_history_csv,
)

__version__ = "0.1.0"

__all__ = [
    "CLASS_NAMES",
    "DataError",
    "Dataset",
    "DEFAULT_GRID",
    "DivergenceError",
    "EpochRecord",
    "ExperimentCell",
    "ExperimentReport",
    "FormatError",
    "Gradients",
    "HEART_SCHEMA",
    "ImputationError",
    "Metrics",
    "Network",
    "NeuronPool",
    "ParseError",
    "Scaler",
    "TrainConfig",
    "TrainingHistory",
    "ValidationError",
    "adapt_learning_rate",
    "backward",
    "bundled_fixture_path",
    "decode_output",
    "encode_class",
    "encode_labels",
    "evaluate",
    "export_report",
    "fit_scaler",
    "format_report",
    "forward",
    "impute",
    "load_dataset",
    "load_network",
    "load_scaler",
    "new_network",
    "predict",
    "run_experiment",
    "save_network",
    "save_scaler",
    "sigmoid",
    "split",
    "sse",
    "train",
    "write_history_csv",
]
