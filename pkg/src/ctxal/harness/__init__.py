"""Dataset generation, streaming sessions, CLI, and the labeling service."""
from .dataio import CONFIG_KEYS, load_config, load_dataset, parse_config, save_dataset
from .session import (
    STRATEGIES,
    CurvePoint,
    QueryBatch,
    SessionConfig,
    SessionResult,
    SessionState,
    run_session,
)
from .synth import EventDataset, GeneratorConfig, generate_dataset, train_test_pair

__all__ = [
    "CONFIG_KEYS",
    "CurvePoint",
    "EventDataset",
    "GeneratorConfig",
    "QueryBatch",
    "STRATEGIES",
    "SessionConfig",
    "SessionResult",
    "SessionState",
    "generate_dataset",
    "load_config",
    "load_dataset",
    "parse_config",
    "run_session",
    "save_dataset",
    "train_test_pair",
]
