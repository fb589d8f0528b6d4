"""Graph classification with a virtual column over a column network.

The public surface: graph containers and augmentation, the recurrent
column updates, the full model with checkpointing, exact ranking metrics,
dataset IO plus synthetic generators, training with adaptive learning
rate halving, and an end-to-end gradient checker.
"""

from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    NumericError,
    VcnetError,
)
from .graphs import (
    AugmentedGraph,
    Graph,
    NeighborIndex,
    augment,
    build_neighbor_index,
    undirected_expand,
)
from .column import (
    ColumnParams,
    ColumnState,
    cln_step,
    init_column_params,
    init_states,
)
from .model import (
    ModelConfig,
    VcnParams,
    VirtualColumnNet,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .metrics import auc, confusion, f1, metrics_report, rebalance, split
from .data import (
    GraphRecord,
    SyntheticSpec,
    encode_molecule_like,
    generate,
    graphs_of,
    labels_of,
    load_dataset,
    loads_dataset,
    save_dataset,
)
from .training import (
    Optimizer,
    ScheduleState,
    TrainConfig,
    TrainResult,
    grid_search,
    schedule_update,
    train,
    write_history_csv,
)
from .gradcheck import GradCheckReport, gradient_check

__version__ = "0.1.0"

__all__ = [
    "AugmentedGraph",
    "CheckpointError",
    "ColumnParams",
    "ColumnState",
    "ConfigError",
    "DataError",
    "GradCheckReport",
    "Graph",
    "GraphRecord",
    "ModelConfig",
    "NeighborIndex",
    "NumericError",
    "Optimizer",
    "ScheduleState",
    "SyntheticSpec",
    "TrainConfig",
    "TrainResult",
    "VcnParams",
    "VcnetError",
    "VirtualColumnNet",
    "auc",
    "augment",
    "build_neighbor_index",
    "cln_step",
    "confusion",
    "encode_molecule_like",
    "f1",
    "generate",
    "gradient_check",
    "graphs_of",
    "grid_search",
    "init_column_params",
    "init_params",
    "init_states",
    "labels_of",
    "load_checkpoint",
    "load_dataset",
    "loads_dataset",
    "metrics_report",
    "rebalance",
    "save_checkpoint",
    "save_dataset",
    "schedule_update",
    "split",
    "train",
    "undirected_expand",
    "write_history_csv",
]
