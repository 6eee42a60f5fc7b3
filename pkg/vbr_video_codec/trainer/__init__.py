from .batches import Batch, TrainingInstance, build_batch, collate, epoch_batches
from .checkpoints import (
    checkpoint_settings,
    intra_dir,
    latest_stage_checkpoint,
    load_checkpoint,
    read_manifest,
    save_checkpoint,
    stage_dir,
)
from .jobs import (
    IntraWarmupJob,
    StageJob,
    StageMetrics,
    TrainingLog,
    TrainJob,
    TrainOptions,
    compute_intra_loss,
    compute_stage_loss,
    run_stage,
    train_full,
)
from .schedule import (
    MOTION_ALL,
    NON_MOTION,
    ParamGroups,
    StageConfig,
    apply_freezing,
    apply_overrides,
    default_schedule,
    select_stages,
    unfreeze_all,
)

__all__ = [
    "Batch",
    "TrainingInstance",
    "build_batch",
    "collate",
    "epoch_batches",
    "checkpoint_settings",
    "intra_dir",
    "latest_stage_checkpoint",
    "load_checkpoint",
    "read_manifest",
    "save_checkpoint",
    "stage_dir",
    "IntraWarmupJob",
    "StageJob",
    "StageMetrics",
    "TrainingLog",
    "TrainJob",
    "TrainOptions",
    "compute_intra_loss",
    "compute_stage_loss",
    "run_stage",
    "train_full",
    "MOTION_ALL",
    "NON_MOTION",
    "ParamGroups",
    "StageConfig",
    "apply_freezing",
    "apply_overrides",
    "default_schedule",
    "select_stages",
    "unfreeze_all",
]
