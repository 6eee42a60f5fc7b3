"""
The 18-stage training schedule and parameter freezing.

Stages 1-4 train only the motion path, stages 5-11 freeze it, and stages 12-18
train everything.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from torch import nn

from ..exceptions import ConfigurationError

logger = logging.getLogger(__name__)

LOSS_TYPES = ("meD", "meRD", "recD", "recRD", "all", "avg")
SEGMENT_TYPES = ("IP", "PP", "IPP")
MOTION_ALL = "motion_all"
NON_MOTION = "non_motion"
MOTION_MODULES = ("flow_net", "mv_codec")
DEFAULT_EPOCHS = 20


@dataclass(frozen=True)
class StageConfig:
    """One row of the training schedule."""

    id: int
    loss_type: str
    frames: int
    lr: float
    segment_type: str
    frozen_groups: FrozenSet[str] = field(default_factory=frozenset)
    epochs: int = DEFAULT_EPOCHS

    def __post_init__(self):
        if self.loss_type not in LOSS_TYPES:
            raise ConfigurationError(f"Stage {self.id}: unknown loss type '{self.loss_type}'.")
        if self.segment_type not in SEGMENT_TYPES:
            raise ConfigurationError(f"Stage {self.id}: unknown segment type '{self.segment_type}'.")
        if self.frames < 2:
            raise ConfigurationError(f"Stage {self.id}: needs at least 2 frames.")
        if self.segment_type == "IP" and self.frames != 2:
            raise ConfigurationError(f"Stage {self.id}: IP segments use exactly 2 frames.")
        if self.segment_type == "PP" and self.frames < 3:
            raise ConfigurationError(f"Stage {self.id}: PP segments need at least 3 frames.")
        if self.epochs < 1 or self.lr <= 0:
            raise ConfigurationError(f"Stage {self.id}: epochs and lr must be positive.")
        unknown = set(self.frozen_groups) - {MOTION_ALL, NON_MOTION}
        if unknown:
            raise ConfigurationError(f"Stage {self.id}: unknown parameter groups {sorted(unknown)}.")

    @property
    def motion_only(self) -> bool:
        return self.loss_type in ("meD", "meRD")

    @property
    def loss_frames(self) -> Tuple[int, ...]:
        """Frame indices whose losses enter the objective."""
        if self.segment_type == "IP":
            return (1,)
        if self.segment_type == "PP":
            return tuple(range(2, self.frames))
        return tuple(range(1, self.frames))

    @property
    def trains_intra(self) -> bool:
        """IP stages with a trainable non-motion group also optimize the intra codec."""
        return self.segment_type == "IP" and NON_MOTION not in self.frozen_groups


# (loss type, frames, lr, segment type), stages 1..18
_TABLE = (
    ("meD", 2, 1e-4, "IP"),
    ("meRD", 2, 1e-4, "IP"),
    ("recD", 2, 5e-5, "IP"),
    ("meRD", 3, 1e-4, "PP"),
    ("recD", 3, 5e-5, "PP"),
    ("recD", 4, 5e-5, "PP"),
    ("recD", 6, 5e-5, "PP"),
    ("recRD", 2, 5e-5, "IP"),
    ("recRD", 3, 5e-5, "PP"),
    ("recRD", 4, 5e-5, "PP"),
    ("recRD", 6, 5e-5, "PP"),
    ("all", 2, 5e-5, "IP"),
    ("all", 3, 5e-5, "PP"),
    ("all", 4, 5e-5, "PP"),
    ("all", 6, 5e-5, "PP"),
    ("all", 6, 1e-5, "PP"),
    ("all", 6, 5e-6, "PP"),
    ("avg", 6, 1e-5, "IPP"),
)


def _frozen_for(stage_id: int) -> FrozenSet[str]:
    if stage_id <= 4:
        return frozenset({NON_MOTION})
    if stage_id <= 11:
        return frozenset({MOTION_ALL})
    return frozenset()


def default_schedule() -> List[StageConfig]:
    """The full 18-stage schedule."""
    return [
        StageConfig(
            id=i,
            loss_type=loss_type,
            frames=frames,
            lr=lr,
            segment_type=segment,
            frozen_groups=_frozen_for(i),
        )
        for i, (loss_type, frames, lr, segment) in enumerate(_TABLE, start=1)
    ]


def apply_overrides(
    schedule: Sequence[StageConfig], overrides: Iterable[Mapping] = (), epochs: Optional[int] = None
) -> List[StageConfig]:
    """
    Apply a global epoch count and per-stage ``{id, lr?, epochs?, frames?}`` overrides.

    Raises:
        ConfigurationError: If an override names an unknown stage.
    """
    by_id: Dict[int, StageConfig] = {s.id: s for s in schedule}
    if epochs is not None:
        by_id = {k: replace(s, epochs=epochs) for k, s in by_id.items()}
    for override in overrides:
        stage_id = int(override["id"])
        if stage_id not in by_id:
            raise ConfigurationError(f"Stage override refers to unknown stage {stage_id}.")
        fields = {k: override[k] for k in ("lr", "epochs", "frames") if k in override}
        by_id[stage_id] = replace(by_id[stage_id], **fields)
    return [by_id[s.id] for s in schedule]


def select_stages(schedule: Sequence[StageConfig], start: int = 1, end: Optional[int] = None) -> List[StageConfig]:
    end = schedule[-1].id if end is None else end
    return [s for s in schedule if start <= s.id <= end]


@dataclass
class ParamGroups:
    """Disjoint, total split of model parameters into the motion and non-motion groups."""

    motion: List[Tuple[str, nn.Parameter]]
    non_motion: List[Tuple[str, nn.Parameter]]

    @classmethod
    def from_model(cls, model: nn.Module) -> "ParamGroups":
        motion, non_motion = [], []
        for name, param in model.named_parameters():
            if name.split(".", 1)[0] in MOTION_MODULES:
                motion.append((name, param))
            else:
                non_motion.append((name, param))
        return cls(motion=motion, non_motion=non_motion)

    def group(self, name: str) -> List[Tuple[str, nn.Parameter]]:
        if name == MOTION_ALL:
            return self.motion
        if name == NON_MOTION:
            return self.non_motion
        raise ConfigurationError(f"Unknown parameter group '{name}'.")


def apply_freezing(model: nn.Module, stage: StageConfig) -> ParamGroups:
    """Set ``requires_grad`` per the stage's frozen groups."""
    groups = ParamGroups.from_model(model)
    for group_name in (MOTION_ALL, NON_MOTION):
        trainable = group_name not in stage.frozen_groups
        for _, param in groups.group(group_name):
            param.requires_grad_(trainable)
    logger.debug(f"Stage {stage.id}: frozen groups {sorted(stage.frozen_groups) or 'none'}")
    return groups


def unfreeze_all(model: nn.Module) -> None:
    for param in model.parameters():
        param.requires_grad_(True)
