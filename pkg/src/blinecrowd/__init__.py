"""Crowdsourced lung-ultrasound labeling: consensus, quality gating,
contest service, simulation, and evaluation tooling."""

from .core import (
    ALL_LABELS,
    ClassLabel,
    Clip,
    ClipRole,
    Opinion,
    User,
    UserKind,
    label_counts,
    severity_max,
    vote_counts,
)
from .consensus import (
    ConsensusPolicy,
    ConsensusState,
    ReferenceStandard,
    agreement_level,
    build_leave_one_out_references,
    build_reference_standard,
    clip_rng,
    majority_label,
    supermajority_reached,
    update_consensus,
)
from .quality import UserQuality, is_skilled, record_outcome, score_source_for

__all__ = [
    "ALL_LABELS",
    "ClassLabel",
    "Clip",
    "ClipRole",
    "ConsensusPolicy",
    "ConsensusState",
    "Opinion",
    "ReferenceStandard",
    "User",
    "UserKind",
    "UserQuality",
    "agreement_level",
    "build_leave_one_out_references",
    "build_reference_standard",
    "clip_rng",
    "is_skilled",
    "label_counts",
    "majority_label",
    "record_outcome",
    "score_source_for",
    "severity_max",
    "supermajority_reached",
    "update_consensus",
    "vote_counts",
]

__version__ = "0.1.0"
