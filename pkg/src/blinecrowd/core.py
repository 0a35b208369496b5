"""Shared domain vocabulary: labels, clips, opinions, users.

All types here are immutable value objects, safe to share between
threads. The rest of the package treats a clip as an opaque labeled
token; media is referenced by URI and never opened.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple


class ClassLabel(enum.IntEnum):
    """Three-class B-line severity scale, ordered by severity."""

    NO_BLINES = 0
    DISCRETE_BLINES = 1
    CONFLUENT_BLINES = 2

    @property
    def severity_rank(self) -> int:
        return int(self)

    @property
    def slug(self) -> str:
        return _LABEL_SLUGS[self]

    @classmethod
    def from_slug(cls, text: str) -> "ClassLabel":
        try:
            return _SLUG_LABELS[text.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown class label {text!r}; expected one of {sorted(_SLUG_LABELS)}") from None


_LABEL_SLUGS = {
    ClassLabel.NO_BLINES: "no",
    ClassLabel.DISCRETE_BLINES: "discrete",
    ClassLabel.CONFLUENT_BLINES: "confluent",
}
_SLUG_LABELS = {slug: label for label, slug in _LABEL_SLUGS.items()}

ALL_LABELS: Tuple[ClassLabel, ClassLabel, ClassLabel] = (
    ClassLabel.NO_BLINES,
    ClassLabel.DISCRETE_BLINES,
    ClassLabel.CONFLUENT_BLINES,
)

#: Per-class count triple, indexed by severity rank.
Counts = Tuple[int, int, int]


class ClipRole(enum.Enum):
    TRAINING = "training"
    TEST = "test"
    UNLABELED = "unlabeled"


class UserKind(enum.Enum):
    EXPERT = "expert"
    CROWD = "crowd"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True, slots=True)
class Clip:
    """One ultrasound clip record. ``frame_rate_hz`` is display metadata
    only; nothing server-side ever decodes the media behind ``media_uri``."""

    clip_id: str
    patient_id: str
    role: ClipRole = ClipRole.UNLABELED
    reference_label: Optional[ClassLabel] = None
    excluded: bool = False
    frame_rate_hz: float = 30.0
    media_uri: str = ""


@dataclass(frozen=True, slots=True)
class Opinion:
    """One submitted classification.

    ``trailing_accuracy_at_submission`` and ``eligible`` are frozen from
    the submitter's quality state at submission time and never revised,
    which keeps the opinion log replayable.
    """

    opinion_id: int
    user_id: str
    clip_id: str
    label: ClassLabel
    submitted_at: float
    trailing_accuracy_at_submission: Optional[float] = None
    eligible: bool = False


@dataclass(frozen=True, slots=True)
class User:
    user_id: str
    kind: UserKind = UserKind.CROWD
    reported_medical_experience: Optional[bool] = None


def severity_max(a: ClassLabel, b: ClassLabel) -> ClassLabel:
    """Join of two labels under the severity order (a whole clip is graded
    by the worst severity it shows anywhere)."""
    return a if a.severity_rank >= b.severity_rank else b


def label_counts(labels: Iterable[ClassLabel]) -> Counts:
    """Per-class counts as a (no, discrete, confluent) triple."""
    counts = [0, 0, 0]
    for label in labels:
        counts[label] += 1
    return (counts[0], counts[1], counts[2])


def vote_counts(opinions: Iterable[Opinion]) -> Counts:
    """Per-class opinion counts, independent of opinion order."""
    return label_counts(op.label for op in opinions)
