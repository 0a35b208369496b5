"""Per-user skill tracking over a sliding window of scored opinions.

An opinion is "scored" when the clip had a label to score against at
submission time: the reference standard for training clips, or the
current crowd consensus for initially-unlabeled clips. Test clips are
never scored and never produce feedback, so crowd quality measured on
the test set stays independent of the gating machinery.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

from .core import ClassLabel, Clip, ClipRole
from .consensus import ConsensusState

DEFAULT_WINDOW = 25
DEFAULT_MIN_SCORED = 10


@dataclass(frozen=True, slots=True)
class UserQuality:
    """Immutable snapshot of one user's recent scored outcomes."""

    user_id: str
    window: Tuple[bool, ...] = ()
    capacity: int = DEFAULT_WINDOW
    min_scored: int = DEFAULT_MIN_SCORED
    scored_count: int = 0

    @property
    def window_mean(self) -> Optional[float]:
        """Correct fraction over current window contents, regardless of
        whether enough history exists for gating."""
        if not self.window:
            return None
        return sum(self.window) / len(self.window)

    @property
    def trailing_accuracy(self) -> Optional[float]:
        """Gating trailing accuracy: None until ``min_scored`` outcomes
        have ever been recorded."""
        if self.scored_count < self.min_scored:
            return None
        return self.window_mean


def record_outcome(q: UserQuality, correct: bool) -> UserQuality:
    """Append one scored outcome, evicting the oldest beyond capacity."""
    window = q.window + (correct,)
    if len(window) > q.capacity:
        window = window[len(window) - q.capacity:]
    return UserQuality(
        user_id=q.user_id,
        window=window,
        capacity=q.capacity,
        min_scored=q.min_scored,
        scored_count=q.scored_count + 1,
    )


def is_skilled(q: UserQuality, threshold: float) -> bool:
    """True iff trailing accuracy is defined and at or above threshold
    (the 80% boundary is inclusive)."""
    trailing = q.trailing_accuracy
    return trailing is not None and trailing >= threshold


def score_source_for(clip: Clip, consensus: Optional[ConsensusState]) -> Optional[ClassLabel]:
    """Label an opinion on this clip is scored against, if any.

    Training clips score against their reference label; initially
    unlabeled clips against the current crowd consensus once one exists.
    Test clips never feed skill estimation.
    """
    if clip.role is ClipRole.TRAINING:
        return clip.reference_label
    if clip.role is ClipRole.UNLABELED and consensus is not None:
        return consensus.consensus_label
    return None


QUALITY_CSV_COLUMNS = "user_id,scored_count,trailing_accuracy,skilled"


def quality_csv(snapshots: Iterable[UserQuality], threshold: float) -> str:
    """Per-user quality export, one row per user sorted by user_id."""
    out = io.StringIO()
    out.write(QUALITY_CSV_COLUMNS + "\n")
    for q in sorted(snapshots, key=lambda s: s.user_id):
        trailing = q.trailing_accuracy
        shown = "" if trailing is None else f"{trailing:.6f}"
        out.write(f"{q.user_id},{q.scored_count},{shown},{str(is_skilled(q, threshold)).lower()}\n")
    return out.getvalue()
