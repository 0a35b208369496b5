"""Reference standards and quality-gated crowd consensus.

Both are majority rule over per-class counts, with ties broken by a
seeded random source. Per-clip randomness is derived from
``(seed, clip_id)`` so no result ever depends on clip iteration order.
"""

from __future__ import annotations

import hashlib
import io
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Sequence

from .core import ClassLabel, Counts, Opinion, label_counts
from .errors import ClipExcluded, EmptyVotes, MissingExpertOpinion

#: clip_id -> {expert_id: label}; the panel is the union of expert ids.
ExpertOpinions = Mapping[str, Mapping[str, ClassLabel]]


def clip_rng(seed: int, clip_id: str, stream: str = "") -> random.Random:
    """Deterministic per-clip random source.

    Mixing rule: SHA-256 over ``"{seed}:{stream}:{clip_id}"``, first 8
    bytes read big-endian as the ``random.Random`` seed.
    """
    digest = hashlib.sha256(f"{seed}:{stream}:{clip_id}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def majority_label(counts: Counts, tie_rng: random.Random) -> ClassLabel:
    """Modal class of a count triple; tied modes resolved uniformly at
    random from ``tie_rng``. Consumes randomness only on an actual tie."""
    total = counts[0] + counts[1] + counts[2]
    if total == 0:
        raise EmptyVotes("cannot take a majority of zero opinions")
    top = max(counts)
    modal = [ClassLabel(i) for i in range(3) if counts[i] == top]
    if len(modal) == 1:
        return modal[0]
    return tie_rng.choice(modal)


def agreement_level(counts: Counts) -> float:
    """Modal count divided by total count."""
    total = counts[0] + counts[1] + counts[2]
    if total == 0:
        raise EmptyVotes("agreement undefined with zero opinions")
    return max(counts) / total


def supermajority_reached(counts: Counts) -> bool:
    """True when the modal class holds at least two-thirds of opinions
    (boundary inclusive: 4 of 6 counts as a supermajority)."""
    return agreement_level(counts) >= 2.0 / 3.0


@dataclass(frozen=True, slots=True)
class ReferenceStandard:
    """Frozen per-clip expert majority labels.

    ``excluded_expert`` is None for the full panel, or the expert whose
    opinions were left out of the majority.
    """

    labels: Mapping[str, ClassLabel]
    seed: int
    excluded_expert: Optional[str] = None

    @property
    def source(self) -> str:
        if self.excluded_expert is None:
            return "full_panel"
        return f"leave_one_out:{self.excluded_expert}"


def panel_members(expert_opinions: ExpertOpinions) -> list[str]:
    return sorted({expert for ops in expert_opinions.values() for expert in ops})


def build_reference_standard(
    expert_opinions: ExpertOpinions,
    seed: int,
    exclude_expert: Optional[str] = None,
) -> ReferenceStandard:
    """Majority label per clip over the expert panel, ties broken by the
    per-clip stream so results are clip-order independent.

    Every clip must carry exactly one opinion from every non-excluded
    panel member.
    """
    panel = panel_members(expert_opinions)
    labels: Dict[str, ClassLabel] = {}
    for clip_id, ops in expert_opinions.items():
        votes = []
        for expert_id in panel:
            if expert_id == exclude_expert:
                continue
            if expert_id not in ops:
                raise MissingExpertOpinion(clip_id, expert_id)
            votes.append(ops[expert_id])
        rng = clip_rng(seed, clip_id, stream="reference")
        labels[clip_id] = majority_label(label_counts(votes), rng)
    return ReferenceStandard(labels=labels, seed=seed, excluded_expert=exclude_expert)


def build_leave_one_out_references(
    expert_opinions: ExpertOpinions, seed: int
) -> list[ReferenceStandard]:
    """One reference standard per excluded panel member, in sorted panel
    order. Element i never depends on expert i's opinions."""
    return [
        build_reference_standard(expert_opinions, seed, exclude_expert=expert_id)
        for expert_id in panel_members(expert_opinions)
    ]


@dataclass(frozen=True, slots=True)
class ConsensusPolicy:
    """Thresholds gating when a crowd consensus label is assigned.

    ``min_agreement`` must exceed 1/3, otherwise the modal class at
    threshold is not guaranteed unique.
    """

    min_eligible_opinions: int = 7
    min_agreement: float = 0.6
    skill_threshold: float = 0.8
    window: int = 25
    one_opinion_per_user: bool = True

    def __post_init__(self):
        if self.min_eligible_opinions < 1:
            raise ValueError("min_eligible_opinions must be positive")
        if not self.min_agreement > 1.0 / 3.0:
            raise ValueError("min_agreement must exceed 1/3")
        if self.window < 1:
            raise ValueError("window must be positive")


@dataclass(frozen=True, slots=True)
class ConsensusState:
    """Immutable per-clip vote snapshot.

    ``eligible_by_user`` carries the latest eligible label per user; it
    is the bookkeeping behind the one-opinion-per-user rule and is what
    ``eligible_counts`` is computed from when that rule is on.
    """

    clip_id: str
    raw_counts: Counts = (0, 0, 0)
    eligible_counts: Counts = (0, 0, 0)
    consensus_label: Optional[ClassLabel] = None
    agreement: Optional[float] = None
    eligible_by_user: Mapping[str, ClassLabel] = field(default_factory=dict)


def update_consensus(
    state: ConsensusState,
    opinion: Opinion,
    policy: ConsensusPolicy,
    tie_rng: random.Random,
    excluded: bool = False,
) -> ConsensusState:
    """Fold one opinion into a clip's consensus state.

    Raw counts always grow; eligible counts follow the latest eligible
    opinion per user (an ineligible submission never retracts a user's
    earlier eligible one). The consensus label is set only when both the
    minimum-opinions and agreement thresholds are met.
    """
    if excluded:
        raise ClipExcluded(f"clip {state.clip_id!r} is excluded from contests")
    if opinion.clip_id != state.clip_id:
        raise ValueError(f"opinion is for clip {opinion.clip_id!r}, state is for {state.clip_id!r}")

    raw = list(state.raw_counts)
    raw[opinion.label] += 1

    eligible_by_user = state.eligible_by_user
    elig = state.eligible_counts
    if opinion.eligible:
        counts = list(elig)
        if policy.one_opinion_per_user:
            previous = eligible_by_user.get(opinion.user_id)
            if previous is not None:
                counts[previous] -= 1
            eligible_by_user = {**eligible_by_user, opinion.user_id: opinion.label}
        counts[opinion.label] += 1
        elig = (counts[0], counts[1], counts[2])

    total = elig[0] + elig[1] + elig[2]
    agreement = max(elig) / total if total else None
    consensus = None
    if total >= policy.min_eligible_opinions and agreement >= policy.min_agreement:
        consensus = majority_label(elig, tie_rng)

    return ConsensusState(
        clip_id=state.clip_id,
        raw_counts=(raw[0], raw[1], raw[2]),
        eligible_counts=elig,
        consensus_label=consensus,
        agreement=agreement,
        eligible_by_user=eligible_by_user,
    )


CONSENSUS_CSV_COLUMNS = (
    "clip_id,n_raw,n_eligible,eligible_no,eligible_discrete,eligible_confluent,agreement,consensus_label"
)


def consensus_csv(states: Iterable[ConsensusState]) -> str:
    """Consensus snapshot export, one row per clip sorted by clip_id.

    Column order is fixed; ``agreement`` and ``consensus_label`` are
    empty when undefined.
    """
    out = io.StringIO()
    out.write(CONSENSUS_CSV_COLUMNS + "\n")
    for state in sorted(states, key=lambda s: s.clip_id):
        agreement = "" if state.agreement is None else f"{state.agreement:.6f}"
        label = "" if state.consensus_label is None else state.consensus_label.slug
        elig = state.eligible_counts
        out.write(
            f"{state.clip_id},{sum(state.raw_counts)},{sum(elig)},"
            f"{elig[0]},{elig[1]},{elig[2]},{agreement},{label}\n"
        )
    return out.getvalue()
