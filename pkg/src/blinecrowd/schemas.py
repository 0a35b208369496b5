"""Request and response bodies for the HTTP API.

The next-clip payload deliberately carries nothing but the clip identity
and playback parameters: clients must not be able to tell training, test,
and unlabeled clips apart.
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from .consensus import ConsensusPolicy, ConsensusState
from .core import ClassLabel
from .engine import Contest, Feedback, LeaderboardRow, PrizeAward


class PolicyBody(BaseModel):
    min_eligible_opinions: int = 7
    min_agreement: float = 0.6
    skill_threshold: float = 0.8
    window: int = 25
    one_opinion_per_user: bool = True

    def to_policy(self) -> ConsensusPolicy:
        return ConsensusPolicy(
            min_eligible_opinions=self.min_eligible_opinions,
            min_agreement=self.min_agreement,
            skill_threshold=self.skill_threshold,
            window=self.window,
            one_opinion_per_user=self.one_opinion_per_user,
        )


class ContestCreateBody(BaseModel):
    pool: List[str] = Field(min_length=1)
    prize_pool: float = Field(default=1100.0, ge=0.0)
    seed: int = 0
    policy: Optional[PolicyBody] = None


class ContestView(BaseModel):
    contest_id: str
    status: str
    pool_size: int
    prize_pool: float
    seed: int

    @classmethod
    def from_contest(cls, contest: Contest) -> "ContestView":
        return cls(
            contest_id=contest.contest_id,
            status=contest.status,
            pool_size=len(contest.pool),
            prize_pool=contest.prize_pool,
            seed=contest.seed,
        )


class NextClipView(BaseModel):
    """Only identity and playback fields; role and reference stay server-side."""

    clip_id: str
    media_uri: str
    frame_rate_hz: float


class OpinionBody(BaseModel):
    contest_id: str
    user_id: str
    clip_id: str
    label: str = Field(pattern="^(no|discrete|confluent)$")

    def parsed_label(self) -> ClassLabel:
        return ClassLabel.from_slug(self.label)


class FeedbackView(BaseModel):
    opinion_id: int
    disposition: str
    revealed_label: Optional[str] = None
    trailing_accuracy: Optional[float] = None
    scored_count: int

    @classmethod
    def from_feedback(cls, feedback: Feedback) -> "FeedbackView":
        revealed = feedback.revealed_label
        return cls(
            opinion_id=feedback.opinion_id,
            disposition=feedback.disposition,
            revealed_label=None if revealed is None else revealed.slug,
            trailing_accuracy=feedback.trailing_accuracy,
            scored_count=feedback.scored_count,
        )


class LeaderboardEntryView(BaseModel):
    rank: int
    user_id: str
    score: float
    scored_count: int


class LeaderboardView(BaseModel):
    contest_id: str
    rows: List[LeaderboardEntryView]

    @classmethod
    def from_rows(cls, contest_id: str, rows: List[LeaderboardRow]) -> "LeaderboardView":
        return cls(
            contest_id=contest_id,
            rows=[
                LeaderboardEntryView(
                    rank=i + 1, user_id=r.user_id, score=r.score,
                    scored_count=r.scored_count,
                )
                for i, r in enumerate(rows)
            ],
        )


class ConsensusView(BaseModel):
    clip_id: str
    raw_counts: Dict[str, int]
    eligible_counts: Dict[str, int]
    consensus_label: Optional[str] = None
    agreement: Optional[float] = None

    @classmethod
    def from_state(cls, state: ConsensusState) -> "ConsensusView":
        def named(counts) -> Dict[str, int]:
            return {label.slug: counts[label.value] for label in ClassLabel}

        label = state.consensus_label
        return cls(
            clip_id=state.clip_id,
            raw_counts=named(state.raw_counts),
            eligible_counts=named(state.eligible_counts),
            consensus_label=None if label is None else label.slug,
            agreement=state.agreement,
        )


class AwardView(BaseModel):
    user_id: str
    rank: int
    score: float
    amount: float


class SettleView(BaseModel):
    contest_id: str
    awards: List[AwardView]
    total: float

    @classmethod
    def from_awards(cls, contest_id: str, awards: List[PrizeAward]) -> "SettleView":
        return cls(
            contest_id=contest_id,
            awards=[
                AwardView(user_id=a.user_id, rank=a.rank, score=a.score, amount=a.amount)
                for a in awards
            ],
            total=round(sum(a.amount for a in awards), 2),
        )


class PartitionBody(BaseModel):
    partition_seed: int = 0
    selection_seed: int = 0
    n_per_set: int = Field(default=200, ge=1)


class ManifestIngestBody(BaseModel):
    content: str
    format: str = Field(default="auto", pattern="^(auto|csv|jsonl)$")
    partition: Optional[PartitionBody] = None


class ManifestIngestView(BaseModel):
    clips: int
    training: int
    test: int
    unlabeled: int
    excluded: int


class ExpertOpinionsBody(BaseModel):
    content: str
    seed: int = 0


class ExpertOpinionsView(BaseModel):
    clips_labeled: int
    panel: List[str]


class ErrorBody(BaseModel):
    error: str
    detail: str
