"""In-process contest engine: clip registry, contests, concurrent
opinion intake, feedback, quality tracking, leaderboards, prizes, and
the replayable opinion log.

Concurrency contract: submissions touching the same user or the same
clip are serialized (a submission takes its user lock, then its clip
lock; locks are acquired in that fixed order, so no cycles). A global
log lock assigns opinion ids, appends the entry, and publishes the new
consensus/quality snapshots as one step, so every export cut of the
state corresponds to an exact log prefix.

Determinism: all randomness comes from per-purpose streams of
``clip_rng`` keyed by the engine seed (consensus/crowd-label ties) or
the contest seed (clip serving). Timestamps are logged, never used.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
import time
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .config import DEFAULT_CONFIG, ServiceConfig
from .consensus import (
    ConsensusPolicy,
    ConsensusState,
    clip_rng,
    consensus_csv,
    update_consensus,
)
from .core import ClassLabel, Clip, ClipRole, Opinion, User, UserKind
from .errors import (
    ClipExcluded,
    ClipNotInPool,
    ContestClosed,
    ContestStillOpen,
    CorruptLog,
    EmptyPool,
    UnknownClip,
    UnknownContest,
)
from .oplog import (
    DISPOSITION_RECORDED,
    DISPOSITION_REVEALED,
    OpinionLogEntry,
    entry_to_json,
    read_log,
)
from .quality import UserQuality, is_skilled, quality_csv, record_outcome, score_source_for

STATUS_OPEN = "open"
STATUS_CLOSED = "closed"


@dataclass(frozen=True, slots=True)
class Contest:
    contest_id: str
    pool: Tuple[str, ...]          # sorted clip ids, exclusions removed
    policy: ConsensusPolicy
    prize_pool: float
    seed: int
    status: str = STATUS_OPEN


@dataclass(frozen=True, slots=True)
class Feedback:
    """Immediate response to a submission.

    ``trailing_accuracy``/``scored_count`` reflect the submitter's state
    after this opinion was scored (the log keeps the pre-submission
    snapshot that eligibility was frozen from).
    """

    opinion_id: int
    disposition: str
    revealed_label: Optional[ClassLabel]
    trailing_accuracy: Optional[float]
    scored_count: int


@dataclass(frozen=True, slots=True)
class LeaderboardRow:
    user_id: str
    score: float
    scored_count: int


@dataclass(frozen=True, slots=True)
class PrizeAward:
    user_id: str
    rank: int
    score: float
    amount: float   # currency units, floored to cents


def contest_id_for(
    pool: Sequence[str], policy: ConsensusPolicy, prize_pool: float, seed: int
) -> str:
    """Deterministic contest id: hash of the full contest definition."""
    canonical = json.dumps({
        "pool": sorted(pool),
        "policy": [policy.min_eligible_opinions, policy.min_agreement,
                   policy.skill_threshold, policy.window, policy.one_opinion_per_user],
        "prize_pool": prize_pool,
        "seed": seed,
    }, sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


class ContestEngine:
    """Single-process service core; all public methods are thread-safe."""

    def __init__(self, config: ServiceConfig = DEFAULT_CONFIG):
        self.config = config
        self._clips: Dict[str, Clip] = {}
        self._users: Dict[str, User] = {}
        self._contests: Dict[str, Contest] = {}
        self._pool_sets: Dict[str, frozenset] = {}
        self._consensus: Dict[str, ConsensusState] = {}
        self._tie_rngs: Dict[str, object] = {}
        self._quality: Dict[Tuple[str, str], UserQuality] = {}
        self._serve_rngs: Dict[Tuple[str, str], object] = {}
        self._ledgers: Dict[str, Tuple[PrizeAward, ...]] = {}
        self._entries: List[OpinionLogEntry] = []
        self._next_opinion_id = 1

        self._registry_lock = threading.Lock()   # clips/users/contests maps
        self._log_lock = threading.Lock()        # id assignment + publication
        self._user_locks: Dict[str, threading.Lock] = {}
        self._clip_locks: Dict[str, threading.Lock] = {}
        self._serve_lock = threading.Lock()

    # ------------------------------------------------------- registry

    def register_clips(self, clips: Mapping[str, Clip]) -> int:
        with self._registry_lock:
            self._clips.update(clips)
            return len(self._clips)

    def set_reference_labels(self, labels: Mapping[str, ClassLabel]) -> int:
        """Attach (or overwrite) reference labels on known clips."""
        with self._registry_lock:
            for clip_id, label in labels.items():
                clip = self._clips.get(clip_id)
                if clip is None:
                    raise UnknownClip(f"clip {clip_id!r} not registered")
                self._clips[clip_id] = replace(clip, reference_label=label)
            return len(labels)

    def register_user(self, user: User) -> None:
        with self._registry_lock:
            existing = self._users.get(user.user_id)
            if existing is not None and existing.kind is not user.kind:
                raise ValueError(
                    f"user {user.user_id!r} already registered as {existing.kind.value}"
                )
            self._users[user.user_id] = user

    def _user_kind(self, user_id: str) -> UserKind:
        user = self._users.get(user_id)
        if user is None:
            # open signup: unknown submitters are crowd users
            user = User(user_id=user_id, kind=UserKind.CROWD)
            with self._registry_lock:
                user = self._users.setdefault(user_id, user)
        return user.kind

    def clip(self, clip_id: str) -> Clip:
        clip = self._clips.get(clip_id)
        if clip is None:
            raise UnknownClip(f"clip {clip_id!r} not registered")
        return clip

    def clip_ids(self) -> List[str]:
        with self._registry_lock:
            return sorted(self._clips)

    # ------------------------------------------------------- contests

    def create_contest(
        self,
        pool: Iterable[str],
        prize_pool: Optional[float] = None,
        seed: int = 0,
        policy: Optional[ConsensusPolicy] = None,
    ) -> str:
        """Register an Open contest; deterministic id, idempotent for
        identical definitions. Excluded clips are dropped from the pool."""
        policy = policy or self.config.policy
        prize = self.config.prize_pool if prize_pool is None else prize_pool
        with self._registry_lock:
            kept = []
            for clip_id in sorted(set(pool)):
                clip = self._clips.get(clip_id)
                if clip is None:
                    raise UnknownClip(f"clip {clip_id!r} not registered")
                if not clip.excluded:
                    kept.append(clip_id)
            if not kept:
                raise EmptyPool("contest pool is empty after exclusions")
            contest_id = contest_id_for(kept, policy, prize, seed)
            if contest_id not in self._contests:
                self._contests[contest_id] = Contest(
                    contest_id=contest_id, pool=tuple(kept), policy=policy,
                    prize_pool=prize, seed=seed,
                )
                self._pool_sets[contest_id] = frozenset(kept)
            return contest_id

    def _contest(self, contest_id: str) -> Contest:
        contest = self._contests.get(contest_id)
        if contest is None:
            raise UnknownContest(f"no contest {contest_id!r}")
        return contest

    def contest(self, contest_id: str) -> Contest:
        with self._registry_lock:
            return self._contest(contest_id)

    def close_contest(self, contest_id: str) -> Contest:
        with self._registry_lock:
            contest = self._contest(contest_id)
            if contest.status != STATUS_CLOSED:
                contest = replace(contest, status=STATUS_CLOSED)
                self._contests[contest_id] = contest
            return contest

    # -------------------------------------------------------- serving

    def next_clip(self, contest_id: str, user_id: str) -> Clip:
        """Uniform draw (with replacement) from the pool, from a per-user
        stream seeded by the contest seed, so sequences are reproducible
        and independent across users."""
        with self._registry_lock:
            contest = self._contest(contest_id)
            if contest.status != STATUS_OPEN:
                raise ContestClosed(f"contest {contest_id} is closed")
        with self._serve_lock:
            key = (contest_id, user_id)
            rng = self._serve_rngs.get(key)
            if rng is None:
                rng = clip_rng(contest.seed, user_id, stream="serve")
                self._serve_rngs[key] = rng
            clip_id = contest.pool[rng.randrange(len(contest.pool))]
        return self._clips[clip_id]

    # ----------------------------------------------------- submission

    def _lock_for(self, table: Dict[str, threading.Lock], key: str) -> threading.Lock:
        with self._registry_lock:
            lock = table.get(key)
            if lock is None:
                lock = threading.Lock()
                table[key] = lock
            return lock

    def submit_opinion(
        self,
        contest_id: str,
        user_id: str,
        clip_id: str,
        label: ClassLabel,
        submitted_at: Optional[float] = None,
    ) -> Feedback:
        with self._registry_lock:
            contest = self._contest(contest_id)
            if contest.status != STATUS_OPEN:
                raise ContestClosed(f"contest {contest_id} is closed")
            clip = self._clips.get(clip_id)
            pool_set = self._pool_sets[contest_id]
        if clip is None or clip_id not in pool_set:
            if clip is not None and clip.excluded:
                raise ClipExcluded(f"clip {clip_id!r} is excluded from contests")
            raise ClipNotInPool(f"clip {clip_id!r} is not in contest {contest_id}")
        if clip.excluded:
            raise ClipExcluded(f"clip {clip_id!r} is excluded from contests")

        user_lock = self._lock_for(self._user_locks, user_id)
        clip_lock = self._lock_for(self._clip_locks, clip_id)
        timestamp = time.time() if submitted_at is None else submitted_at
        with user_lock:
            kind = self._user_kind(user_id)
            with clip_lock:
                entry, feedback, new_state, new_quality = self._evaluate(
                    contest, kind, clip, user_id, label, timestamp
                )
                with self._log_lock:
                    opinion_id = self._next_opinion_id
                    self._next_opinion_id += 1
                    entry = replace(entry, opinion_id=opinion_id)
                    self._entries.append(entry)
                    if new_state is not None:
                        self._consensus[clip_id] = new_state
                    if new_quality is not None:
                        self._quality[(contest_id, user_id)] = new_quality
        return replace(feedback, opinion_id=opinion_id)

    def _evaluate(
        self,
        contest: Contest,
        kind: UserKind,
        clip: Clip,
        user_id: str,
        label: ClassLabel,
        timestamp: float,
    ) -> Tuple[OpinionLogEntry, Feedback, ConsensusState, Optional[UserQuality]]:
        """Compute everything a submission changes, without publishing.

        Caller holds the user and clip locks. Eligibility, the score
        source, and the feedback disposition are all taken from the
        pre-update state: the opinion that first completes a consensus
        is itself answered with Recorded, and only later submitters see
        the revealed label.
        """
        contest_id = contest.contest_id
        clip_id = clip.clip_id
        state_before = self._consensus.get(clip_id, ConsensusState(clip_id=clip_id))
        is_expert = kind is UserKind.EXPERT
        q_before = self._quality.get((contest_id, user_id)) or UserQuality(
            user_id=user_id, capacity=contest.policy.window,
            min_scored=self.config.min_scored,
        )
        trailing_before = None if is_expert else q_before.trailing_accuracy
        eligible = (not is_expert) and is_skilled(q_before, contest.policy.skill_threshold)

        if clip.role is ClipRole.TRAINING and clip.reference_label is not None:
            disposition, revealed = DISPOSITION_REVEALED, clip.reference_label
        elif clip.role is ClipRole.UNLABELED and state_before.consensus_label is not None:
            disposition, revealed = DISPOSITION_REVEALED, state_before.consensus_label
        else:
            disposition, revealed = DISPOSITION_RECORDED, None

        new_quality = None
        q_after = q_before
        if not is_expert:
            source = score_source_for(clip, state_before)
            if source is not None:
                q_after = record_outcome(q_before, label == source)
                new_quality = q_after

        opinion = Opinion(
            opinion_id=0, user_id=user_id, clip_id=clip_id, label=label,
            submitted_at=timestamp,
            trailing_accuracy_at_submission=trailing_before, eligible=eligible,
        )
        tie_rng = self._tie_rngs.get(clip_id)
        if tie_rng is None:
            tie_rng = clip_rng(self.config.engine_seed, clip_id, stream="consensus")
            self._tie_rngs[clip_id] = tie_rng
        new_state = update_consensus(
            state_before, opinion, contest.policy, tie_rng, excluded=clip.excluded
        )

        entry = OpinionLogEntry(
            opinion_id=0, contest_id=contest_id, user_id=user_id, user_kind=kind,
            clip_id=clip_id, label=label, submitted_at=timestamp,
            trailing_accuracy_at_submission=trailing_before, eligible=eligible,
            disposition=disposition, revealed_label=revealed,
        )
        feedback = Feedback(
            opinion_id=0, disposition=disposition, revealed_label=revealed,
            trailing_accuracy=None if is_expert else q_after.trailing_accuracy,
            scored_count=0 if is_expert else q_after.scored_count,
        )
        return entry, feedback, new_state, new_quality

    # ------------------------------------------------------ leaderboard

    def leaderboard(self, contest_id: str) -> List[LeaderboardRow]:
        with self._registry_lock:
            self._contest(contest_id)
        with self._log_lock:
            rows = []
            for (cid, user_id), quality in self._quality.items():
                if cid != contest_id:
                    continue
                score = quality.trailing_accuracy
                if score is None or quality.scored_count < self.config.min_scored:
                    continue
                rows.append(LeaderboardRow(
                    user_id=user_id, score=score, scored_count=quality.scored_count,
                ))
        rows.sort(key=lambda r: (-r.score, -r.scored_count, r.user_id))
        return rows

    def settle_prizes(self, contest_id: str) -> List[PrizeAward]:
        """Distribute the prize pool over the final leaderboard with
        1/rank weights, each award capped and floored to whole cents."""
        with self._registry_lock:
            contest = self._contest(contest_id)
            if contest.status != STATUS_CLOSED:
                raise ContestStillOpen(f"contest {contest_id} is still open")
            cached = self._ledgers.get(contest_id)
        if cached is not None:
            return list(cached)
        rows = self.leaderboard(contest_id)
        awards = []
        if rows:
            weights = [1.0 / rank for rank in range(1, len(rows) + 1)]
            total = sum(weights)
            for rank, (row, weight) in enumerate(zip(rows, weights), start=1):
                share = contest.prize_pool * weight / total
                amount = math.floor(min(share, self.config.prize_cap) * 100) / 100
                awards.append(PrizeAward(
                    user_id=row.user_id, rank=rank, score=row.score, amount=amount,
                ))
        with self._registry_lock:
            self._ledgers[contest_id] = tuple(awards)
        return awards

    # -------------------------------------------------------- queries

    def consensus_state(self, clip_id: str) -> ConsensusState:
        with self._registry_lock:
            if clip_id not in self._clips:
                raise UnknownClip(f"clip {clip_id!r} not registered")
        with self._log_lock:
            return self._consensus.get(clip_id, ConsensusState(clip_id=clip_id))

    def consensus_states(self) -> Dict[str, ConsensusState]:
        with self._log_lock:
            return dict(self._consensus)

    def quality_snapshot(self, contest_id: str, user_id: str) -> UserQuality:
        with self._log_lock:
            return self._quality.get(
                (contest_id, user_id),
                UserQuality(user_id=user_id, capacity=self.config.policy.window,
                            min_scored=self.config.min_scored),
            )

    def log_entries(self) -> List[OpinionLogEntry]:
        with self._log_lock:
            return list(self._entries)

    # -------------------------------------------------------- exports

    def export_consensus_csv(self) -> str:
        with self._log_lock:
            states = list(self._consensus.values())
        return consensus_csv(states)

    def export_leaderboard_csv(self, contest_id: str) -> str:
        rows = self.leaderboard(contest_id)
        lines = ["rank,user_id,score,scored_count"]
        for rank, row in enumerate(rows, start=1):
            lines.append(f"{rank},{row.user_id},{row.score:.6f},{row.scored_count}")
        return "\n".join(lines) + "\n"

    def export_quality_csv(self, contest_id: str) -> str:
        with self._log_lock:
            snapshots = [q for (cid, _), q in self._quality.items() if cid == contest_id]
        return quality_csv(snapshots, self.config.policy.skill_threshold)

    def export_log(self) -> str:
        with self._log_lock:
            return "".join(entry_to_json(e) + "\n" for e in self._entries)

    def snapshot_dataset(self) -> str:
        """JSON document of clips and users, sufficient for replay."""
        with self._registry_lock:
            clips = [{
                "clip_id": c.clip_id,
                "patient_id": c.patient_id,
                "role": c.role.value,
                "reference_label": None if c.reference_label is None else c.reference_label.slug,
                "excluded": c.excluded,
                "frame_rate_hz": c.frame_rate_hz,
                "media_uri": c.media_uri,
            } for c in sorted(self._clips.values(), key=lambda c: c.clip_id)]
            users = [{"user_id": u.user_id, "kind": u.kind.value}
                     for u in sorted(self._users.values(), key=lambda u: u.user_id)]
        return json.dumps({"clips": clips, "users": users}, indent=2) + "\n"

    def snapshot_contests(self) -> str:
        with self._registry_lock:
            contests = [{
                "contest_id": c.contest_id,
                "pool": list(c.pool),
                "policy": {
                    "min_eligible_opinions": c.policy.min_eligible_opinions,
                    "min_agreement": c.policy.min_agreement,
                    "skill_threshold": c.policy.skill_threshold,
                    "window": c.policy.window,
                    "one_opinion_per_user": c.policy.one_opinion_per_user,
                },
                "prize_pool": c.prize_pool,
                "seed": c.seed,
                "status": c.status,
            } for c in sorted(self._contests.values(), key=lambda c: c.contest_id)]
        return json.dumps({
            "engine_seed": self.config.engine_seed, "contests": contests,
        }, indent=2) + "\n"

    # --------------------------------------------------------- replay

    @classmethod
    def replay(
        cls,
        dataset_json: str,
        contests_json: str,
        log_lines: Iterable[str],
        config: ServiceConfig = DEFAULT_CONFIG,
    ) -> "ContestEngine":
        """Rebuild a live engine from its snapshot documents and log.

        Every entry is recomputed through the same submission path and
        must agree with what was logged (eligibility, trailing-accuracy
        snapshot, disposition, revealed label); any divergence raises
        CorruptLog. Contest statuses are applied after the fold so
        opinions accepted before a close replay cleanly.
        """
        dataset = json.loads(dataset_json)
        contests_doc = json.loads(contests_json)
        config = replace(config, engine_seed=int(contests_doc["engine_seed"]))
        engine = cls(config)

        clips = {}
        for record in dataset.get("clips", []):
            reference = record.get("reference_label")
            clips[record["clip_id"]] = Clip(
                clip_id=record["clip_id"],
                patient_id=record["patient_id"],
                role=ClipRole(record.get("role", "unlabeled")),
                reference_label=None if reference is None else ClassLabel.from_slug(reference),
                excluded=bool(record.get("excluded", False)),
                frame_rate_hz=float(record.get("frame_rate_hz", 30.0)),
                media_uri=str(record.get("media_uri", "")),
            )
        engine.register_clips(clips)
        for record in dataset.get("users", []):
            engine.register_user(User(
                user_id=record["user_id"], kind=UserKind(record.get("kind", "crowd")),
            ))

        final_status = {}
        for record in contests_doc.get("contests", []):
            policy = ConsensusPolicy(**record["policy"])
            contest = Contest(
                contest_id=record["contest_id"],
                pool=tuple(record["pool"]),
                policy=policy,
                prize_pool=float(record["prize_pool"]),
                seed=int(record["seed"]),
            )
            engine._contests[contest.contest_id] = contest
            engine._pool_sets[contest.contest_id] = frozenset(contest.pool)
            final_status[contest.contest_id] = record.get("status", STATUS_OPEN)

        last_id = 0
        for line_no, line in enumerate(log_lines, start=1):
            if not line.strip():
                continue
            logged = next(iter(read_log([line])), None)
            if logged is None:
                continue
            if logged.opinion_id <= last_id:
                raise CorruptLog(line_no, f"opinion_id {logged.opinion_id} not increasing")
            last_id = logged.opinion_id
            engine._replay_entry(logged, line_no)

        for contest_id, status in final_status.items():
            if status == STATUS_CLOSED:
                engine.close_contest(contest_id)
        return engine

    def _replay_entry(self, logged: OpinionLogEntry, line_no: int) -> None:
        contest = self._contests.get(logged.contest_id)
        if contest is None:
            raise CorruptLog(line_no, f"unknown contest {logged.contest_id!r}")
        clip = self._clips.get(logged.clip_id)
        if clip is None:
            raise CorruptLog(line_no, f"unknown clip {logged.clip_id!r}")
        if logged.clip_id not in self._pool_sets[logged.contest_id]:
            raise CorruptLog(line_no, f"clip {logged.clip_id!r} not in contest pool")
        known = self._users.get(logged.user_id)
        if known is None:
            self._users[logged.user_id] = User(user_id=logged.user_id, kind=logged.user_kind)
        elif known.kind is not logged.user_kind:
            raise CorruptLog(line_no, f"user {logged.user_id!r} kind mismatch")

        entry, _, new_state, new_quality = self._evaluate(
            contest, logged.user_kind, clip, logged.user_id, logged.label,
            logged.submitted_at,
        )
        recomputed = replace(entry, opinion_id=logged.opinion_id)
        if recomputed != logged:
            raise CorruptLog(
                line_no,
                "entry disagrees with recomputed state "
                f"(logged eligible={logged.eligible} disposition={logged.disposition!r})",
            )
        self._entries.append(logged)
        self._next_opinion_id = logged.opinion_id + 1
        self._consensus[logged.clip_id] = new_state
        if new_quality is not None:
            self._quality[(logged.contest_id, logged.user_id)] = new_quality
