"""Synthetic datasets, expert panels, and learning crowd labelers, plus
an end-to-end experiment driver over the contest engine.

The generative model, in closed form:

  p_correct = clamp((a0 + (amax - a0) * (1 - exp(-n_feedback / tau)))
              * (1 - difficulty), 1/3, 1)

On an incorrect draw the labeler picks the severity-adjacent class with
probability beta and the remaining class with 1 - beta. The middle class
has two adjacent neighbours, so its errors split beta/2 to each side plus
(1 - beta)/2 to each side, i.e. exactly 1/2 per side for every beta.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from . import analysis
from .config import ServiceConfig
from .consensus import (
    ConsensusPolicy,
    ReferenceStandard,
    agreement_level,
    build_leave_one_out_references,
    build_reference_standard,
    clip_rng,
    label_counts,
    supermajority_reached,
)
from .core import ALL_LABELS, ClassLabel, Clip, ClipRole, User, UserKind
from .engine import ContestEngine
from .errors import BadMix, ZeroVariance
from .ingest import ClipManifest, ManifestRow, partition_by_patient, select_and_exclude

DEFAULT_TAU = 30.0
DEFAULT_ADJACENCY_BIAS = 0.75
DEFAULT_EXPERT_RANGE = (0.77, 0.91)
DEFAULT_BASE_RANGE = (0.45, 0.75)
DEFAULT_UPLIFT = 0.15
DEFAULT_MAX_ACCURACY_CAP = 0.92


@dataclass(frozen=True, slots=True)
class ClipProfile:
    """Ground truth plus an ambiguity knob; difficulty multiplies accuracy
    down, so 0 is unambiguous and values near 1 are guesswork."""

    true_label: ClassLabel
    difficulty: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.difficulty < 1.0):
            raise ValueError(f"difficulty {self.difficulty} outside [0, 1)")


@dataclass(frozen=True, slots=True)
class LabelerProfile:
    """Accuracy model for one synthetic labeler; a0 == amax means no
    learning (used for experts)."""

    base_accuracy: float
    max_accuracy: float
    learning_time_constant: float = DEFAULT_TAU
    adjacency_error_bias: float = DEFAULT_ADJACENCY_BIAS

    def __post_init__(self):
        if not (1 / 3 < self.base_accuracy <= 1.0):
            raise ValueError(f"base_accuracy {self.base_accuracy} outside (1/3, 1]")
        if not (self.base_accuracy <= self.max_accuracy <= 1.0):
            raise ValueError("max_accuracy must lie in [base_accuracy, 1]")
        if self.learning_time_constant <= 0:
            raise ValueError("learning_time_constant must be positive")
        if not (0.0 <= self.adjacency_error_bias <= 1.0):
            raise ValueError("adjacency_error_bias outside [0, 1]")


def p_correct(profile: LabelerProfile, clip: ClipProfile, n_feedback: int) -> float:
    """Closed-form correctness probability; the clamp floor is chance."""
    learned = profile.base_accuracy + (profile.max_accuracy - profile.base_accuracy) * (
        1.0 - math.exp(-n_feedback / profile.learning_time_constant)
    )
    return min(1.0, max(1.0 / 3.0, learned * (1.0 - clip.difficulty)))


def answer(
    profile: LabelerProfile,
    clip: ClipProfile,
    n_feedback: int,
    rng: random.Random,
) -> ClassLabel:
    """Draw one opinion; all randomness comes from ``rng``."""
    if n_feedback < 0:
        raise ValueError("n_feedback must be >= 0")
    if rng.random() < p_correct(profile, clip, n_feedback):
        return clip.true_label
    truth = clip.true_label
    beta = profile.adjacency_error_bias
    if truth is ClassLabel.DISCRETE_BLINES:
        # both wrong classes are adjacent: beta/2 + (1-beta)/2 = 1/2 each
        return ClassLabel.NO_BLINES if rng.random() < 0.5 else ClassLabel.CONFLUENT_BLINES
    adjacent = ClassLabel.DISCRETE_BLINES
    far = ClassLabel.CONFLUENT_BLINES if truth is ClassLabel.NO_BLINES else ClassLabel.NO_BLINES
    return adjacent if rng.random() < beta else far


def sample_expert_panel(
    n: int = 6,
    accuracy_range: Tuple[float, float] = DEFAULT_EXPERT_RANGE,
    seed: int = 0,
    adjacency_error_bias: float = DEFAULT_ADJACENCY_BIAS,
) -> List[LabelerProfile]:
    """Non-learning profiles at evenly spaced points across the range.

    Placement is deterministic (stable across seeds by construction);
    ``seed`` is accepted for interface symmetry with the crowd sampler.
    """
    if n < 1:
        raise ValueError("panel size must be >= 1")
    lo, hi = accuracy_range
    if n == 1:
        points = [(lo + hi) / 2.0]
    else:
        points = [lo + (hi - lo) * i / (n - 1) for i in range(n)]
    return [
        LabelerProfile(
            base_accuracy=a, max_accuracy=a,
            adjacency_error_bias=adjacency_error_bias,
        )
        for a in points
    ]


@dataclass(frozen=True, slots=True)
class DifficultySpec:
    """Two-bucket difficulty draw: easy clips near zero, a hard tail
    providing the ambiguous cases."""

    easy_fraction: float = 0.7
    easy_range: Tuple[float, float] = (0.0, 0.05)
    hard_range: Tuple[float, float] = (0.12, 0.45)

    def draw(self, rng: random.Random) -> float:
        lo, hi = self.easy_range if rng.random() < self.easy_fraction else self.hard_range
        return rng.uniform(lo, hi)


def generate_dataset(
    n_clips: int,
    class_mix: Tuple[float, float, float],
    difficulty: DifficultySpec,
    seed: int,
    role: ClipRole = ClipRole.UNLABELED,
    id_prefix: str = "clip",
    patient_prefix: str = "patient",
    patient_group_size: int = 12,
) -> List[Tuple[Clip, ClipProfile]]:
    """Draw clips with the given class mix and difficulty distribution;
    consecutive clips share a patient in groups of ``patient_group_size``."""
    if abs(sum(class_mix) - 1.0) > 1e-9 or any(m < 0 for m in class_mix):
        raise BadMix(f"class mix {class_mix} must be nonnegative and sum to 1")
    if patient_group_size < 1:
        raise ValueError("patient_group_size must be >= 1")
    rng = clip_rng(seed, id_prefix, stream="sim-dataset")
    out = []
    labels = rng.choices(ALL_LABELS, weights=class_mix, k=n_clips)
    for i in range(n_clips):
        clip_id = f"{id_prefix}-{i:05d}"
        clip = Clip(
            clip_id=clip_id,
            patient_id=f"{patient_prefix}-{i // patient_group_size:04d}",
            role=role,
            frame_rate_hz=rng.uniform(24.0, 40.0),
            media_uri=f"/media/{clip_id}.mp4",
        )
        out.append((clip, ClipProfile(true_label=labels[i], difficulty=difficulty.draw(rng))))
    return out


def sample_crowd(
    n_users: int,
    seed: int,
    base_accuracy_range: Tuple[float, float] = DEFAULT_BASE_RANGE,
    uplift: float = DEFAULT_UPLIFT,
    max_accuracy_cap: float = DEFAULT_MAX_ACCURACY_CAP,
    learning_time_constant: float = DEFAULT_TAU,
    adjacency_error_bias: float = DEFAULT_ADJACENCY_BIAS,
) -> Dict[str, LabelerProfile]:
    """Heterogeneous learning labelers keyed by user id."""
    rng = clip_rng(seed, "crowd", stream="sim-crowd")
    lo, hi = base_accuracy_range
    users = {}
    for i in range(n_users):
        a0 = rng.uniform(lo, hi)
        amax = max(a0, min(a0 + uplift, max_accuracy_cap))
        users[f"user-{i:04d}"] = LabelerProfile(
            base_accuracy=a0,
            max_accuracy=amax,
            learning_time_constant=learning_time_constant,
            adjacency_error_bias=adjacency_error_bias,
        )
    return users


# ----------------------------------------------------- experiment config


@dataclass(frozen=True, slots=True)
class ExperimentConfig:
    """Everything run_experiment needs, JSON round-trippable."""

    n_training: int = 60
    n_test: int = 60
    n_unlabeled: int = 20
    class_mix: Tuple[float, float, float] = (0.70, 0.18, 0.12)
    difficulty: DifficultySpec = field(default_factory=DifficultySpec)
    patient_group_size: int = 12
    n_experts: int = 6
    expert_accuracy_range: Tuple[float, float] = DEFAULT_EXPERT_RANGE
    expert_adjacency_bias: float = DEFAULT_ADJACENCY_BIAS
    n_users: int = 40
    base_accuracy_range: Tuple[float, float] = DEFAULT_BASE_RANGE
    uplift: float = DEFAULT_UPLIFT
    max_accuracy_cap: float = DEFAULT_MAX_ACCURACY_CAP
    learning_time_constant: float = DEFAULT_TAU
    adjacency_error_bias: float = DEFAULT_ADJACENCY_BIAS
    mean_opinions_per_user: float = 80.0
    min_opinions_per_user: int = 5
    policy: ConsensusPolicy = field(default_factory=ConsensusPolicy)
    prize_pool: float = 1100.0
    prize_cap: float = 25.0
    expected_plateau: float = 0.80
    curve_k_max: int = 15
    curve_samples: int = 1000

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, DifficultySpec):
                value = {
                    "easy_fraction": value.easy_fraction,
                    "easy_range": list(value.easy_range),
                    "hard_range": list(value.hard_range),
                }
            elif isinstance(value, ConsensusPolicy):
                value = {
                    "min_eligible_opinions": value.min_eligible_opinions,
                    "min_agreement": value.min_agreement,
                    "skill_threshold": value.skill_threshold,
                    "window": value.window,
                    "one_opinion_per_user": value.one_opinion_per_user,
                }
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ExperimentConfig":
        kwargs = dict(doc)
        if "difficulty" in kwargs and isinstance(kwargs["difficulty"], Mapping):
            d = kwargs["difficulty"]
            kwargs["difficulty"] = DifficultySpec(
                easy_fraction=d.get("easy_fraction", 0.7),
                easy_range=tuple(d.get("easy_range", (0.0, 0.05))),
                hard_range=tuple(d.get("hard_range", (0.12, 0.45))),
            )
        if "policy" in kwargs and isinstance(kwargs["policy"], Mapping):
            kwargs["policy"] = ConsensusPolicy(**kwargs["policy"])
        for key in ("class_mix", "expert_accuracy_range", "base_accuracy_range"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


def study_profile_config() -> ExperimentConfig:
    """Full-scale profile: 195/198 selected clips, a 6-expert panel whose
    observed full-panel concordances span roughly 0.77-0.91 (mean 0.85),
    426 users, about 40 eligible opinions per test clip.

    Calibration notes. Panel accuracy is intrinsic per-opinion accuracy,
    which sits above observed concordance because hard clips drag every
    grader down; (0.86, 0.97) intrinsic lands the observed span. The
    crowd band plus uplift is set so the all-crowd learning curve
    plateaus near ``expected_plateau`` while consensus stays inside
    [mean expert - 3 pts, mean expert + 10 pts] against the full panel.
    The 80/20 easy/hard difficulty split with a deep hard band keeps
    per-class AUC above 0.90 with the middle class lowest.
    """
    return ExperimentConfig(
        n_training=195,
        n_test=198,
        n_unlabeled=60,
        difficulty=DifficultySpec(
            easy_fraction=0.80,
            easy_range=(0.0, 0.04),
            hard_range=(0.35, 0.45),
        ),
        n_experts=6,
        expert_accuracy_range=(0.86, 0.97),
        expert_adjacency_bias=0.95,
        n_users=426,
        base_accuracy_range=(0.63, 0.87),
        uplift=0.20,
        max_accuracy_cap=0.93,
        adjacency_error_bias=0.95,
        mean_opinions_per_user=110.0,
        min_opinions_per_user=5,
        expected_plateau=0.80,
    )


def study_manifest_fixture(seed: int = 0) -> ClipManifest:
    """A 2,391-clip, 203-patient manifest whose no-lung flags land on
    exactly 5 default-selection training picks and 2 test picks."""
    rng = clip_rng(seed, "manifest", stream="sim-fixture")
    patients = [f"pt-{i:03d}" for i in range(203)]
    extras = set(rng.sample(range(203), 2391 - 203 * 11))
    rows = []
    counter = 0
    for idx, patient in enumerate(patients):
        for _ in range(11 + (1 if idx in extras else 0)):
            clip_id = f"clip-{counter:04d}"
            rows.append(ManifestRow(
                clip_id=clip_id,
                patient_id=patient,
                media_uri=f"/media/{clip_id}.mp4",
                frame_rate_hz=30.0,
                no_lung_flagged_by=(),
            ))
            counter += 1
    manifest = ClipManifest(rows=tuple(rows))
    plan = partition_by_patient(manifest, seed)
    plan = select_and_exclude(plan, manifest, n_per_set=200, seed=seed)
    victims = set(rng.sample(sorted(plan.training_clips), 5))
    victims |= set(rng.sample(sorted(plan.test_clips), 2))
    flagged = tuple(
        row if row.clip_id not in victims else replace(row, no_lung_flagged_by=("reviewer-1",))
        for row in rows
    )
    return ClipManifest(rows=flagged)


# --------------------------------------------------------- experiment


def _geometric(rng: random.Random, mean: float) -> int:
    """Geometric draw (support 1, 2, ...) with the given mean."""
    p = 1.0 / max(mean, 1.0)
    u = rng.random()
    return max(1, math.ceil(math.log(1.0 - u) / math.log(1.0 - p)))


@dataclass(frozen=True, slots=True)
class World:
    """The generated inputs to one experiment: clips, their hidden
    profiles, the expert opinions, and the reference standards."""

    clips: Dict[str, Clip]
    profiles: Dict[str, ClipProfile]
    expert_opinions: Dict[str, Dict[str, ClassLabel]]
    full_reference: "ReferenceStandard"
    loo_references: Tuple["ReferenceStandard", ...]


def build_world(config: ExperimentConfig, seed: int) -> World:
    """Generate clips and expert opinions, then derive the references."""
    datasets = {
        ClipRole.TRAINING: generate_dataset(
            config.n_training, config.class_mix, config.difficulty, seed,
            role=ClipRole.TRAINING, id_prefix="train", patient_prefix="pt-a",
            patient_group_size=config.patient_group_size,
        ),
        ClipRole.TEST: generate_dataset(
            config.n_test, config.class_mix, config.difficulty, seed,
            role=ClipRole.TEST, id_prefix="test", patient_prefix="pt-b",
            patient_group_size=config.patient_group_size,
        ),
        ClipRole.UNLABELED: generate_dataset(
            config.n_unlabeled, config.class_mix, config.difficulty, seed,
            role=ClipRole.UNLABELED, id_prefix="open", patient_prefix="pt-c",
            patient_group_size=config.patient_group_size,
        ),
    }
    clips: Dict[str, Clip] = {}
    profiles: Dict[str, ClipProfile] = {}
    for pairs in datasets.values():
        for clip, profile in pairs:
            clips[clip.clip_id] = clip
            profiles[clip.clip_id] = profile

    # expert phase: one opinion per expert per training/test clip
    panel = sample_expert_panel(
        config.n_experts, config.expert_accuracy_range, seed,
        adjacency_error_bias=config.expert_adjacency_bias,
    )
    expert_ids = [f"expert-{i}" for i in range(config.n_experts)]
    expert_rngs = {eid: clip_rng(seed, eid, stream="sim-expert") for eid in expert_ids}
    reference_clips = sorted(
        clip.clip_id for clip in clips.values()
        if clip.role in (ClipRole.TRAINING, ClipRole.TEST)
    )
    expert_opinions: Dict[str, Dict[str, ClassLabel]] = {}
    for clip_id in reference_clips:
        per_clip = {}
        for eid, profile in zip(expert_ids, panel):
            per_clip[eid] = answer(profile, profiles[clip_id], 0, expert_rngs[eid])
        expert_opinions[clip_id] = per_clip

    return World(
        clips=clips,
        profiles=profiles,
        expert_opinions=expert_opinions,
        full_reference=build_reference_standard(expert_opinions, seed),
        loo_references=tuple(build_leave_one_out_references(expert_opinions, seed)),
    )


def run_experiment(config: ExperimentConfig, seed: int) -> Tuple[List[str], dict]:
    """Drive the full pipeline and return (opinion log lines, report).

    Stages: generate clips, collect one opinion per expert per
    training/test clip, build full and leave-one-out references, replay
    the expert opinions through the engine, run the learning crowd, then
    compute every report statistic. Deterministic given (config, seed).
    """
    world = build_world(config, seed)
    clips = world.clips
    profiles = world.profiles
    expert_opinions = world.expert_opinions
    full_reference = world.full_reference
    loo_references = world.loo_references
    expert_ids = [f"expert-{i}" for i in range(config.n_experts)]
    reference_clips = sorted(
        clip.clip_id for clip in clips.values()
        if clip.role in (ClipRole.TRAINING, ClipRole.TEST)
    )

    # engine setup; references feed training feedback and scoring
    service = ServiceConfig(
        policy=config.policy,
        min_scored=10,
        prize_pool=config.prize_pool,
        prize_cap=config.prize_cap,
        engine_seed=seed,
    )
    engine = ContestEngine(service)
    engine.register_clips(clips)
    engine.set_reference_labels(full_reference.labels)
    for eid in expert_ids:
        engine.register_user(User(user_id=eid, kind=UserKind.EXPERT))
    contest_id = engine.create_contest(
        sorted(clips), prize_pool=config.prize_pool, seed=seed
    )

    # replay the recorded expert opinions through the engine so they land
    # in the log (raw counts only; experts are never consensus-eligible);
    # each expert works through the clips in their own shuffled order
    expert_orders = {}
    for eid in expert_ids:
        order = list(reference_clips)
        clip_rng(seed, eid, stream="sim-expert-order").shuffle(order)
        expert_orders[eid] = order
    t = 0.0
    for i in range(len(reference_clips)):
        for eid in expert_ids:
            clip_id = expert_orders[eid][i]
            t += 1.0
            engine.submit_opinion(contest_id, eid, clip_id, expert_opinions[clip_id][eid],
                                  submitted_at=t)

    # crowd phase: a shuffled global schedule of per-user opinion budgets
    crowd = sample_crowd(
        config.n_users, seed,
        base_accuracy_range=config.base_accuracy_range,
        uplift=config.uplift,
        max_accuracy_cap=config.max_accuracy_cap,
        learning_time_constant=config.learning_time_constant,
        adjacency_error_bias=config.adjacency_error_bias,
    )
    schedule_rng = clip_rng(seed, "schedule", stream="sim-crowd")
    schedule: List[str] = []
    for user_id in crowd:
        volume = max(config.min_opinions_per_user,
                     _geometric(schedule_rng, config.mean_opinions_per_user))
        schedule.extend([user_id] * volume)
    schedule_rng.shuffle(schedule)
    user_rngs = {uid: clip_rng(seed, uid, stream="sim-crowd") for uid in crowd}
    n_feedback = {uid: 0 for uid in crowd}
    for user_id in schedule:
        clip = engine.next_clip(contest_id, user_id)
        label = answer(crowd[user_id], profiles[clip.clip_id],
                       n_feedback[user_id], user_rngs[user_id])
        t += 1.0
        feedback = engine.submit_opinion(contest_id, user_id, clip.clip_id, label,
                                         submitted_at=t)
        if feedback.disposition == "revealed":
            n_feedback[user_id] += 1

    engine.close_contest(contest_id)
    awards = engine.settle_prizes(contest_id)

    report = _build_report(
        config, seed, engine, contest_id, profiles,
        expert_opinions, full_reference, loo_references, awards,
    )
    return engine.export_log().splitlines(), report


def _build_report(config, seed, engine, contest_id, profiles,
                  expert_opinions, full_reference, loo_references, awards) -> dict:
    test_ids = sorted(c for c, clip in engine_clips(engine).items()
                      if clip.role is ClipRole.TEST)
    ref_test = {cid: full_reference.labels[cid] for cid in test_ids}
    truth_test = {cid: profiles[cid].true_label for cid in test_ids}
    states = engine.consensus_states()
    states_test = {cid: states[cid] for cid in test_ids}
    crowd_labels = analysis.crowd_labels_from_states(states_test, test_ids, seed)

    entries = engine.log_entries()
    crowd_entries = [e for e in entries if e.user_kind is not UserKind.EXPERT]
    eligible_entries = [e for e in crowd_entries if e.eligible]
    eligible_test = [e for e in eligible_entries if e.clip_id in ref_test]

    # concordance per predictor
    crowd_report = analysis.concordance_report(crowd_labels, ref_test)
    expert_full = {}
    expert_loo = {}
    crowd_loo = {}
    for i, (eid, loo) in enumerate(zip(sorted({e for ops in expert_opinions.values()
                                               for e in ops}), loo_references)):
        labels = {cid: expert_opinions[cid][eid] for cid in test_ids}
        expert_full[eid] = analysis.concordance(labels, ref_test)
        loo_test = {cid: loo.labels[cid] for cid in test_ids}
        expert_loo[eid] = analysis.concordance(labels, loo_test)
        crowd_loo[eid] = analysis.concordance(crowd_labels, loo_test)

    expert_full_mean, expert_full_sem = analysis.mean_sem(list(expert_full.values()))
    expert_loo_mean, _ = analysis.mean_sem(list(expert_loo.values()))
    crowd_loo_mean, _ = analysis.mean_sem(list(crowd_loo.values()))
    try:
        loo_t = analysis.paired_t_test(
            [crowd_loo[eid] - expert_loo[eid] for eid in expert_loo]
        )
    except ZeroVariance:
        loo_t = None

    # opinions-needed curve over eligible test opinions
    per_clip: Dict[str, List[ClassLabel]] = {cid: [] for cid in test_ids}
    for e in eligible_test:
        per_clip[e.clip_id].append(e.label)
    curve = None
    if all(per_clip[cid] for cid in test_ids):
        curve = analysis.accuracy_vs_opinion_count(
            per_clip, ref_test, k_max=config.curve_k_max,
            n_samples=config.curve_samples, seed=seed,
        )

    # one ROC per class from eligible vote fractions; None when
    # the class has no positives or negatives among voted-on clips
    roc = {}
    for label in ALL_LABELS:
        fractions = analysis.vote_fractions_for(
            {cid: states_test[cid].eligible_counts for cid in test_ids
             if sum(states_test[cid].eligible_counts) > 0},
            label,
        )
        usable_ref = {cid: ref_test[cid] for cid in fractions}
        classes = set(usable_ref.values())
        if label in classes and classes - {label}:
            roc[label.slug] = analysis.roc_per_class(fractions, usable_ref, label)
        else:
            roc[label.slug] = None

    # confusion matrix and learning curves
    confusion = analysis.confusion_matrix(crowd_labels, ref_test)
    learning = analysis.learning_curves(
        entries, ref_test,
        window=config.policy.window,
        skilled_threshold=config.policy.skill_threshold,
    )

    # agreement correlation and stratification
    pairs = []
    for cid in test_ids:
        state = states_test[cid]
        if sum(state.eligible_counts) == 0:
            continue
        expert_agreement = agreement_level(
            label_counts(expert_opinions[cid].values())
        )
        pairs.append((state.agreement, expert_agreement))
    pearson = None
    if len(pairs) >= 3:
        try:
            pearson = analysis.pearson_r([p[0] for p in pairs], [p[1] for p in pairs])
        except ZeroVariance:
            pearson = None
    stratified, stratified_n = analysis.agreement_stratified_concordance(
        states_test, ref_test, agreement_cut=0.8, seed=seed,
    )

    supermajority = sum(
        1 for cid in test_ids
        if sum(states_test[cid].eligible_counts) > 0
        and supermajority_reached(states_test[cid].eligible_counts)
    )

    eligible_users = {e.user_id for e in eligible_entries}
    report = {
        "seed": seed,
        "contest_id": contest_id,
        "config": config.to_dict(),
        "counts": {
            "clips": len(engine_clips(engine)),
            "test_clips": len(test_ids),
            "opinions": len(entries),
            "crowd_opinions": len(crowd_entries),
            "eligible_opinions": len(eligible_entries),
            "eligible_per_test_clip": (len(eligible_test) / len(test_ids)) if test_ids else 0.0,
            "users": len({e.user_id for e in crowd_entries}),
            "eligible_users": len(eligible_users),
        },
        "concordance": {
            "crowd_full": crowd_report.overall,
            "crowd_balanced": crowd_report.balanced,
            "crowd_per_class": {label.slug: value for label, value in
                                crowd_report.per_class.items()},
            "crowd_vs_truth": analysis.concordance(crowd_labels, truth_test),
            "reference_vs_truth": analysis.concordance(ref_test, truth_test),
            "expert_full": expert_full,
            "expert_full_mean": expert_full_mean,
            "expert_full_sem": expert_full_sem,
            "expert_loo": expert_loo,
            "expert_loo_mean": expert_loo_mean,
            "crowd_loo": crowd_loo,
            "crowd_loo_mean": crowd_loo_mean,
            "loo_paired_t": None if loo_t is None else
                            {"t": loo_t.t, "p": loo_t.p_value},
        },
        "supermajority_rate": supermajority / len(test_ids) if test_ids else 0.0,
        "curve": None if curve is None else [
            [k, acc, sem] for (k, acc, sem) in curve.points
        ],
        "roc": {
            slug: None if r is None else {"auc": r.auc, "n_points": len(r.points)}
            for slug, r in roc.items()
        },
        "confusion": [list(row) for row in confusion],
        "learning": {
            cohort: [[p.index, p.mean, p.sem, p.n_users] for p in points]
            for cohort, points in learning.items()
        },
        "agreement": {
            "pearson_r": None if pearson is None else pearson.r,
            "pearson_p": None if pearson is None else pearson.p_value,
            "stratified_cut": 0.8,
            "stratified_concordance": stratified,
            "stratified_n": stratified_n,
        },
        "prizes": {
            "total": round(sum(a.amount for a in awards), 2),
            "max_award": max((a.amount for a in awards), default=0.0),
            "n_awards": len(awards),
        },
    }
    return report


def engine_clips(engine: ContestEngine) -> Dict[str, Clip]:
    return {cid: engine.clip(cid) for cid in engine.clip_ids()}
