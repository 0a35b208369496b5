"""Evaluation statistics over opinion logs and reference standards,
plus figure-ready CSV emitters.

Scalar test statistics (paired t, Mann-Whitney U, Pearson r, mean/SEM)
live in ``stats`` and are re-exported here; this module adds the
concordance, sampling-curve, ROC, learning-curve, and confusion
machinery. Everything is a pure function, deterministic given
``(inputs, seed)``.
"""

from __future__ import annotations

import io
import math
import random
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .consensus import ConsensusPolicy, ConsensusState, clip_rng, majority_label, update_consensus
from .core import ALL_LABELS, ClassLabel, Counts, UserKind
from .errors import Empty, KeyMismatch, NoOpinions
from .oplog import OpinionLogEntry
from .stats import (  # noqa: F401  (re-exported as part of this module's surface)
    MannWhitneyResult,
    PearsonResult,
    TTestResult,
    mann_whitney_u,
    mean_sem,
    paired_t_test,
    pearson_r,
)

LabelMap = Mapping[str, ClassLabel]


def _require_same_keys(predicted: LabelMap, reference: LabelMap) -> None:
    if set(predicted) != set(reference):
        only_p = len(set(predicted) - set(reference))
        only_r = len(set(reference) - set(predicted))
        raise KeyMismatch(
            f"clip key sets differ: {only_p} only in predicted, {only_r} only in reference"
        )


def concordance(predicted: LabelMap, reference: LabelMap) -> float:
    """Fraction of clips where the two label maps agree."""
    _require_same_keys(predicted, reference)
    if not reference:
        raise Empty("concordance over zero clips")
    matches = sum(1 for clip in reference if predicted[clip] == reference[clip])
    return matches / len(reference)


@dataclass(frozen=True, slots=True)
class ConcordanceReport:
    """Overall and per-class concordance against a reference.

    ``per_class`` holds only classes with nonzero reference support;
    ``balanced`` is the arithmetic mean of those values. ``sem`` is
    filled only where the report aggregates several predictors.
    """

    overall: float
    per_class: Mapping[ClassLabel, float]
    per_class_n: Mapping[ClassLabel, int]
    balanced: float
    n_clips: int
    sem: Optional[float] = None


def concordance_report(predicted: LabelMap, reference: LabelMap) -> ConcordanceReport:
    _require_same_keys(predicted, reference)
    if not reference:
        raise Empty("concordance over zero clips")
    per_class: Dict[ClassLabel, float] = {}
    per_class_n: Dict[ClassLabel, int] = {}
    for label in ALL_LABELS:
        clips = [c for c in reference if reference[c] == label]
        if clips:
            per_class[label] = sum(
                1 for c in clips if predicted[c] == label
            ) / len(clips)
            per_class_n[label] = len(clips)
    balanced = sum(per_class.values()) / len(per_class)
    return ConcordanceReport(
        overall=concordance(predicted, reference),
        per_class=per_class,
        per_class_n=per_class_n,
        balanced=balanced,
        n_clips=len(reference),
    )


# ------------------------------------------------- opinion-count curve


@dataclass(frozen=True, slots=True)
class OpinionCountCurve:
    """Estimated consensus accuracy as a function of opinions per clip.

    ``points`` are (k, estimated_accuracy, sem) with k strictly
    increasing from 1; sem is across the ``n_samples`` Monte Carlo
    replicates (each replicate scores the whole clip set once).
    """

    points: Tuple[Tuple[int, float, float], ...]
    n_samples: int
    seed: int
    with_replacement: bool = False


def accuracy_vs_opinion_count(
    per_clip_opinions: Mapping[str, Sequence[ClassLabel]],
    reference: LabelMap,
    k_max: int,
    n_samples: int = 1000,
    seed: int = 0,
    with_replacement: bool = False,
) -> OpinionCountCurve:
    """Monte Carlo estimate of majority-vote accuracy at reduced opinion
    counts.

    For each clip and replicate, k opinions (capped at the clip's
    available count) are drawn without replacement as a prefix of a
    random permutation, majority-voted with uniform tie-breaking, and
    compared with the reference. Replicates share permutations across k
    (common random numbers), which only smooths the curve.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    clips = sorted(reference)
    if not clips:
        raise Empty("no clips to sample")
    for clip in clips:
        if len(per_clip_opinions.get(clip, ())) == 0:
            raise NoOpinions(clip)
    rng = np.random.default_rng(seed)
    correct = np.zeros((k_max, n_samples), dtype=np.float64)
    for clip in clips:
        labels = np.asarray([int(l) for l in per_clip_opinions[clip]], dtype=np.int64)
        m = labels.shape[0]
        ref = int(reference[clip])
        if with_replacement:
            draws = rng.integers(0, m, size=(n_samples, k_max))
        else:
            order = np.argsort(rng.random((n_samples, m)), axis=1)
        for k in range(1, k_max + 1):
            k_eff = min(k, m)
            idx = draws[:, :k_eff] if with_replacement else order[:, :k_eff]
            chosen = labels[idx]
            counts = np.stack(
                [(chosen == v).sum(axis=1) for v in range(3)], axis=1
            ).astype(np.float64)
            # sub-unit jitter breaks count ties uniformly without ever
            # reordering distinct counts
            counts += rng.random(counts.shape)
            correct[k - 1] += counts.argmax(axis=1) == ref
    acc = correct / len(clips)
    points = []
    for k in range(1, k_max + 1):
        row = acc[k - 1]
        sem = float(row.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
        points.append((k, float(row.mean()), sem))
    return OpinionCountCurve(
        points=tuple(points), n_samples=n_samples, seed=seed,
        with_replacement=with_replacement,
    )


# ----------------------------------------------------------------- roc


@dataclass(frozen=True, slots=True)
class RocCurve:
    """One-vs-rest ROC for a class, swept over vote-fraction thresholds.

    ``points`` are (false_positive_rate, true_positive_rate) ordered by
    descending threshold (``thresholds`` aligns with them, starting at
    +inf), beginning at (0,0) and ending at (1,1). ``auc`` by the
    trapezoidal rule.
    """

    label: ClassLabel
    points: Tuple[Tuple[float, float], ...]
    thresholds: Tuple[float, ...]
    auc: float


def roc_per_class(
    vote_fractions: Mapping[str, float],
    reference: LabelMap,
    label: ClassLabel,
) -> RocCurve:
    """ROC for predicting ``reference == label`` from the fraction of
    opinions voting for that class (positive when fraction >= threshold)."""
    _require_same_keys(vote_fractions, reference)
    for clip, fraction in vote_fractions.items():
        if not (0.0 <= fraction <= 1.0):
            raise ValueError(f"vote fraction {fraction} for clip {clip!r} outside [0, 1]")
    positives = [c for c in reference if reference[c] == label]
    negatives = [c for c in reference if reference[c] != label]
    if not positives:
        raise Empty(f"no clips with reference label {label.slug}")
    if not negatives:
        raise Empty(f"all clips have reference label {label.slug}")
    points: List[Tuple[float, float]] = [(0.0, 0.0)]
    thresholds: List[float] = [math.inf]
    for t in sorted(set(vote_fractions.values()), reverse=True):
        tpr = sum(1 for c in positives if vote_fractions[c] >= t) / len(positives)
        fpr = sum(1 for c in negatives if vote_fractions[c] >= t) / len(negatives)
        points.append((fpr, tpr))
        thresholds.append(t)
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
        thresholds.append(-math.inf)
    auc = 0.0
    for (fpr0, tpr0), (fpr1, tpr1) in zip(points, points[1:]):
        auc += (fpr1 - fpr0) * (tpr1 + tpr0) / 2.0
    return RocCurve(label=label, points=tuple(points), thresholds=tuple(thresholds), auc=auc)


def vote_fractions_for(
    counts_by_clip: Mapping[str, Counts], label: ClassLabel
) -> Dict[str, float]:
    """Per-clip fraction of opinions voting for ``label``."""
    fractions = {}
    for clip, counts in counts_by_clip.items():
        total = counts[0] + counts[1] + counts[2]
        if total == 0:
            raise NoOpinions(clip)
        fractions[clip] = counts[label] / total
    return fractions


# ------------------------------------------------------ learning curves


@dataclass(frozen=True, slots=True)
class LearningPoint:
    index: int           # 1-based test-set opinion index
    mean: float          # mean trailing concordance across cohort users
    sem: Optional[float]
    n_users: int


COHORT_ALL_CROWD = "all_crowd"
COHORT_SKILLED_CROWD = "skilled_crowd"
COHORT_EXPERTS = "experts"


def learning_curves(
    entries: Iterable[OpinionLogEntry],
    reference: LabelMap,
    window: int = 25,
    skilled_threshold: float = 0.8,
) -> Dict[str, Tuple[LearningPoint, ...]]:
    """Per-cohort learning curves over test-set opinions.

    For each user, opinions on reference (test) clips are taken in
    submission order, all of them, repeats included; the value at index
    i is the user's concordance over their last min(i, window) such
    opinions. Cohort curves average across users at each index; users
    with fewer opinions drop out of later points.

    Cohorts: experts (by user kind); all crowd; skilled crowd = crowd
    users whose logged trailing accuracy ever reached
    ``skilled_threshold``.
    """
    flags: Dict[str, List[bool]] = {}
    is_expert: Dict[str, bool] = {}
    ever_skilled: Dict[str, bool] = {}
    for entry in sorted(entries, key=lambda e: e.opinion_id):
        user = entry.user_id
        is_expert[user] = entry.user_kind is UserKind.EXPERT
        snapshot = entry.trailing_accuracy_at_submission
        if snapshot is not None and snapshot >= skilled_threshold:
            ever_skilled[user] = True
        if entry.clip_id in reference:
            flags.setdefault(user, []).append(entry.label == reference[entry.clip_id])

    series: Dict[str, List[float]] = {}
    for user, history in flags.items():
        prefix = [0]
        for correct in history:
            prefix.append(prefix[-1] + int(correct))
        series[user] = [
            (prefix[i] - prefix[max(0, i - window)]) / min(i, window)
            for i in range(1, len(history) + 1)
        ]

    cohorts = {
        COHORT_ALL_CROWD: [u for u in series if not is_expert[u]],
        COHORT_SKILLED_CROWD: [
            u for u in series if not is_expert[u] and ever_skilled.get(u, False)
        ],
        COHORT_EXPERTS: [u for u in series if is_expert[u]],
    }
    curves: Dict[str, Tuple[LearningPoint, ...]] = {}
    for name, users in cohorts.items():
        points = []
        depth = max((len(series[u]) for u in users), default=0)
        for i in range(1, depth + 1):
            values = [series[u][i - 1] for u in users if len(series[u]) >= i]
            mean, sem = mean_sem(values)
            points.append(LearningPoint(index=i, mean=mean, sem=sem, n_users=len(values)))
        curves[name] = tuple(points)
    return curves


# ------------------------------------------------------ confusion matrix

Matrix = Tuple[Tuple[int, int, int], Tuple[int, int, int], Tuple[int, int, int]]


def confusion_matrix(predicted: LabelMap, reference: LabelMap) -> Matrix:
    """3x3 counts; rows are the reference class, columns the predicted."""
    _require_same_keys(predicted, reference)
    cells = [[0, 0, 0], [0, 0, 0], [0, 0, 0]]
    for clip in reference:
        cells[reference[clip]][predicted[clip]] += 1
    return tuple(tuple(row) for row in cells)  # type: ignore[return-value]


# --------------------------------------------- consensus-derived labels


def crowd_labels_from_states(
    states: Mapping[str, ConsensusState],
    clips: Iterable[str],
    seed: int,
) -> Dict[str, ClassLabel]:
    """Final crowd label per clip: majority of eligible opinions, falling
    back to the raw majority when no opinion was eligible. Ties break on
    the per-clip "crowd-label" stream."""
    labels = {}
    for clip in clips:
        state = states.get(clip)
        if state is None:
            raise NoOpinions(clip)
        counts = state.eligible_counts
        if sum(counts) == 0:
            counts = state.raw_counts
        if sum(counts) == 0:
            raise NoOpinions(clip)
        labels[clip] = majority_label(counts, clip_rng(seed, clip, stream="crowd-label"))
    return labels


def consensus_from_log(
    entries: Iterable[OpinionLogEntry],
    policy: ConsensusPolicy,
    seed: int,
) -> Dict[str, ConsensusState]:
    """Re-fold a log into per-clip consensus states.

    Eligibility snapshots come from the entries themselves, so this
    needs no quality tracking; ``seed`` must be the engine seed that
    produced the log for tie-breaks to land identically.
    """
    states: Dict[str, ConsensusState] = {}
    rngs: Dict[str, random.Random] = {}
    for entry in entries:
        clip_id = entry.clip_id
        state = states.get(clip_id)
        if state is None:
            state = ConsensusState(clip_id=clip_id)
        rng = rngs.get(clip_id)
        if rng is None:
            rng = rngs[clip_id] = clip_rng(seed, clip_id, stream="consensus")
        states[clip_id] = update_consensus(state, entry.opinion, policy, rng)
    return states


def agreement_stratified_concordance(
    states: Mapping[str, ConsensusState],
    reference: LabelMap,
    agreement_cut: float = 0.8,
    seed: int = 0,
) -> Tuple[Optional[float], int]:
    """Crowd-vs-reference concordance restricted to clips whose eligible
    agreement is at least ``agreement_cut``; returns (fraction, n) with
    fraction None when the stratum is empty. Clips without eligible
    opinions count as zero agreement."""
    stratum = [
        clip for clip in reference
        if (states[clip].agreement or 0.0) >= agreement_cut
    ]
    if not stratum:
        return (None, 0)
    labels = crowd_labels_from_states(states, stratum, seed)
    matches = sum(1 for clip in stratum if labels[clip] == reference[clip])
    return (matches / len(stratum), len(stratum))


# -------------------------------------------------------- csv emitters

FIG3_COLUMNS = "predictor,class,concordance,n"
FIG4_COLUMNS = "k,estimated_accuracy,sem"
FIG5_COLUMNS = "threshold,false_positive_rate,true_positive_rate"
FIG6_COLUMNS = "reference,pred_no,pred_discrete,pred_confluent"
FIG7_COLUMNS = "cohort,opinion_index,mean_concordance,sem,n_users"


def concordance_table_csv(reports: Sequence[Tuple[str, ConcordanceReport]]) -> str:
    """Per-class concordance table, one block of rows per predictor."""
    out = io.StringIO()
    out.write(FIG3_COLUMNS + "\n")
    for name, report in reports:
        for label in ALL_LABELS:
            if label not in report.per_class:
                continue
            out.write(
                f"{name},{label.slug},{report.per_class[label]:.6f},"
                f"{report.per_class_n[label]}\n"
            )
        out.write(f"{name},overall,{report.overall:.6f},{report.n_clips}\n")
        out.write(f"{name},balanced,{report.balanced:.6f},{report.n_clips}\n")
    return out.getvalue()


def opinion_count_csv(curve: OpinionCountCurve) -> str:
    out = io.StringIO()
    out.write(FIG4_COLUMNS + "\n")
    for k, acc, sem in curve.points:
        out.write(f"{k},{acc:.6f},{sem:.6f}\n")
    return out.getvalue()


def roc_csv(curve: RocCurve) -> str:
    out = io.StringIO()
    out.write(FIG5_COLUMNS + "\n")
    for threshold, (fpr, tpr) in zip(curve.thresholds, curve.points):
        shown = "inf" if math.isinf(threshold) and threshold > 0 else (
            "-inf" if math.isinf(threshold) else f"{threshold:.6f}"
        )
        out.write(f"{shown},{fpr:.6f},{tpr:.6f}\n")
    return out.getvalue()


def confusion_csv(matrix: Matrix) -> str:
    out = io.StringIO()
    out.write(FIG6_COLUMNS + "\n")
    for label in ALL_LABELS:
        row = matrix[label]
        out.write(f"{label.slug},{row[0]},{row[1]},{row[2]}\n")
    return out.getvalue()


def learning_csv(curves: Mapping[str, Tuple[LearningPoint, ...]]) -> str:
    out = io.StringIO()
    out.write(FIG7_COLUMNS + "\n")
    for cohort in sorted(curves):
        for point in curves[cohort]:
            sem = "" if point.sem is None else f"{point.sem:.6f}"
            out.write(f"{cohort},{point.index},{point.mean:.6f},{sem},{point.n_users}\n")
    return out.getvalue()
