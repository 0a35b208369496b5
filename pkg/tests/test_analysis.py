"""Tests for the evaluation statistics and figure emitters."""

import math
import random

import pytest

from blinecrowd import analysis
from blinecrowd.consensus import ConsensusState
from blinecrowd.core import ClassLabel, UserKind
from blinecrowd.errors import Empty, KeyMismatch, NoOpinions
from blinecrowd.oplog import OpinionLogEntry

NO = ClassLabel.NO_BLINES
DISCRETE = ClassLabel.DISCRETE_BLINES
CONFLUENT = ClassLabel.CONFLUENT_BLINES


# ---------------------------------------------------------- concordance


def test_concordance_identical():
    labels = {"c1": NO, "c2": DISCRETE}
    assert analysis.concordance(labels, dict(labels)) == 1.0


def test_concordance_partial():
    predicted = {"c1": NO, "c2": NO, "c3": DISCRETE}
    reference = {"c1": NO, "c2": DISCRETE, "c3": DISCRETE}
    assert analysis.concordance(predicted, reference) == pytest.approx(2 / 3)


def test_concordance_key_mismatch():
    with pytest.raises(KeyMismatch):
        analysis.concordance({"c1": NO}, {"c2": NO})
    with pytest.raises(Empty):
        analysis.concordance({}, {})


def test_concordance_symmetric():
    rng = random.Random(5)
    for _ in range(20):
        keys = [f"c{i}" for i in range(rng.randint(1, 15))]
        a = {k: ClassLabel(rng.randrange(3)) for k in keys}
        b = {k: ClassLabel(rng.randrange(3)) for k in keys}
        assert analysis.concordance(a, b) == analysis.concordance(b, a)
        assert (analysis.concordance(a, b) == 1.0) == (a == b)


def test_concordance_report_perfect():
    reference = {"c1": NO, "c2": DISCRETE, "c3": CONFLUENT}
    report = analysis.concordance_report(dict(reference), reference)
    assert report.overall == 1.0
    assert report.balanced == 1.0
    assert report.per_class == {NO: 1.0, DISCRETE: 1.0, CONFLUENT: 1.0}
    assert report.n_clips == 3


def test_concordance_report_balanced_mean():
    # per-class 0.9 (10 NO), 0.6 (10 DISCRETE), 0.8 (10 CONFLUENT)
    reference = {}
    predicted = {}
    for i in range(10):
        reference[f"n{i}"] = NO
        predicted[f"n{i}"] = NO if i < 9 else DISCRETE
        reference[f"d{i}"] = DISCRETE
        predicted[f"d{i}"] = DISCRETE if i < 6 else NO
        reference[f"f{i}"] = CONFLUENT
        predicted[f"f{i}"] = CONFLUENT if i < 8 else NO
    report = analysis.concordance_report(predicted, reference)
    assert report.per_class[NO] == pytest.approx(0.9)
    assert report.per_class[DISCRETE] == pytest.approx(0.6)
    assert report.per_class[CONFLUENT] == pytest.approx(0.8)
    assert report.balanced == pytest.approx((0.9 + 0.6 + 0.8) / 3)
    assert report.per_class_n == {NO: 10, DISCRETE: 10, CONFLUENT: 10}


def test_concordance_report_skips_absent_classes():
    reference = {"c1": NO, "c2": NO, "c3": DISCRETE}
    predicted = {"c1": NO, "c2": CONFLUENT, "c3": DISCRETE}
    report = analysis.concordance_report(predicted, reference)
    assert CONFLUENT not in report.per_class
    assert report.balanced == pytest.approx((0.5 + 1.0) / 2)


def test_balanced_equals_overall_when_uniform():
    rng = random.Random(8)
    reference = {}
    predicted = {}
    # equal-sized classes; per-class accuracy made identical by construction
    for label in (NO, DISCRETE, CONFLUENT):
        for i in range(12):
            clip = f"{label.slug}{i}"
            reference[clip] = label
            predicted[clip] = label if i < 9 else ClassLabel((label + 1) % 3)
    report = analysis.concordance_report(predicted, reference)
    assert report.balanced == pytest.approx(report.overall)
    assert rng  # keep seed name for symmetry with other property tests


# ------------------------------------------------- opinion-count curve


def test_curve_unanimous_is_flat():
    per_clip = {f"c{i}": [NO] * 9 for i in range(6)}
    reference = {f"c{i}": NO if i < 5 else DISCRETE for i in range(6)}
    curve = analysis.accuracy_vs_opinion_count(per_clip, reference, k_max=5,
                                               n_samples=50, seed=1)
    for k, acc, sem in curve.points:
        assert acc == pytest.approx(5 / 6)
        assert sem == pytest.approx(0.0, abs=1e-12)
    assert [p[0] for p in curve.points] == [1, 2, 3, 4, 5]


def test_curve_k1_matches_analytic_mean():
    rng = random.Random(17)
    per_clip = {}
    reference = {}
    expected = 0.0
    n_clips = 40
    for i in range(n_clips):
        ref = ClassLabel(rng.randrange(3))
        labels = [ref if rng.random() < 0.7 else ClassLabel(rng.randrange(3))
                  for _ in range(15)]
        per_clip[f"c{i}"] = labels
        reference[f"c{i}"] = ref
        expected += sum(1 for l in labels if l == ref) / len(labels)
    expected /= n_clips
    curve = analysis.accuracy_vs_opinion_count(per_clip, reference, k_max=1,
                                               n_samples=2000, seed=3)
    k, acc, sem = curve.points[0]
    assert abs(acc - expected) < 3 * max(sem, 1e-9) + 1e-12


def test_curve_k_max_equals_full_majority():
    # no ties anywhere -> sampling all opinions is deterministic
    rng = random.Random(23)
    per_clip = {}
    reference = {}
    for i in range(25):
        ref = ClassLabel(rng.randrange(3))
        labels = [ref] * 5 + [ClassLabel((ref + 1) % 3)] * 2
        per_clip[f"c{i}"] = labels
        reference[f"c{i}"] = ref if rng.random() < 0.8 else ClassLabel((ref + 2) % 3)
    full = analysis.concordance(
        {c: max(set(ls), key=ls.count) for c, ls in per_clip.items()}, reference
    )
    curve = analysis.accuracy_vs_opinion_count(per_clip, reference, k_max=7,
                                               n_samples=40, seed=5)
    k, acc, sem = curve.points[-1]
    assert k == 7
    assert acc == pytest.approx(full)
    assert sem == pytest.approx(0.0, abs=1e-12)


def test_curve_deterministic_and_seed_sensitive():
    per_clip = {f"c{i}": [NO, NO, DISCRETE, CONFLUENT, NO] for i in range(8)}
    reference = {f"c{i}": NO for i in range(8)}
    a = analysis.accuracy_vs_opinion_count(per_clip, reference, 4, n_samples=100, seed=9)
    b = analysis.accuracy_vs_opinion_count(per_clip, reference, 4, n_samples=100, seed=9)
    c = analysis.accuracy_vs_opinion_count(per_clip, reference, 4, n_samples=100, seed=10)
    assert a == b
    assert a.points != c.points


def test_curve_missing_opinions():
    with pytest.raises(NoOpinions):
        analysis.accuracy_vs_opinion_count({"c1": []}, {"c1": NO}, 3)
    with pytest.raises(NoOpinions):
        analysis.accuracy_vs_opinion_count({}, {"c1": NO}, 3)


def test_curve_with_replacement_flag():
    per_clip = {"c1": [NO, DISCRETE]}
    reference = {"c1": NO}
    curve = analysis.accuracy_vs_opinion_count(per_clip, reference, 2,
                                               n_samples=400, seed=2,
                                               with_replacement=True)
    assert curve.with_replacement
    # with replacement at k=2 a (NO, NO) draw happens 1/4 of the time;
    # without replacement never; accuracy at k=2 differs accordingly
    k2 = curve.points[1][1]
    assert 0.45 < k2 < 0.7


# ----------------------------------------------------------------- roc


def test_roc_perfect_separation():
    fractions = {"p1": 0.9, "p2": 0.8, "n1": 0.2, "n2": 0.1}
    reference = {"p1": NO, "p2": NO, "n1": DISCRETE, "n2": CONFLUENT}
    curve = analysis.roc_per_class(fractions, reference, NO)
    assert curve.auc == pytest.approx(1.0)
    assert curve.points[0] == (0.0, 0.0)
    assert curve.points[-1] == (1.0, 1.0)
    assert curve.thresholds[0] == math.inf


def test_roc_random_fractions_auc_half():
    rng = random.Random(31)
    fractions = {}
    reference = {}
    for i in range(10000):
        fractions[f"c{i}"] = rng.random()
        reference[f"c{i}"] = ClassLabel(rng.randrange(3))
    curve = analysis.roc_per_class(fractions, reference, DISCRETE)
    assert abs(curve.auc - 0.5) < 0.05


def test_roc_invariant_under_monotone_transform():
    rng = random.Random(37)
    fractions = {f"c{i}": rng.random() for i in range(200)}
    reference = {
        f"c{i}": NO if fractions[f"c{i}"] + rng.gauss(0, 0.3) > 0.5 else DISCRETE
        for i in range(200)
    }
    base = analysis.roc_per_class(fractions, reference, NO)
    squared = analysis.roc_per_class({c: v ** 2 for c, v in fractions.items()},
                                     reference, NO)
    assert squared.auc == pytest.approx(base.auc)
    assert squared.points == base.points


def test_roc_errors():
    with pytest.raises(KeyMismatch):
        analysis.roc_per_class({"c1": 0.5}, {"c2": NO}, NO)
    with pytest.raises(Empty):
        analysis.roc_per_class({"c1": 0.5, "c2": 0.4},
                               {"c1": NO, "c2": NO}, DISCRETE)
    with pytest.raises(Empty):
        analysis.roc_per_class({"c1": 0.5, "c2": 0.4},
                               {"c1": NO, "c2": NO}, NO)
    with pytest.raises(ValueError):
        analysis.roc_per_class({"c1": 1.5, "c2": 0.4},
                               {"c1": NO, "c2": DISCRETE}, NO)


def test_vote_fractions_for():
    counts = {"c1": (3, 1, 0), "c2": (0, 2, 2)}
    assert analysis.vote_fractions_for(counts, NO) == {"c1": 0.75, "c2": 0.0}
    assert analysis.vote_fractions_for(counts, CONFLUENT)["c2"] == 0.5
    with pytest.raises(NoOpinions):
        analysis.vote_fractions_for({"c1": (0, 0, 0)}, NO)


# ------------------------------------------------------ learning curves


def _log_entry(i, user, clip, label, kind=UserKind.CROWD, trailing=None, eligible=False):
    return OpinionLogEntry(
        opinion_id=i, contest_id="x", user_id=user, user_kind=kind,
        clip_id=clip, label=label, submitted_at=float(i),
        trailing_accuracy_at_submission=trailing, eligible=eligible,
        disposition="recorded", revealed_label=None,
    )


def test_learning_all_correct_user():
    reference = {f"t{i}": NO for i in range(6)}
    entries = [_log_entry(i + 1, "u1", f"t{i}", NO) for i in range(6)]
    curves = analysis.learning_curves(entries, reference)
    crowd = curves[analysis.COHORT_ALL_CROWD]
    assert [p.mean for p in crowd] == [1.0] * 6
    assert [p.index for p in crowd] == [1, 2, 3, 4, 5, 6]
    assert all(p.n_users == 1 for p in crowd)


def test_learning_windowing():
    reference = {f"t{i}": NO for i in range(40)}
    # 30 wrong then 10 right, window 25
    entries = [
        _log_entry(i + 1, "u1", f"t{i}", DISCRETE if i < 30 else NO)
        for i in range(40)
    ]
    curves = analysis.learning_curves(entries, reference, window=25)
    crowd = curves[analysis.COHORT_ALL_CROWD]
    assert crowd[29].mean == 0.0                 # index 30: last 25 all wrong
    assert crowd[39].mean == pytest.approx(10 / 25)
    assert crowd[9].mean == 0.0                  # index 10 uses min(i, window)=10


def test_learning_repeat_clips_counted():
    reference = {"t0": NO}
    entries = [
        _log_entry(1, "u1", "t0", NO),
        _log_entry(2, "u1", "t0", DISCRETE),
        _log_entry(3, "u1", "t0", NO),
    ]
    curves = analysis.learning_curves(entries, reference)
    assert [p.mean for p in curves[analysis.COHORT_ALL_CROWD]] == [1.0, 0.5, pytest.approx(2 / 3)]


def test_learning_cohorts():
    reference = {f"t{i}": NO for i in range(3)}
    entries = []
    i = 0
    for user, kind, skilled in [("e1", UserKind.EXPERT, False),
                                ("u1", UserKind.CROWD, True),
                                ("u2", UserKind.CROWD, False)]:
        for clip in reference:
            i += 1
            entries.append(_log_entry(
                i, user, clip, NO, kind=kind,
                trailing=0.9 if skilled else 0.5,
            ))
    # a non-test opinion with a high snapshot also qualifies a user as skilled
    entries.append(_log_entry(i + 1, "u2", "unlabeled-1", NO, trailing=None))
    curves = analysis.learning_curves(entries, reference, skilled_threshold=0.8)
    assert all(p.n_users == 2 for p in curves[analysis.COHORT_ALL_CROWD])
    assert all(p.n_users == 1 for p in curves[analysis.COHORT_SKILLED_CROWD])
    assert all(p.n_users == 1 for p in curves[analysis.COHORT_EXPERTS])


def test_learning_dropout_shrinks_n():
    reference = {f"t{i}": NO for i in range(5)}
    entries = [_log_entry(i + 1, "u1", f"t{i}", NO) for i in range(5)]
    entries += [_log_entry(10 + i, "u2", f"t{i}", NO) for i in range(2)]
    curves = analysis.learning_curves(entries, reference)
    crowd = curves[analysis.COHORT_ALL_CROWD]
    assert [p.n_users for p in crowd] == [2, 2, 1, 1, 1]
    assert crowd[0].sem is not None
    assert crowd[2].sem is None


def test_learning_empty_cohorts():
    curves = analysis.learning_curves([], {"t0": NO})
    assert curves[analysis.COHORT_ALL_CROWD] == ()
    assert curves[analysis.COHORT_EXPERTS] == ()


# ------------------------------------------------------ confusion matrix


def test_confusion_perfect_diagonal():
    reference = {"c1": NO, "c2": DISCRETE, "c3": CONFLUENT, "c4": NO}
    matrix = analysis.confusion_matrix(dict(reference), reference)
    assert matrix == ((2, 0, 0), (0, 1, 0), (0, 0, 1))


def test_confusion_single_off_diagonal():
    matrix = analysis.confusion_matrix({"c1": DISCRETE}, {"c1": NO})
    assert matrix == ((0, 1, 0), (0, 0, 0), (0, 0, 0))


def test_confusion_row_sums_are_reference_counts():
    rng = random.Random(44)
    reference = {f"c{i}": ClassLabel(rng.randrange(3)) for i in range(60)}
    predicted = {c: ClassLabel(rng.randrange(3)) for c in reference}
    matrix = analysis.confusion_matrix(predicted, reference)
    for label in (NO, DISCRETE, CONFLUENT):
        expected = sum(1 for v in reference.values() if v == label)
        assert sum(matrix[label]) == expected
    assert sum(sum(row) for row in matrix) == 60


# ------------------------------------------- consensus-derived analyses


def _state(clip, eligible=(0, 0, 0), raw=(0, 0, 0), agreement=None):
    return ConsensusState(clip_id=clip, raw_counts=raw, eligible_counts=eligible,
                          agreement=agreement)


def test_crowd_labels_eligible_majority():
    states = {"c1": _state("c1", eligible=(1, 5, 1), raw=(9, 5, 1))}
    labels = analysis.crowd_labels_from_states(states, ["c1"], seed=0)
    assert labels["c1"] is DISCRETE


def test_crowd_labels_fallback_to_raw():
    states = {"c1": _state("c1", raw=(0, 1, 4))}
    labels = analysis.crowd_labels_from_states(states, ["c1"], seed=0)
    assert labels["c1"] is CONFLUENT
    with pytest.raises(NoOpinions):
        analysis.crowd_labels_from_states({"c1": _state("c1")}, ["c1"], seed=0)
    with pytest.raises(NoOpinions):
        analysis.crowd_labels_from_states({}, ["c1"], seed=0)


def test_crowd_labels_tie_deterministic():
    states = {"c1": _state("c1", eligible=(3, 3, 0))}
    first = analysis.crowd_labels_from_states(states, ["c1"], seed=12)
    second = analysis.crowd_labels_from_states(states, ["c1"], seed=12)
    assert first == second


def test_stratified_concordance():
    states = {
        "c1": _state("c1", eligible=(10, 0, 0), agreement=1.0),
        "c2": _state("c2", eligible=(5, 4, 1), agreement=0.5),
        "c3": _state("c3", eligible=(0, 9, 1), agreement=0.9),
    }
    reference = {"c1": NO, "c2": DISCRETE, "c3": CONFLUENT}
    frac, n = analysis.agreement_stratified_concordance(states, reference, 0.8)
    # stratum = c1 (correct) and c3 (crowd says DISCRETE, wrong)
    assert n == 2
    assert frac == pytest.approx(0.5)
    overall, n_all = analysis.agreement_stratified_concordance(states, reference, 0.0)
    assert n_all == 3
    labels = analysis.crowd_labels_from_states(states, reference, seed=0)
    assert overall == pytest.approx(analysis.concordance(labels, reference))
    assert analysis.agreement_stratified_concordance(states, reference, 1.01) == (None, 0)


# -------------------------------------------------------------- csv


def test_fig_csv_headers_and_rows():
    reference = {"c1": NO, "c2": DISCRETE}
    report = analysis.concordance_report({"c1": NO, "c2": NO}, reference)
    fig3 = analysis.concordance_table_csv([("crowd", report)])
    lines = fig3.strip().split("\n")
    assert lines[0] == "predictor,class,concordance,n"
    assert "crowd,no,1.000000,1" in lines
    assert "crowd,overall,0.500000,2" in lines

    curve = analysis.accuracy_vs_opinion_count(
        {"c1": [NO] * 3, "c2": [DISCRETE] * 3}, reference, 2, n_samples=10, seed=0)
    fig4 = analysis.opinion_count_csv(curve)
    assert fig4.startswith("k,estimated_accuracy,sem\n1,1.000000,0.000000\n")

    roc = analysis.roc_per_class({"c1": 0.8, "c2": 0.3}, reference, NO)
    fig5 = analysis.roc_csv(roc)
    assert fig5.splitlines()[0] == "threshold,false_positive_rate,true_positive_rate"
    assert fig5.splitlines()[1] == "inf,0.000000,0.000000"

    fig6 = analysis.confusion_csv(analysis.confusion_matrix({"c1": NO, "c2": NO}, reference))
    assert fig6 == ("reference,pred_no,pred_discrete,pred_confluent\n"
                    "no,1,0,0\ndiscrete,1,0,0\nconfluent,0,0,0\n")

    curves = analysis.learning_curves(
        [_log_entry(1, "u1", "c1", NO)], reference)
    fig7 = analysis.learning_csv(curves)
    assert fig7.splitlines()[0] == "cohort,opinion_index,mean_concordance,sem,n_users"
    assert "all_crowd,1,1.000000,,1" in fig7


# ------------------------------------------------ refolding a real log


def test_consensus_from_log_matches_engine_states():
    from blinecrowd.config import ServiceConfig
    from blinecrowd.consensus import ConsensusPolicy
    from blinecrowd.core import Clip, ClipRole, User
    from blinecrowd.engine import ContestEngine

    policy = ConsensusPolicy(min_eligible_opinions=3)
    engine = ContestEngine(ServiceConfig(policy=policy, engine_seed=42))
    clips = {}
    for i in range(10):
        clips[f"train-{i}"] = Clip(
            clip_id=f"train-{i}", patient_id="pa", role=ClipRole.TRAINING,
            reference_label=NO,
        )
    clips["test-0"] = Clip(clip_id="test-0", patient_id="pb",
                           role=ClipRole.TEST, reference_label=DISCRETE)
    engine.register_clips(clips)
    contest = engine.create_contest(sorted(clips), prize_pool=10.0, seed=42)

    t = 0.0
    for user_id in ("u1", "u2", "u3", "u4"):
        for i in range(10):
            t += 1.0
            engine.submit_opinion(contest, user_id, f"train-{i}", NO, submitted_at=t)
    # three skilled votes complete the test clip; u5 adds a raw-only one
    for user_id in ("u1", "u2", "u3"):
        t += 1.0
        engine.submit_opinion(contest, user_id, "test-0", CONFLUENT, submitted_at=t)
    t += 1.0
    engine.submit_opinion(contest, "u5", "test-0", NO, submitted_at=t)

    refolded = analysis.consensus_from_log(engine.log_entries(), policy, seed=42)
    states = engine.consensus_states()
    assert set(refolded) == set(states)
    for clip_id, state in states.items():
        assert refolded[clip_id] == state
    assert refolded["test-0"].consensus_label is CONFLUENT
