"""Tests for the shared domain vocabulary."""

import dataclasses
import random

import pytest

from blinecrowd.core import (
    ALL_LABELS,
    ClassLabel,
    Clip,
    ClipRole,
    Opinion,
    UserKind,
    label_counts,
    severity_max,
    vote_counts,
)


def test_label_order_matches_severity():
    assert ClassLabel.NO_BLINES < ClassLabel.DISCRETE_BLINES < ClassLabel.CONFLUENT_BLINES
    assert [l.severity_rank for l in ALL_LABELS] == [0, 1, 2]


def test_slug_round_trip():
    for label in ALL_LABELS:
        assert ClassLabel.from_slug(label.slug) is label
    assert ClassLabel.from_slug("  Confluent ") is ClassLabel.CONFLUENT_BLINES


def test_unknown_slug_rejected():
    with pytest.raises(ValueError):
        ClassLabel.from_slug("b7")


def test_severity_max_is_join():
    rng = random.Random(3)
    for _ in range(100):
        a, b, c = (rng.choice(ALL_LABELS) for _ in range(3))
        assert severity_max(a, b) == severity_max(b, a)
        assert severity_max(a, a) == a
        assert severity_max(severity_max(a, b), c) == severity_max(a, severity_max(b, c))
        assert severity_max(a, b) in (a, b)
        assert severity_max(a, b).severity_rank == max(a.severity_rank, b.severity_rank)


def test_label_counts():
    labels = [ClassLabel.NO_BLINES, ClassLabel.CONFLUENT_BLINES, ClassLabel.NO_BLINES]
    assert label_counts(labels) == (2, 0, 1)
    assert label_counts([]) == (0, 0, 0)


def test_vote_counts_order_independent():
    rng = random.Random(11)
    ops = [
        Opinion(opinion_id=i, user_id=f"u{i}", clip_id="c1",
                label=rng.choice(ALL_LABELS), submitted_at=float(i))
        for i in range(30)
    ]
    base = vote_counts(ops)
    shuffled = ops[:]
    rng.shuffle(shuffled)
    assert vote_counts(shuffled) == base
    assert sum(base) == 30


def test_value_objects_immutable():
    clip = Clip(clip_id="c1", patient_id="p1")
    with pytest.raises(dataclasses.FrozenInstanceError):
        clip.excluded = True
    op = Opinion(opinion_id=1, user_id="u", clip_id="c1",
                 label=ClassLabel.NO_BLINES, submitted_at=0.0)
    with pytest.raises(dataclasses.FrozenInstanceError):
        op.label = ClassLabel.CONFLUENT_BLINES


def test_clip_defaults():
    clip = Clip(clip_id="c1", patient_id="p1")
    assert clip.role is ClipRole.UNLABELED
    assert clip.reference_label is None
    assert not clip.excluded
    assert clip.frame_rate_hz == 30.0


def test_enum_wire_values():
    assert ClipRole.TRAINING.value == "training"
    assert ClipRole.TEST.value == "test"
    assert ClipRole.UNLABELED.value == "unlabeled"
    assert UserKind.EXPERT.value == "expert"
