"""Dataset intake: clip manifests, expert opinion files, patient-wise
partitioning, subset selection, and exclusion of flagged clips.

Everything here is a pure batch function; determinism is total given
(file contents, seed). Partitioning splits patients, never clips, so a
patient's clips always land on one side.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Mapping, Optional, Sequence, Tuple, Union

from .core import ClassLabel, Clip, ClipRole
from .errors import (
    DuplicateClip,
    InsufficientClips,
    MissingField,
    ParseError,
    TooFewPatients,
)

MIN_FRAME_RATE = 15.0
MAX_FRAME_RATE = 46.0

#: Fixed leading CSV columns; anything after them is kept as metadata.
MANIFEST_CSV_COLUMNS = ("clip_id", "patient_id", "media_uri", "frame_rate_hz", "no_lung_flags")

Source = Union[str, Path, io.TextIOBase]


@dataclass(frozen=True, slots=True)
class ManifestRow:
    clip_id: str
    patient_id: str
    media_uri: str = ""
    frame_rate_hz: float = 30.0
    #: experts who flagged this clip as not showing lung
    no_lung_flagged_by: Tuple[str, ...] = ()
    metadata: Mapping[str, str] = field(default_factory=dict)

    @property
    def flagged(self) -> bool:
        return len(self.no_lung_flagged_by) > 0


@dataclass(frozen=True, slots=True)
class ClipManifest:
    rows: Tuple[ManifestRow, ...]

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def patient_ids(self) -> FrozenSet[str]:
        return frozenset(r.patient_id for r in self.rows)

    def clips_of(self, patients: FrozenSet[str]) -> list[str]:
        """Clip ids belonging to the given patients, sorted."""
        return sorted(r.clip_id for r in self.rows if r.patient_id in patients)

    def row_by_clip(self) -> Dict[str, ManifestRow]:
        return {r.clip_id: r for r in self.rows}


def _read_text(source: Source) -> str:
    if hasattr(source, "read"):
        return source.read()  # type: ignore[union-attr]
    return Path(source).read_text()


def _looks_like_jsonl(source: Source, text: str) -> bool:
    name = getattr(source, "name", None) if hasattr(source, "read") else str(source)
    if name:
        suffix = Path(str(name)).suffix.lower()
        if suffix in (".jsonl", ".ndjson"):
            return True
        if suffix == ".csv":
            return False
    stripped = text.lstrip()
    return stripped.startswith("{")


def _validate_row(line_no: int, clip_id: str, patient_id: str, rate_text: str) -> float:
    if not clip_id:
        raise MissingField("clip_id")
    if not patient_id:
        raise MissingField("patient_id")
    try:
        rate = float(rate_text)
    except (TypeError, ValueError):
        raise ParseError(line_no, f"bad frame_rate_hz {rate_text!r}") from None
    if not (MIN_FRAME_RATE <= rate <= MAX_FRAME_RATE):
        raise ParseError(line_no, f"frame_rate_hz {rate} outside [{MIN_FRAME_RATE}, {MAX_FRAME_RATE}]")
    return rate


def load_manifest(source: Source) -> ClipManifest:
    """Load a clip manifest from CSV or JSON-lines.

    CSV column order is fixed (``MANIFEST_CSV_COLUMNS``); extra columns
    become row metadata. ``no_lung_flags`` holds semicolon-separated
    expert ids. JSON-lines objects use the same field names with
    ``no_lung_flagged_by`` as a list.
    """
    text = _read_text(source)
    rows = (
        _parse_jsonl(text) if _looks_like_jsonl(source, text) else _parse_csv(text)
    )
    seen = set()
    for row in rows:
        if row.clip_id in seen:
            raise DuplicateClip(row.clip_id)
        seen.add(row.clip_id)
    return ClipManifest(rows=tuple(rows))


def _parse_csv(text: str) -> list[ManifestRow]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(1, "empty manifest") from None
    header = [h.strip() for h in header]
    for name in MANIFEST_CSV_COLUMNS:
        if name not in header:
            raise MissingField(name)
    if tuple(header[: len(MANIFEST_CSV_COLUMNS)]) != MANIFEST_CSV_COLUMNS:
        raise ParseError(1, f"leading columns must be {','.join(MANIFEST_CSV_COLUMNS)}")
    extra_columns = header[len(MANIFEST_CSV_COLUMNS):]
    rows = []
    for line_no, record in enumerate(reader, start=2):
        if not record or (len(record) == 1 and not record[0].strip()):
            continue
        if len(record) != len(header):
            raise ParseError(line_no, f"expected {len(header)} fields, got {len(record)}")
        clip_id, patient_id, media_uri, rate_text, flags_text = (
            value.strip() for value in record[:5]
        )
        rate = _validate_row(line_no, clip_id, patient_id, rate_text)
        flags = tuple(f.strip() for f in flags_text.split(";") if f.strip())
        metadata = {
            name: record[5 + i].strip() for i, name in enumerate(extra_columns)
        }
        rows.append(ManifestRow(
            clip_id=clip_id, patient_id=patient_id, media_uri=media_uri,
            frame_rate_hz=rate, no_lung_flagged_by=flags, metadata=metadata,
        ))
    return rows


def _parse_jsonl(text: str) -> list[ManifestRow]:
    rows = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(line_no, f"bad JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise ParseError(line_no, "each line must be a JSON object")
        for name in ("clip_id", "patient_id"):
            if name not in obj:
                raise MissingField(name)
        clip_id = str(obj["clip_id"])
        patient_id = str(obj["patient_id"])
        rate = _validate_row(line_no, clip_id, patient_id, obj.get("frame_rate_hz", 30.0))
        flags = tuple(str(f) for f in obj.get("no_lung_flagged_by", []))
        metadata = {str(k): str(v) for k, v in obj.get("metadata", {}).items()}
        rows.append(ManifestRow(
            clip_id=clip_id, patient_id=patient_id,
            media_uri=str(obj.get("media_uri", "")), frame_rate_hz=rate,
            no_lung_flagged_by=flags, metadata=metadata,
        ))
    return rows


def manifest_to_csv(manifest: ClipManifest) -> str:
    """Inverse of the CSV loader (metadata columns are dropped)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(MANIFEST_CSV_COLUMNS)
    for row in manifest.rows:
        writer.writerow([
            row.clip_id, row.patient_id, row.media_uri,
            f"{row.frame_rate_hz:g}", ";".join(row.no_lung_flagged_by),
        ])
    return out.getvalue()


# ------------------------------------------------------------ planning


@dataclass(frozen=True, slots=True)
class PartitionPlan:
    """Patient split plus (after selection) training/test clip draws.

    ``excluded_clips`` holds only clips that were selected and then
    removed for carrying a no-lung flag; flagged clips that were never
    selected are not listed here.
    """

    seed: int
    set_a_patients: FrozenSet[str]
    set_b_patients: FrozenSet[str]
    training_clips: FrozenSet[str] = frozenset()
    test_clips: FrozenSet[str] = frozenset()
    excluded_clips: FrozenSet[str] = frozenset()
    selection_seed: Optional[int] = None


def partition_by_patient(manifest: ClipManifest, seed: int) -> PartitionPlan:
    """Split patients into two sets of sizes ceil(n/2) and floor(n/2)
    by a seeded shuffle of the sorted patient list."""
    patients = sorted(manifest.patient_ids)
    if len(patients) < 2:
        raise TooFewPatients(f"need at least 2 patients, have {len(patients)}")
    rng = random.Random(seed)
    rng.shuffle(patients)
    half = math.ceil(len(patients) / 2)
    return PartitionPlan(
        seed=seed,
        set_a_patients=frozenset(patients[:half]),
        set_b_patients=frozenset(patients[half:]),
    )


def select_and_exclude(
    plan: PartitionPlan,
    manifest: ClipManifest,
    n_per_set: int = 200,
    *,
    seed: int,
) -> PartitionPlan:
    """Draw ``n_per_set`` clips per patient set (set A feeds training,
    set B feeds test), then drop any selected clip flagged by at least
    one expert as not showing lung.

    One RNG drives both draws, set A first, from sorted clip lists, so
    the result is independent of manifest row order.
    """
    rng = random.Random(seed)
    by_clip = manifest.row_by_clip()
    selections = {}
    for set_name, patients in (("A", plan.set_a_patients), ("B", plan.set_b_patients)):
        pool = manifest.clips_of(patients)
        if len(pool) < n_per_set:
            raise InsufficientClips(set_name, len(pool), n_per_set)
        selections[set_name] = rng.sample(pool, n_per_set)
    excluded = frozenset(
        clip_id
        for selected in selections.values()
        for clip_id in selected
        if by_clip[clip_id].flagged
    )
    return PartitionPlan(
        seed=plan.seed,
        set_a_patients=plan.set_a_patients,
        set_b_patients=plan.set_b_patients,
        training_clips=frozenset(selections["A"]) - excluded,
        test_clips=frozenset(selections["B"]) - excluded,
        excluded_clips=excluded,
        selection_seed=seed,
    )


def plan_to_json(plan: PartitionPlan) -> str:
    """Serialize a plan with sorted id lists for byte-stable replay."""
    return json.dumps({
        "seed": plan.seed,
        "selection_seed": plan.selection_seed,
        "set_a_patients": sorted(plan.set_a_patients),
        "set_b_patients": sorted(plan.set_b_patients),
        "training_clips": sorted(plan.training_clips),
        "test_clips": sorted(plan.test_clips),
        "excluded_clips": sorted(plan.excluded_clips),
    }, indent=2) + "\n"


def plan_from_json(text: str) -> PartitionPlan:
    obj = json.loads(text)
    for name in ("seed", "set_a_patients", "set_b_patients"):
        if name not in obj:
            raise MissingField(name)
    return PartitionPlan(
        seed=int(obj["seed"]),
        set_a_patients=frozenset(obj["set_a_patients"]),
        set_b_patients=frozenset(obj["set_b_patients"]),
        training_clips=frozenset(obj.get("training_clips", [])),
        test_clips=frozenset(obj.get("test_clips", [])),
        excluded_clips=frozenset(obj.get("excluded_clips", [])),
        selection_seed=obj.get("selection_seed"),
    )


# ------------------------------------------------------ expert opinions


def load_expert_opinions(source: Source) -> Dict[str, Dict[str, ClassLabel]]:
    """Load an expert opinion CSV (clip_id,expert_id,label) into the
    clip_id -> {expert_id: label} mapping used by reference building."""
    text = _read_text(source)
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError(1, "empty opinion file") from None
    if header != ["clip_id", "expert_id", "label"]:
        raise ParseError(1, "columns must be clip_id,expert_id,label")
    opinions: Dict[str, Dict[str, ClassLabel]] = {}
    for line_no, record in enumerate(reader, start=2):
        if not record or (len(record) == 1 and not record[0].strip()):
            continue
        if len(record) != 3:
            raise ParseError(line_no, f"expected 3 fields, got {len(record)}")
        clip_id, expert_id, label_text = (v.strip() for v in record)
        if not clip_id:
            raise MissingField("clip_id")
        if not expert_id:
            raise MissingField("expert_id")
        try:
            label = ClassLabel.from_slug(label_text)
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from None
        per_clip = opinions.setdefault(clip_id, {})
        if expert_id in per_clip:
            raise ParseError(line_no, f"duplicate opinion for clip {clip_id!r} by {expert_id!r}")
        per_clip[expert_id] = label
    return opinions


def expert_opinions_to_csv(opinions: Mapping[str, Mapping[str, ClassLabel]]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["clip_id", "expert_id", "label"])
    for clip_id in sorted(opinions):
        per_clip = opinions[clip_id]
        for expert_id in sorted(per_clip):
            writer.writerow([clip_id, expert_id, per_clip[expert_id].slug])
    return out.getvalue()


def load_reference_csv(source: Source) -> Dict[str, ClassLabel]:
    """Load a reference label CSV (clip_id,label) into a label map."""
    text = _read_text(source)
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError(1, "empty reference file") from None
    if header != ["clip_id", "label"]:
        raise ParseError(1, "columns must be clip_id,label")
    labels: Dict[str, ClassLabel] = {}
    for line_no, record in enumerate(reader, start=2):
        if not record or (len(record) == 1 and not record[0].strip()):
            continue
        if len(record) != 2:
            raise ParseError(line_no, f"expected 2 fields, got {len(record)}")
        clip_id, label_text = (v.strip() for v in record)
        if not clip_id:
            raise MissingField("clip_id")
        if clip_id in labels:
            raise DuplicateClip(clip_id)
        try:
            labels[clip_id] = ClassLabel.from_slug(label_text)
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from None
    return labels


def reference_to_csv(labels: Mapping[str, ClassLabel]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["clip_id", "label"])
    for clip_id in sorted(labels):
        writer.writerow([clip_id, labels[clip_id].slug])
    return out.getvalue()


def clips_from_plan(
    manifest: ClipManifest,
    plan: PartitionPlan,
    reference_labels: Optional[Mapping[str, ClassLabel]] = None,
) -> Dict[str, Clip]:
    """Materialize clip records with roles from the plan.

    Any flagged clip is marked excluded, whether or not it was ever
    selected; the exclusion invariant is about content, not the draw.
    """
    references = reference_labels or {}
    clips = {}
    for row in manifest.rows:
        if row.clip_id in plan.training_clips:
            role = ClipRole.TRAINING
        elif row.clip_id in plan.test_clips:
            role = ClipRole.TEST
        else:
            role = ClipRole.UNLABELED
        clips[row.clip_id] = Clip(
            clip_id=row.clip_id,
            patient_id=row.patient_id,
            role=role,
            reference_label=references.get(row.clip_id),
            excluded=row.flagged,
            frame_rate_hz=row.frame_rate_hz,
            media_uri=row.media_uri,
        )
    return clips
