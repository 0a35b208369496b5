"""Append-only opinion log: one JSON object per line, UTF-8, fixed key
order. The log is the system of record; live service state is always
reconstructible from it (see engine.replay_log).

Timestamps are recorded for audit but never drive logic; everything
keys off ``opinion_id`` order, which is strictly increasing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .core import ClassLabel, Opinion, UserKind
from .errors import CorruptLog

DISPOSITION_REVEALED = "revealed"
DISPOSITION_RECORDED = "recorded"

#: Serialized field order, fixed for byte-stable logs.
LOG_FIELDS = (
    "opinion_id",
    "contest_id",
    "user_id",
    "user_kind",
    "clip_id",
    "label",
    "submitted_at",
    "trailing_accuracy_at_submission",
    "eligible",
    "disposition",
    "revealed_label",
)


@dataclass(frozen=True, slots=True)
class OpinionLogEntry:
    """One accepted submission plus the feedback that was issued for it.

    ``revealed_label`` is the label shown to the submitter when
    ``disposition`` is "revealed", else None.
    """

    opinion_id: int
    contest_id: str
    user_id: str
    user_kind: UserKind
    clip_id: str
    label: ClassLabel
    submitted_at: float
    trailing_accuracy_at_submission: Optional[float]
    eligible: bool
    disposition: str
    revealed_label: Optional[ClassLabel] = None

    @property
    def opinion(self) -> Opinion:
        return Opinion(
            opinion_id=self.opinion_id,
            user_id=self.user_id,
            clip_id=self.clip_id,
            label=self.label,
            submitted_at=self.submitted_at,
            trailing_accuracy_at_submission=self.trailing_accuracy_at_submission,
            eligible=self.eligible,
        )


def entry_to_json(entry: OpinionLogEntry) -> str:
    """One log line (no trailing newline), keys in ``LOG_FIELDS`` order."""
    record = {
        "opinion_id": entry.opinion_id,
        "contest_id": entry.contest_id,
        "user_id": entry.user_id,
        "user_kind": entry.user_kind.value,
        "clip_id": entry.clip_id,
        "label": entry.label.slug,
        "submitted_at": entry.submitted_at,
        "trailing_accuracy_at_submission": entry.trailing_accuracy_at_submission,
        "eligible": entry.eligible,
        "disposition": entry.disposition,
        "revealed_label": None if entry.revealed_label is None else entry.revealed_label.slug,
    }
    return json.dumps(record, separators=(", ", ": "))


def entry_from_json(line: str, line_no: int = 0) -> OpinionLogEntry:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorruptLog(line_no, f"bad JSON: {exc.msg}") from None
    if not isinstance(record, dict):
        raise CorruptLog(line_no, "entry is not an object")
    missing = [f for f in LOG_FIELDS if f not in record]
    if missing:
        raise CorruptLog(line_no, f"missing fields: {', '.join(missing)}")
    try:
        revealed = record["revealed_label"]
        entry = OpinionLogEntry(
            opinion_id=int(record["opinion_id"]),
            contest_id=str(record["contest_id"]),
            user_id=str(record["user_id"]),
            user_kind=UserKind(record["user_kind"]),
            clip_id=str(record["clip_id"]),
            label=ClassLabel.from_slug(record["label"]),
            submitted_at=float(record["submitted_at"]),
            trailing_accuracy_at_submission=(
                None if record["trailing_accuracy_at_submission"] is None
                else float(record["trailing_accuracy_at_submission"])
            ),
            eligible=bool(record["eligible"]),
            disposition=str(record["disposition"]),
            revealed_label=None if revealed is None else ClassLabel.from_slug(revealed),
        )
    except (TypeError, ValueError) as exc:
        raise CorruptLog(line_no, str(exc)) from None
    if entry.disposition not in (DISPOSITION_REVEALED, DISPOSITION_RECORDED):
        raise CorruptLog(line_no, f"unknown disposition {entry.disposition!r}")
    if (entry.disposition == DISPOSITION_REVEALED) != (entry.revealed_label is not None):
        raise CorruptLog(line_no, "revealed_label must accompany exactly the revealed disposition")
    return entry


def read_log(lines: Iterable[str]) -> Iterator[OpinionLogEntry]:
    """Parse a log stream, enforcing strictly increasing opinion_id."""
    last_id = 0
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        entry = entry_from_json(line, line_no)
        if entry.opinion_id <= last_id:
            raise CorruptLog(line_no, f"opinion_id {entry.opinion_id} not increasing")
        last_id = entry.opinion_id
        yield entry
