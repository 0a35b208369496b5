"""Exception hierarchy shared across the package.

Every error carries a stable machine-readable ``code``. The HTTP layer
maps codes onto JSON error bodies; the CLI prints them verbatim.
"""

from __future__ import annotations


class LabelingError(Exception):
    """Base class for all domain errors."""

    code = "Error"
    http_status = 400

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.code)
        self.detail = detail or self.code


class EmptyVotes(LabelingError):
    code = "EmptyVotes"


class MissingExpertOpinion(LabelingError):
    code = "MissingExpertOpinion"

    def __init__(self, clip_id: str, expert_id: str):
        super().__init__(f"clip {clip_id!r} has no opinion from expert {expert_id!r}")
        self.clip_id = clip_id
        self.expert_id = expert_id


class ClipExcluded(LabelingError):
    code = "ClipExcluded"
    http_status = 409


class EmptyPool(LabelingError):
    code = "EmptyPool"


class ContestClosed(LabelingError):
    code = "ContestClosed"
    http_status = 409


class ContestStillOpen(LabelingError):
    code = "ContestStillOpen"
    http_status = 409


class UnknownContest(LabelingError):
    code = "UnknownContest"
    http_status = 404


class UnknownClip(LabelingError):
    code = "UnknownClip"
    http_status = 404


class ClipNotInPool(LabelingError):
    code = "ClipNotInPool"
    http_status = 404


class CorruptLog(LabelingError):
    code = "CorruptLog"

    def __init__(self, line_no: int, detail: str = ""):
        super().__init__(f"log line {line_no}: {detail or 'malformed entry'}")
        self.line_no = line_no


class ParseError(LabelingError):
    code = "ParseError"

    def __init__(self, line_no: int, detail: str = ""):
        super().__init__(f"line {line_no}: {detail or 'cannot parse'}")
        self.line_no = line_no


class DuplicateClip(LabelingError):
    code = "DuplicateClip"

    def __init__(self, clip_id: str):
        super().__init__(f"duplicate clip_id {clip_id!r}")
        self.clip_id = clip_id


class MissingField(LabelingError):
    code = "MissingField"

    def __init__(self, name: str):
        super().__init__(f"missing required field {name!r}")
        self.name = name


class TooFewPatients(LabelingError):
    code = "TooFewPatients"


class InsufficientClips(LabelingError):
    code = "InsufficientClips"

    def __init__(self, set_name: str, have: int, want: int):
        super().__init__(f"set {set_name!r} has {have} clips, need {want}")
        self.set_name = set_name


class KeyMismatch(LabelingError):
    code = "KeyMismatch"


class NoOpinions(LabelingError):
    code = "NoOpinions"

    def __init__(self, clip_id: str):
        super().__init__(f"clip {clip_id!r} has no opinions to sample")
        self.clip_id = clip_id


class TooFew(LabelingError):
    code = "TooFew"


class ZeroVariance(LabelingError):
    code = "ZeroVariance"


class Empty(LabelingError):
    code = "Empty"


class BadMix(LabelingError):
    code = "BadMix"
