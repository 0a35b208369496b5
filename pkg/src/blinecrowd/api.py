"""HTTP layer: a FastAPI app wrapping a single ContestEngine instance.

All domain failures surface as LabelingError subclasses; one handler maps
them to {"error": code, "detail": ...} with the error's HTTP status.
"""

import io
from typing import Optional

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .config import ServiceConfig
from .consensus import build_reference_standard
from .core import ClipRole, User, UserKind
from .engine import ContestEngine
from .errors import LabelingError
from .ingest import (
    clips_from_plan,
    load_expert_opinions,
    load_manifest,
    partition_by_patient,
    select_and_exclude,
)
from .schemas import (
    ConsensusView,
    ContestCreateBody,
    ContestView,
    ErrorBody,
    ExpertOpinionsBody,
    ExpertOpinionsView,
    FeedbackView,
    LeaderboardView,
    ManifestIngestBody,
    ManifestIngestView,
    NextClipView,
    OpinionBody,
    SettleView,
)


def create_app(
    config: Optional[ServiceConfig] = None,
    engine: Optional[ContestEngine] = None,
) -> FastAPI:
    config = config or ServiceConfig()
    engine = engine or ContestEngine(config)
    app = FastAPI(title="blinecrowd", version="0.1.0")
    app.state.engine = engine
    app.state.config = config

    @app.exception_handler(LabelingError)
    async def labeling_error_handler(request: Request, exc: LabelingError):
        body = ErrorBody(error=exc.code, detail=str(exc))
        return JSONResponse(status_code=exc.http_status, content=body.model_dump())

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/contests", response_model=ContestView)
    def create_contest(body: ContestCreateBody):
        policy = body.policy.to_policy() if body.policy else None
        contest_id = engine.create_contest(
            body.pool, prize_pool=body.prize_pool, seed=body.seed, policy=policy
        )
        return ContestView.from_contest(engine.contest(contest_id))

    @app.get("/contests/{contest_id}", response_model=ContestView)
    def get_contest(contest_id: str):
        return ContestView.from_contest(engine.contest(contest_id))

    @app.post("/contests/{contest_id}/close", response_model=ContestView)
    def close_contest(contest_id: str):
        return ContestView.from_contest(engine.close_contest(contest_id))

    @app.get("/contests/{contest_id}/next-clip", response_model=NextClipView)
    def next_clip(contest_id: str, user: str = Query(min_length=1)):
        clip = engine.next_clip(contest_id, user)
        return NextClipView(
            clip_id=clip.clip_id,
            media_uri=clip.media_uri,
            frame_rate_hz=clip.frame_rate_hz,
        )

    @app.post("/opinions", response_model=FeedbackView)
    def submit_opinion(body: OpinionBody):
        feedback = engine.submit_opinion(
            body.contest_id, body.user_id, body.clip_id, body.parsed_label()
        )
        return FeedbackView.from_feedback(feedback)

    @app.get("/contests/{contest_id}/leaderboard", response_model=LeaderboardView)
    def leaderboard(contest_id: str):
        return LeaderboardView.from_rows(contest_id, engine.leaderboard(contest_id))

    @app.get("/clips/{clip_id}/consensus", response_model=ConsensusView)
    def clip_consensus(clip_id: str):
        return ConsensusView.from_state(engine.consensus_state(clip_id))

    @app.post("/contests/{contest_id}/settle", response_model=SettleView)
    def settle(contest_id: str):
        return SettleView.from_awards(contest_id, engine.settle_prizes(contest_id))

    @app.post("/ingest/manifest", response_model=ManifestIngestView)
    def ingest_manifest(body: ManifestIngestBody):
        text = body.content
        if body.format == "csv":
            source = io.StringIO(text)
            source.name = "upload.csv"
        elif body.format == "jsonl":
            source = io.StringIO(text)
            source.name = "upload.jsonl"
        else:
            source = io.StringIO(text)
        manifest = load_manifest(source)
        if body.partition is not None:
            plan = partition_by_patient(manifest, body.partition.partition_seed)
            plan = select_and_exclude(
                plan, manifest,
                n_per_set=body.partition.n_per_set,
                seed=body.partition.selection_seed,
            )
            clips = clips_from_plan(manifest, plan)
        else:
            clips = {row.clip_id: _unlabeled_clip(row) for row in manifest.rows}
        engine.register_clips(clips)
        roles = [c.role for c in clips.values()]
        return ManifestIngestView(
            clips=len(clips),
            training=sum(1 for r in roles if r is ClipRole.TRAINING),
            test=sum(1 for r in roles if r is ClipRole.TEST),
            unlabeled=sum(1 for r in roles if r is ClipRole.UNLABELED),
            excluded=sum(1 for c in clips.values() if c.excluded),
        )

    @app.post("/ingest/expert-opinions", response_model=ExpertOpinionsView)
    def ingest_expert_opinions(body: ExpertOpinionsBody):
        opinions = load_expert_opinions(io.StringIO(body.content))
        reference = build_reference_standard(opinions, body.seed)
        for expert_id in sorted({e for ops in opinions.values() for e in ops}):
            try:
                engine.register_user(User(user_id=expert_id, kind=UserKind.EXPERT))
            except ValueError:
                pass  # already registered as an expert elsewhere
        n = engine.set_reference_labels(reference.labels)
        return ExpertOpinionsView(
            clips_labeled=n,
            panel=sorted({e for ops in opinions.values() for e in ops}),
        )

    @app.get("/export/consensus.csv", response_class=PlainTextResponse)
    def export_consensus():
        return PlainTextResponse(engine.export_consensus_csv(), media_type="text/csv")

    @app.get("/export/log", response_class=PlainTextResponse)
    def export_log():
        return PlainTextResponse(engine.export_log(), media_type="application/x-ndjson")

    @app.get("/export/dataset.json", response_class=PlainTextResponse)
    def export_dataset():
        return PlainTextResponse(engine.snapshot_dataset(), media_type="application/json")

    @app.get("/export/contests.json", response_class=PlainTextResponse)
    def export_contests():
        return PlainTextResponse(engine.snapshot_contests(), media_type="application/json")

    @app.get("/contests/{contest_id}/export/leaderboard.csv", response_class=PlainTextResponse)
    def export_leaderboard(contest_id: str):
        return PlainTextResponse(
            engine.export_leaderboard_csv(contest_id), media_type="text/csv"
        )

    @app.get("/contests/{contest_id}/export/quality.csv", response_class=PlainTextResponse)
    def export_quality(contest_id: str):
        return PlainTextResponse(
            engine.export_quality_csv(contest_id), media_type="text/csv"
        )

    return app


def _unlabeled_clip(row):
    from .core import Clip

    return Clip(
        clip_id=row.clip_id,
        patient_id=row.patient_id,
        excluded=row.flagged,
        frame_rate_hz=row.frame_rate_hz,
        media_uri=row.media_uri,
    )
