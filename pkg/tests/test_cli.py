"""Tests for the command line interface."""

import json
import socket
import threading
import time

import httpx
import pytest
from click.testing import CliRunner

from blinecrowd.cli import main
from blinecrowd.config import ServiceConfig
from blinecrowd.core import ClassLabel, Clip, ClipRole
from blinecrowd.engine import ContestEngine
from blinecrowd.oplog import read_log
from blinecrowd.simulate import ExperimentConfig


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    """One small simulation shared by the file-based CLI tests."""
    target = tmp_path_factory.mktemp("sim")
    cfg = ExperimentConfig(
        n_training=18, n_test=18, n_unlabeled=4, n_experts=4, n_users=24,
        mean_opinions_per_user=50.0, curve_samples=60, curve_k_max=5,
    )
    config_path = target / "config.json"
    config_path.write_text(json.dumps(cfg.to_dict()))
    result = CliRunner().invoke(main, [
        "simulate", "--config", str(config_path), "--seed", "3",
        "--out-dir", str(target / "out"),
    ])
    assert result.exit_code == 0, result.output
    return target


def test_simulate_artifacts(sim_dir):
    out = sim_dir / "out"
    report = json.loads((out / "report.json").read_text())
    assert report["seed"] == 3
    lines = (out / "log.jsonl").read_text().splitlines()
    entries = list(read_log(lines))
    assert len(entries) == report["counts"]["opinions"]
    reference = (out / "reference.csv").read_text().splitlines()
    assert reference[0] == "clip_id,label"
    assert len(reference) == 1 + 36  # training + test clips
    experts = (out / "experts.csv").read_text().splitlines()
    assert experts[0] == "clip_id,expert_id,label"
    assert len(experts) == 1 + 36 * 4


def test_simulate_default_profile_help():
    # --config is optional; just verify the option wiring, not a full run
    result = CliRunner().invoke(main, ["simulate", "--help"])
    assert result.exit_code == 0
    assert "--out-dir" in result.output


def test_analyze_outputs(sim_dir):
    out = sim_dir / "out"
    analysis_dir = sim_dir / "analysis"
    args = [
        "analyze", "--log", str(out / "log.jsonl"),
        "--reference", str(out / "reference.csv"),
        "--experts", str(out / "experts.csv"),
        "--seed", "3", "--k-max", "5", "--curve-samples", "60",
        "--out-dir", str(analysis_dir),
    ]
    result = CliRunner().invoke(main, args)
    assert result.exit_code == 0, result.output
    for name in ("fig3_concordance.csv", "fig4_curve.csv", "fig6_confusion.csv",
                 "fig7_learning.csv", "summary.json"):
        assert (analysis_dir / name).exists()
    for slug in ("no", "discrete", "confluent"):
        assert (analysis_dir / f"fig5_roc_{slug}.csv").exists()
    summary = json.loads((analysis_dir / "summary.json").read_text())
    assert 0.0 <= summary["concordance"]["crowd_full"] <= 1.0
    assert set(summary["auc"]) == {"no", "discrete", "confluent"}
    assert set(summary["experts"]["expert_full"]) == {f"expert-{i}" for i in range(4)}
    assert summary["stratified"]["cut"] == 0.8

    # deterministic: a second run writes byte-identical summary
    rerun_dir = sim_dir / "analysis2"
    args[-1] = str(rerun_dir)
    result = CliRunner().invoke(main, args)
    assert result.exit_code == 0, result.output
    assert (rerun_dir / "summary.json").read_text() == \
        (analysis_dir / "summary.json").read_text()


def test_analyze_requires_overlap(sim_dir, tmp_path):
    out = sim_dir / "out"
    ghost = tmp_path / "ghost.csv"
    ghost.write_text("clip_id,label\nnope-1,no\n")
    result = CliRunner().invoke(main, [
        "analyze", "--log", str(out / "log.jsonl"),
        "--reference", str(ghost), "--out-dir", str(tmp_path / "x"),
    ])
    assert result.exit_code != 0
    assert "no reference clip" in result.output


def _engine_snapshot(tmp_path):
    engine = ContestEngine(ServiceConfig(engine_seed=4))
    clips = {
        f"tr-{i}": Clip(clip_id=f"tr-{i}", patient_id="p1",
                        role=ClipRole.TRAINING,
                        reference_label=ClassLabel.NO_BLINES)
        for i in range(10)
    }
    engine.register_clips(clips)
    contest = engine.create_contest(sorted(clips), prize_pool=20.0, seed=4)
    t = 0.0
    for user in ("u1", "u2"):
        for i in range(10):
            t += 1.0
            engine.submit_opinion(contest, user, f"tr-{i}",
                                  ClassLabel.NO_BLINES, submitted_at=t)
    engine.close_contest(contest)
    (tmp_path / "dataset.json").write_text(engine.snapshot_dataset())
    (tmp_path / "contests.json").write_text(engine.snapshot_contests())
    (tmp_path / "log.jsonl").write_text(engine.export_log())
    return contest


def test_replay_round_trip(tmp_path):
    contest = _engine_snapshot(tmp_path)
    result = CliRunner().invoke(main, [
        "replay", "--dataset", str(tmp_path / "dataset.json"),
        "--contests", str(tmp_path / "contests.json"),
        "--log", str(tmp_path / "log.jsonl"),
        "--out-dir", str(tmp_path / "exports"),
    ])
    assert result.exit_code == 0, result.output
    assert "byte-identical" in result.output
    assert (tmp_path / "exports" / "consensus.csv").exists()
    assert (tmp_path / "exports" / f"leaderboard_{contest}.csv").exists()


def test_replay_rejects_tampered_log(tmp_path):
    _engine_snapshot(tmp_path)
    lines = (tmp_path / "log.jsonl").read_text().splitlines()
    doc = json.loads(lines[5])
    doc["eligible"] = not doc["eligible"]
    lines[5] = json.dumps(doc)
    (tmp_path / "log.jsonl").write_text("\n".join(lines) + "\n")
    result = CliRunner().invoke(main, [
        "replay", "--dataset", str(tmp_path / "dataset.json"),
        "--contests", str(tmp_path / "contests.json"),
        "--log", str(tmp_path / "log.jsonl"),
    ])
    assert result.exit_code != 0


# ------------------------------------------------------- live service


@pytest.fixture(scope="module")
def server_url():
    import uvicorn

    from blinecrowd.api import create_app

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    config = uvicorn.Config(create_app(ServiceConfig(engine_seed=11)),
                            host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.02)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def _manifest_csv(n_patients=12, per_patient=3):
    lines = ["clip_id,patient_id,media_uri,frame_rate_hz,no_lung_flags"]
    for p in range(n_patients):
        for c in range(per_patient):
            lines.append(f"p{p:02d}-c{c},patient-{p:02d},/m/p{p:02d}-c{c}.mp4,30,")
    return "\n".join(lines) + "\n"


def test_service_verbs(server_url, tmp_path):
    runner = CliRunner()
    manifest = tmp_path / "manifest.csv"
    manifest.write_text(_manifest_csv())
    result = runner.invoke(main, [
        "ingest", "manifest", str(manifest), "--url", server_url,
        "--partition-seed", "2", "--n-per-set", "10",
    ])
    assert result.exit_code == 0, result.output
    counts = json.loads(result.output)
    assert counts["clips"] == 36
    assert counts["training"] == 10
    assert counts["test"] == 10

    experts = tmp_path / "experts.csv"
    rows = ["clip_id,expert_id,label"]
    dataset = httpx.get(f"{server_url}/export/dataset.json").json()
    labeled = [c["clip_id"] for c in dataset["clips"]
               if c["role"] in ("training", "test")]
    for clip_id in labeled:
        for eid in ("e1", "e2", "e3"):
            rows.append(f"{clip_id},{eid},no")
    experts.write_text("\n".join(rows) + "\n")
    result = runner.invoke(main, [
        "ingest", "experts", str(experts), "--url", server_url, "--seed", "2",
    ])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["panel"] == ["e1", "e2", "e3"]

    out_file = tmp_path / "dataset.json"
    result = runner.invoke(main, [
        "export", "dataset", "--url", server_url, "-o", str(out_file),
    ])
    assert result.exit_code == 0, result.output
    assert len(json.loads(out_file.read_text())["clips"]) == 36

    result = runner.invoke(main, ["export", "consensus", "--url", server_url])
    assert result.exit_code == 0
    assert result.output.startswith("clip_id,")

    # settle flow against a real contest
    created = httpx.post(f"{server_url}/contests", json={
        "pool": labeled, "prize_pool": 30.0, "seed": 2,
    }).json()
    contest_id = created["contest_id"]
    result = runner.invoke(main, ["settle", contest_id, "--url", server_url])
    assert result.exit_code != 0  # still open
    assert "ContestStillOpen" in result.output
    httpx.post(f"{server_url}/contests/{contest_id}/close")
    result = runner.invoke(main, ["settle", contest_id, "--url", server_url])
    assert result.exit_code == 0, result.output
    settled = json.loads(result.output)
    assert settled["contest_id"] == contest_id

    result = runner.invoke(main, [
        "export", "leaderboard", contest_id, "--url", server_url,
    ])
    assert result.exit_code == 0

    result = runner.invoke(main, ["settle", "nope", "--url", server_url])
    assert result.exit_code != 0
    assert "UnknownContest" in result.output
