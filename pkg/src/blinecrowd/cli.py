"""Command line entry points.

Service verbs (``ingest``, ``settle``, ``export``) are thin HTTP clients
against a running server; ``serve`` starts one. ``replay``, ``analyze``,
and ``simulate`` run locally on files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import click
import httpx

from . import analysis
from .config import ServiceConfig, load_config
from .consensus import (
    agreement_level,
    build_leave_one_out_references,
    build_reference_standard,
    label_counts,
    supermajority_reached,
)
from .core import ALL_LABELS
from .engine import ContestEngine
from .errors import ZeroVariance
from .ingest import (
    expert_opinions_to_csv,
    load_expert_opinions,
    load_reference_csv,
    reference_to_csv,
)
from .oplog import read_log

DEFAULT_URL = "http://127.0.0.1:8000"


def _client(url: str) -> httpx.Client:
    return httpx.Client(base_url=url, timeout=30.0)


def _call(client: httpx.Client, method: str, path: str, **kwargs) -> httpx.Response:
    try:
        response = client.request(method, path, **kwargs)
    except httpx.HTTPError as exc:
        raise click.ClickException(f"request failed: {exc}") from exc
    if response.status_code >= 400:
        try:
            body = response.json()
            message = f"{body.get('error', response.status_code)}: {body.get('detail', '')}"
        except ValueError:
            message = response.text
        raise click.ClickException(message)
    return response


def _emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)


@click.group()
def main() -> None:
    """Crowd-labeling contest service, replay, analysis, and simulator."""


# ------------------------------------------------------------- serve


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Service config JSON; BLINE_* env vars override.")
@click.option("--host", default=None, help="Bind host (overrides config).")
@click.option("--port", type=int, default=None, help="Bind port (overrides config).")
def serve(config_path: Optional[str], host: Optional[str], port: Optional[int]) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .api import create_app

    config = load_config(config_path)
    app = create_app(config)
    uvicorn.run(app, host=host or config.host, port=port or config.port)


# ------------------------------------------------------------ ingest


@main.group()
def ingest() -> None:
    """Load datasets into a running service."""


@ingest.command("manifest")
@click.argument("source", type=click.Path(exists=True))
@click.option("--url", default=DEFAULT_URL, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["auto", "csv", "jsonl"]),
              default="auto", show_default=True)
@click.option("--partition-seed", type=int, default=None,
              help="Partition patients and select training/test sets.")
@click.option("--selection-seed", type=int, default=None,
              help="Selection seed (defaults to the partition seed).")
@click.option("--n-per-set", type=int, default=200, show_default=True)
def ingest_manifest(source: str, url: str, fmt: str,
                    partition_seed: Optional[int],
                    selection_seed: Optional[int], n_per_set: int) -> None:
    """Upload a clip manifest (CSV or JSON-lines)."""
    body = {"content": Path(source).read_text(), "format": fmt}
    if partition_seed is not None:
        body["partition"] = {
            "partition_seed": partition_seed,
            "selection_seed": selection_seed if selection_seed is not None else partition_seed,
            "n_per_set": n_per_set,
        }
    with _client(url) as client:
        response = _call(client, "POST", "/ingest/manifest", json=body)
    click.echo(response.text)


@ingest.command("experts")
@click.argument("source", type=click.Path(exists=True))
@click.option("--url", default=DEFAULT_URL, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True,
              help="Tie-break seed for the reference standard.")
def ingest_experts(source: str, url: str, seed: int) -> None:
    """Upload expert opinions (CSV: clip_id,expert_id,label) and build
    the reference standard."""
    body = {"content": Path(source).read_text(), "seed": seed}
    with _client(url) as client:
        response = _call(client, "POST", "/ingest/expert-opinions", json=body)
    click.echo(response.text)


# ------------------------------------------------------------ settle


@main.command()
@click.argument("contest_id")
@click.option("--url", default=DEFAULT_URL, show_default=True)
def settle(contest_id: str, url: str) -> None:
    """Settle prizes for a closed contest."""
    with _client(url) as client:
        response = _call(client, "POST", f"/contests/{contest_id}/settle")
    click.echo(response.text)


# ------------------------------------------------------------ export


@main.group()
def export() -> None:
    """Download service exports."""


def _export_command(name: str, path_template: str, takes_contest: bool):
    if takes_contest:
        @export.command(name)
        @click.argument("contest_id")
        @click.option("--url", default=DEFAULT_URL, show_default=True)
        @click.option("-o", "--out", default=None, help="Output file (default stdout).")
        def command(contest_id: str, url: str, out: Optional[str]) -> None:
            with _client(url) as client:
                response = _call(client, "GET", path_template.format(contest_id))
            _emit(response.text, out)
    else:
        @export.command(name)
        @click.option("--url", default=DEFAULT_URL, show_default=True)
        @click.option("-o", "--out", default=None, help="Output file (default stdout).")
        def command(url: str, out: Optional[str]) -> None:
            with _client(url) as client:
                response = _call(client, "GET", path_template)
            _emit(response.text, out)
    command.__doc__ = f"Fetch the {name} export."


_export_command("consensus", "/export/consensus.csv", False)
_export_command("log", "/export/log", False)
_export_command("dataset", "/export/dataset.json", False)
_export_command("contests", "/export/contests.json", False)
_export_command("leaderboard", "/contests/{}/export/leaderboard.csv", True)
_export_command("quality", "/contests/{}/export/quality.csv", True)


# ------------------------------------------------------------ replay


@main.command()
@click.option("--dataset", "dataset_path", type=click.Path(exists=True), required=True,
              help="dataset.json snapshot.")
@click.option("--contests", "contests_path", type=click.Path(exists=True), required=True,
              help="contests.json snapshot.")
@click.option("--log", "log_path", type=click.Path(exists=True), required=True,
              help="Opinion log (JSON lines).")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out-dir", type=click.Path(), default=None,
              help="Write rebuilt exports here.")
def replay(dataset_path: str, contests_path: str, log_path: str,
           config_path: Optional[str], out_dir: Optional[str]) -> None:
    """Rebuild engine state from snapshots plus the log, verifying every
    entry against the logged eligibility and feedback."""
    log_text = Path(log_path).read_text()
    engine = ContestEngine.replay(
        Path(dataset_path).read_text(),
        Path(contests_path).read_text(),
        log_text.splitlines(),
        config=load_config(config_path),
    )
    entries = engine.log_entries()
    round_trip = engine.export_log() == log_text
    click.echo(f"replayed {len(entries)} opinions; log round-trip "
               f"{'byte-identical' if round_trip else 'DIVERGED'}")
    if not round_trip:
        raise click.ClickException("re-exported log differs from input")
    if out_dir is not None:
        target = Path(out_dir)
        target.mkdir(parents=True, exist_ok=True)
        (target / "consensus.csv").write_text(engine.export_consensus_csv())
        (target / "dataset.json").write_text(engine.snapshot_dataset())
        (target / "contests.json").write_text(engine.snapshot_contests())
        for record in json.loads(engine.snapshot_contests())["contests"]:
            contest_id = record["contest_id"]
            (target / f"leaderboard_{contest_id}.csv").write_text(
                engine.export_leaderboard_csv(contest_id))
            (target / f"quality_{contest_id}.csv").write_text(
                engine.export_quality_csv(contest_id))
        click.echo(f"exports written to {target}")


# ----------------------------------------------------------- analyze


@main.command()
@click.option("--log", "log_path", type=click.Path(exists=True), required=True,
              help="Opinion log (JSON lines).")
@click.option("--reference", "reference_path", type=click.Path(exists=True), required=True,
              help="Reference labels CSV (clip_id,label).")
@click.option("--experts", "experts_path", type=click.Path(exists=True), default=None,
              help="Expert opinions CSV enabling per-expert and leave-one-out stats.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Service config (for the consensus policy).")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Engine seed used when the log was produced.")
@click.option("--k-max", type=int, default=15, show_default=True)
@click.option("--curve-samples", type=int, default=1000, show_default=True)
@click.option("--agreement-cut", type=float, default=0.8, show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
def analyze(log_path: str, reference_path: str, experts_path: Optional[str],
            config_path: Optional[str], seed: int, k_max: int,
            curve_samples: int, agreement_cut: float, out_dir: str) -> None:
    """Compute every figure CSV and a summary JSON from a log plus a
    reference standard."""
    config = load_config(config_path)
    policy = config.policy
    entries = list(read_log(Path(log_path).read_text().splitlines()))
    reference_all = load_reference_csv(reference_path)

    states = analysis.consensus_from_log(entries, policy, seed=seed)
    scored = sorted(set(reference_all) & set(states))
    if not scored:
        raise click.ClickException("no reference clip appears in the log")
    reference = {clip_id: reference_all[clip_id] for clip_id in scored}
    crowd_labels = analysis.crowd_labels_from_states(states, scored, seed)

    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    summary: dict = {
        "clips_scored": len(scored),
        "opinions": len(entries),
        "eligible_opinions": sum(1 for e in entries if e.eligible),
        "policy": {
            "min_eligible_opinions": policy.min_eligible_opinions,
            "min_agreement": policy.min_agreement,
            "skill_threshold": policy.skill_threshold,
            "window": policy.window,
        },
        "seed": seed,
    }

    # fig3: concordance per predictor
    crowd_report = analysis.concordance_report(crowd_labels, reference)
    fig3_rows = [("crowd", crowd_report)]
    summary["concordance"] = {
        "crowd_full": crowd_report.overall,
        "crowd_balanced": crowd_report.balanced,
        "crowd_per_class": {label.slug: value
                            for label, value in crowd_report.per_class.items()},
    }
    if experts_path is not None:
        expert_opinions = load_expert_opinions(experts_path)
        covered = {cid: ops for cid, ops in expert_opinions.items() if cid in reference}
        full = build_reference_standard(covered, seed)
        loos = build_leave_one_out_references(covered, seed)
        expert_ids = sorted({e for ops in covered.values() for e in ops})
        expert_full, expert_loo, crowd_loo = {}, {}, {}
        for eid, loo in zip(expert_ids, loos):
            labels = {cid: covered[cid][eid] for cid in covered}
            expert_full[eid] = analysis.concordance(labels, reference)
            loo_map = dict(loo.labels)
            expert_loo[eid] = analysis.concordance(labels, loo_map)
            crowd_loo[eid] = analysis.concordance(
                {cid: crowd_labels[cid] for cid in covered}, loo_map)
            fig3_rows.append((eid, analysis.concordance_report(labels, reference)))
        full_mean, full_sem = analysis.mean_sem(list(expert_full.values()))
        loo_mean, _ = analysis.mean_sem(list(expert_loo.values()))
        crowd_loo_mean, _ = analysis.mean_sem(list(crowd_loo.values()))
        try:
            loo_t = analysis.paired_t_test(
                [crowd_loo[e] - expert_loo[e] for e in expert_ids])
            loo_t_doc = {"t": loo_t.t, "p": loo_t.p_value}
        except ZeroVariance:
            loo_t_doc = None
        summary["experts"] = {
            "expert_full": expert_full,
            "expert_full_mean": full_mean,
            "expert_full_sem": full_sem,
            "expert_loo": expert_loo,
            "expert_loo_mean": loo_mean,
            "crowd_loo": crowd_loo,
            "crowd_loo_mean": crowd_loo_mean,
            "loo_paired_t": loo_t_doc,
        }
        # agreement correlation needs both sides to have opinions
        pairs = []
        for cid in covered:
            state = states[cid]
            if sum(state.eligible_counts) == 0:
                continue
            pairs.append((state.agreement,
                          agreement_level(label_counts(covered[cid].values()))))
        if len(pairs) >= 3:
            try:
                pearson = analysis.pearson_r([p[0] for p in pairs],
                                             [p[1] for p in pairs])
                summary["agreement_pearson"] = {"r": pearson.r, "p": pearson.p_value}
            except ZeroVariance:
                summary["agreement_pearson"] = None
    (target / "fig3_concordance.csv").write_text(
        analysis.concordance_table_csv(fig3_rows))

    # fig4: opinions-needed curve over eligible opinions
    per_clip = {cid: [] for cid in scored}
    for entry in entries:
        if entry.eligible and entry.clip_id in per_clip:
            per_clip[entry.clip_id].append(entry.label)
    voted = {cid: ops for cid, ops in per_clip.items() if ops}
    if voted:
        curve = analysis.accuracy_vs_opinion_count(
            voted, {cid: reference[cid] for cid in voted},
            k_max=k_max, n_samples=curve_samples, seed=seed)
        (target / "fig4_curve.csv").write_text(analysis.opinion_count_csv(curve))
        summary["curve_clips"] = len(voted)

    # fig5: one ROC per class
    summary["auc"] = {}
    fractions_base = {cid: states[cid].eligible_counts for cid in scored
                      if sum(states[cid].eligible_counts) > 0}
    for label in ALL_LABELS:
        fractions = analysis.vote_fractions_for(fractions_base, label)
        usable_ref = {cid: reference[cid] for cid in fractions}
        classes = set(usable_ref.values())
        if label not in classes or not (classes - {label}):
            summary["auc"][label.slug] = None
            continue
        roc = analysis.roc_per_class(fractions, usable_ref, label)
        (target / f"fig5_roc_{label.slug}.csv").write_text(analysis.roc_csv(roc))
        summary["auc"][label.slug] = roc.auc

    # fig6: confusion matrix
    (target / "fig6_confusion.csv").write_text(
        analysis.confusion_csv(analysis.confusion_matrix(crowd_labels, reference)))

    # fig7: learning curves
    curves = analysis.learning_curves(
        entries, reference,
        window=policy.window, skilled_threshold=policy.skill_threshold)
    (target / "fig7_learning.csv").write_text(analysis.learning_csv(curves))

    stratified, stratum_n = analysis.agreement_stratified_concordance(
        states, reference, agreement_cut=agreement_cut, seed=seed)
    summary["stratified"] = {
        "cut": agreement_cut, "concordance": stratified, "n": stratum_n,
    }
    with_votes = [cid for cid in scored if sum(states[cid].eligible_counts) > 0]
    summary["supermajority_rate"] = (
        sum(1 for cid in with_votes
            if supermajority_reached(states[cid].eligible_counts)) / len(with_votes)
        if with_votes else None
    )

    (target / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    click.echo(f"analysis written to {target}")


# ---------------------------------------------------------- simulate


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Experiment config JSON (defaults to the full-scale profile).")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
def simulate(config_path: Optional[str], seed: int, out_dir: str) -> None:
    """Run one synthetic experiment; write the opinion log, the report,
    and the reference/expert CSVs the analyze command consumes."""
    from .simulate import ExperimentConfig, build_world, study_profile_config, run_experiment

    if config_path is None:
        config = study_profile_config()
    else:
        config = ExperimentConfig.from_json(Path(config_path).read_text())
    lines, report = run_experiment(config, seed)
    world = build_world(config, seed)

    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    (target / "log.jsonl").write_text("\n".join(lines) + "\n")
    (target / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    (target / "reference.csv").write_text(
        reference_to_csv(world.full_reference.labels))
    (target / "experts.csv").write_text(
        expert_opinions_to_csv(world.expert_opinions))
    cc = report["concordance"]
    click.echo(f"seed {seed}: {report['counts']['opinions']} opinions, "
               f"crowd {cc['crowd_full']:.3f} vs expert mean {cc['expert_full_mean']:.3f}")
    click.echo(f"artifacts written to {target}")


if __name__ == "__main__":
    main()
