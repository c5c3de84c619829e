"""Command-line entry points: score, gen, optimize, train, policy, serve."""

from __future__ import annotations

import json
import os
import sys

import click

from . import datagen, optimizer, policy as policy_mod, trainer
from .datagen import PRESETS, PairedSample, TargetRanking, load_dataset, save_dataset
from .errors import ApefError
from .llm import HttpAdapter, ScriptedAdapter, TranscriptWriter
from .metrics import MetricWeights, base_metric
from .series import from_csv


def _read_json(path: str):
    with open(path) as fh:
        return json.load(fh)


def _read_series_csv(path: str):
    with open(path) as fh:
        return from_csv(fh.read())


def _adapter_from_config(config: dict, transcript_path: str | None = None):
    """Build the model adapter named by the run config (llm or scripted)."""
    transcript = TranscriptWriter(transcript_path) if transcript_path else None
    mode = config.get("adapter_mode", "deterministic")
    if mode == "llm":
        llm = config.get("llm", {})
        if "endpoint" not in llm or "model" not in llm:
            raise click.UsageError('llm mode needs config {"llm": {"endpoint", "model"}}')
        return HttpAdapter(
            endpoint=llm["endpoint"],
            model=llm["model"],
            response_path=llm.get("response_path", "choices.0.message.content"),
            transcript=transcript,
        )
    if mode == "scripted":
        script_path = config.get("script")
        if not script_path:
            raise click.UsageError('scripted mode needs config {"script": "transcript.jsonl"}')
        return ScriptedAdapter.from_transcript(script_path, transcript=transcript)
    return None


@click.group()
def main():
    """Similarity scoring, synthetic data, weight optimization, policy
    evaluation, training runs, and the annotation service."""


@main.command()
@click.option("--weights", "weights_path", required=True, type=click.Path(exists=True))
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--obs", "obs_path", required=True, type=click.Path(exists=True))
def score(weights_path, pred_path, obs_path):
    """Print the full score breakdown for one prediction/observation pair."""
    weights = MetricWeights.from_dict(_read_json(weights_path))
    pred = _read_series_csv(pred_path)[0]
    obs = _read_series_csv(obs_path)[0]
    click.echo(base_metric(pred, obs, weights).to_json())


@main.command()
@click.option("--scenario", type=click.Choice(sorted(PRESETS)), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--count", type=int, default=20, show_default=True)
def gen(scenario, seed, out_dir, count):
    """Generate a synthetic dataset manifest with preset target rankings."""
    os.makedirs(out_dir, exist_ok=True)
    obs_set = datagen.default_observations()
    dataset = datagen.generate_dataset(obs_set, n=count, seed=seed)
    preset = PRESETS[scenario]
    for variables in (["GPP"], ["CO2"], ["GPP", "CO2"]):
        tag = "+".join(variables)
        for split_name, ids in (
            ("train", dataset.split.train),
            ("validation", dataset.split.validation),
            ("test", dataset.split.test),
        ):
            dataset.rankings[f"preset_{scenario}:{tag}/{split_name}"] = (
                datagen.build_target_ranking(ids, dataset, preset, variables)
            )
    path = os.path.join(out_dir, "dataset.json")
    save_dataset(dataset, path)
    click.echo(f"wrote {path} ({count} series, scenario {scenario}, seed {seed})")


@main.command()
@click.option("--mode", type=click.Choice(["llm", "deterministic"]), required=True)
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True))
@click.option("--target", "target_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--log", "log_path", default=None, type=click.Path())
def optimize(mode, pairs_path, target_path, config_path, data_path, log_path):
    """Optimize metric weights against a target ranking; JSONL iteration log."""
    config = _read_json(config_path)
    dataset = load_dataset(_resolve_dataset(data_path))
    target = TargetRanking.from_dict(_read_json(target_path))
    pairs = [PairedSample.from_dict(d) for d in _read_json(pairs_path)]
    variables = list(config.get("variables", ["GPP"]))
    ctx = optimizer.TrainingContext(dataset=dataset, variables=variables, ranking=target)
    c = optimizer.ConstraintSet(delta=float(config.get("delta", 0.2)))
    initial = MetricWeights.from_dict(config["initial_weights"]) if "initial_weights" in config else MetricWeights.uniform()
    if mode == "deterministic":
        weights, history = optimizer.deterministic_optimize(
            initial, target, ctx, c, budget=int(config.get("budget", 200))
        )
    else:
        adapter = _adapter_from_config({**config, "adapter_mode": "llm"})
        weights = initial
        history: list[optimizer.HistoryEntry] = []
        labeled = datagen.label_pairs(pairs, dataset, weights, variables) if pairs and pairs[0].preferred is None else pairs
        for i, pair in enumerate(labeled):
            weights, entry = optimizer.llm_step(weights, history, pair, c, adapter, ctx)
            history.append(entry)
    if log_path:
        with open(log_path, "w") as fh:
            for entry in history:
                fh.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")
    click.echo(json.dumps(weights.to_dict(), sort_keys=True))


def _resolve_dataset(data_path: str) -> str:
    if os.path.isdir(data_path):
        return os.path.join(data_path, "dataset.json")
    return data_path


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def train(config_path, data_path, out_dir):
    """Run the full training protocol and write a run report."""
    raw = _read_json(config_path)
    config = trainer.RunConfig.from_dict(raw)
    dataset = load_dataset(_resolve_dataset(data_path))
    os.makedirs(out_dir, exist_ok=True)
    adapter = _adapter_from_config(raw, transcript_path=os.path.join(out_dir, "transcript.jsonl"))
    try:
        report = trainer.run_training(config, dataset, adapter=adapter)
    except ApefError as err:
        raise click.ClickException(str(err))
    report_path = os.path.join(out_dir, "report.json")
    with open(report_path, "w") as fh:
        fh.write(report.to_json())
    with open(os.path.join(out_dir, "iterations.jsonl"), "w") as fh:
        for entry in report.history:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    click.echo(f"wrote {report_path}")


@main.group()
def policy():
    """Apply or validate evaluation policies."""


@policy.command("apply")
@click.option("--policy", "policy_path", required=True, type=click.Path(exists=True))
@click.option("--candidates", "candidates_path", required=True, type=click.Path(exists=True))
@click.option("--obs", "obs_path", required=True, type=click.Path(exists=True))
def policy_apply(policy_path, candidates_path, obs_path):
    """Score and rank candidate series under a policy."""
    with open(policy_path) as fh:
        pol = policy_mod.parse_policy(fh.read())
    obs = _read_series_csv(obs_path)[0]
    candidates = []
    if os.path.isdir(candidates_path):
        for name in sorted(os.listdir(candidates_path)):
            if name.endswith(".csv"):
                candidates.extend(_read_series_csv(os.path.join(candidates_path, name)))
    else:
        candidates = _read_series_csv(candidates_path)
    verdict = policy_mod.apply_policy(pol, candidates, obs)
    click.echo(json.dumps(verdict.to_dict(), sort_keys=True))


@policy.command("validate")
@click.option("--candidate", "candidate_path", required=True, type=click.Path(exists=True))
@click.option("--incumbent", "incumbent_path", default=None, type=click.Path(exists=True))
@click.option("--val", "val_path", required=True, type=click.Path(exists=True))
@click.option("--target", "target_key", default=None)
@click.option("--variables", default="GPP")
def policy_validate(candidate_path, incumbent_path, val_path, target_key, variables):
    """Multi-run validation of a candidate policy against the incumbent."""
    with open(candidate_path) as fh:
        candidate = policy_mod.parse_policy(fh.read())
    incumbent = None
    if incumbent_path:
        with open(incumbent_path) as fh:
            incumbent = policy_mod.parse_policy(fh.read())
    dataset = load_dataset(_resolve_dataset(val_path))
    var_list = variables.split("+")
    if target_key is None:
        preset_keys = [k for k in dataset.rankings if k.endswith("/validation")]
        if not preset_keys:
            raise click.UsageError("dataset has no validation target ranking; pass --target")
        target_key = sorted(preset_keys)[0]
    target = dataset.rankings[target_key]
    decision = policy_mod.validate_policy(
        candidate, incumbent, dataset, dataset.split.validation, target, var_list
    )
    click.echo(json.dumps(decision.to_dict(), sort_keys=True))


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--journal", "journal_path", required=True, type=click.Path())
@click.option("--token", default=None, help="Shared token required in X-Apef-Token.")
def serve(data_path, port, host, journal_path, token):
    """Run the pairwise-preference annotation service."""
    import uvicorn

    from .service import AnnotationStore, create_app

    dataset = load_dataset(_resolve_dataset(data_path))
    store = AnnotationStore(dataset, journal_path)
    app = create_app(store, token=token)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
