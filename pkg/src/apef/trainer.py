"""End-to-end training orchestration, test-set evaluation, the pairwise LLM
ranking baseline, and majority voting over human annotations."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .datagen import (
    Dataset,
    PairedSample,
    PRESETS,
    TargetRanking,
    build_target_ranking,
    label_pairs,
    sample_pairs,
)
from .errors import AdapterFailure, ApefError, UnresolvedTie
from .llm import LlmRequest
from .metrics import MetricWeights, mae, nse, r2, rmse
from .optimizer import (
    ConstraintSet,
    HistoryEntry,
    TrainingContext,
    _neighbors,
    format_history,
    llm_step,
    training_correlation,
)
from .policy import (
    Policy,
    extract_policy,
    metric_churn,
    policy_correlation,
    screen_new_metric,
    serialize_policy,
    validate_policy,
)
from .series import fleiss_kappa, spearman

SCENARIOS = ("preset_peak", "preset_deriv", "preset_amp", "expert", "ilamb")
ADAPTER_MODES = ("llm", "scripted", "deterministic")


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "preset_peak"
    variables: tuple[str, ...] = ("GPP",)
    warmup_iterations: int = 10
    main_iterations: int = 10
    validation_runs: int = 5
    seed: int = 0
    adapter_mode: str = "deterministic"
    pair_count: int | None = None
    delta: float = 0.2

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.adapter_mode not in ADAPTER_MODES:
            raise ValueError(f"unknown adapter mode {self.adapter_mode!r}")
        if self.warmup_iterations + self.main_iterations < 1:
            raise ValueError("need at least one iteration")
        if self.scenario == "ilamb" and len(self.variables) != 1:
            raise ValueError("the ilamb scenario is single-variable")
        if len(self.variables) not in (1, 2):
            raise ValueError("one or two variables supported")

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "variables": list(self.variables),
            "warmup_iterations": self.warmup_iterations,
            "main_iterations": self.main_iterations,
            "validation_runs": self.validation_runs,
            "seed": self.seed,
            "adapter_mode": self.adapter_mode,
            "pair_count": self.pair_count,
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(
            scenario=d.get("scenario", "preset_peak"),
            variables=tuple(d.get("variables", ("GPP",))),
            warmup_iterations=int(d.get("warmup_iterations", 10)),
            main_iterations=int(d.get("main_iterations", 10)),
            validation_runs=int(d.get("validation_runs", 5)),
            seed=int(d.get("seed", 0)),
            adapter_mode=d.get("adapter_mode", "deterministic"),
            pair_count=d.get("pair_count"),
            delta=float(d.get("delta", 0.2)),
        )


def resolve_targets(config: RunConfig, dataset: Dataset) -> dict[str, TargetRanking]:
    """Target rankings per split: computed from preset weights, or read from
    the dataset manifest for expert/ilamb scenarios."""
    if config.scenario.startswith("preset_"):
        preset = PRESETS[config.scenario.removeprefix("preset_")]
        variables = list(config.variables)
        return {
            name: build_target_ranking(ids, dataset, preset, variables)
            for name, ids in (
                ("train", dataset.split.train),
                ("validation", dataset.split.validation),
                ("test", dataset.split.test),
            )
        }
    targets = {}
    for name in ("train", "validation", "test"):
        key = f"{config.scenario}/{name}"
        if key not in dataset.rankings:
            raise ValueError(f"dataset manifest lacks target ranking {key!r}")
        targets[name] = dataset.rankings[key]
    return targets


def _deterministic_step(
    current: MetricWeights,
    ranking: TargetRanking,
    ctx: TrainingContext,
    c: ConstraintSet,
    score: float,
) -> tuple[MetricWeights, float, str]:
    """One first-improvement hill-climb move; weights unchanged when converged."""
    for cand in _neighbors(current, c):
        cand_score = training_correlation(cand, ranking, ctx.dataset, ctx.variables)
        if cand_score > score + 1e-12:
            return cand, cand_score, "accepted hill-climb move"
    return current, score, "no improving move"


@dataclass
class RunReport:
    config: dict
    final_weights: dict
    final_policy: dict | None
    history: list[dict]
    train_correlations: list[float]
    weight_validation_correlation: float
    policy_validation_correlation: float | None
    test_correlations: dict[str, float]
    policy_versions: int
    policy_log: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "config": self.config,
                "final_weights": self.final_weights,
                "final_policy": self.final_policy,
                "history": self.history,
                "train_correlations": self.train_correlations,
                "weight_validation_correlation": self.weight_validation_correlation,
                "policy_validation_correlation": self.policy_validation_correlation,
                "test_correlations": self.test_correlations,
                "policy_versions": self.policy_versions,
                "policy_log": self.policy_log,
            },
            sort_keys=True,
        )


def run_training(
    config: RunConfig,
    dataset: Dataset,
    adapter=None,
    initial_weights: MetricWeights | None = None,
) -> RunReport:
    """Warm-up weight steps, then main iterations interleaving one weight step
    with policy extraction, screening, and validation.  The test split is
    touched exactly once, after training."""
    if config.adapter_mode in ("llm", "scripted") and adapter is None:
        raise ValueError(f"adapter mode {config.adapter_mode!r} needs an adapter")
    variables = list(config.variables)
    targets = resolve_targets(config, dataset)
    ctx = TrainingContext(dataset=dataset, variables=variables, ranking=targets["train"])
    c = ConstraintSet(delta=config.delta)
    total = config.warmup_iterations + config.main_iterations
    pair_count = config.pair_count or total
    pairs = sample_pairs(dataset.split.train, pair_count, seed=config.seed)
    pairs = _label_by_target(pairs, targets["train"])

    weights = initial_weights or MetricWeights.uniform()
    history: list[HistoryEntry] = []
    incumbent: Policy | None = None
    policy_log: list[dict] = []
    score = training_correlation(weights, targets["train"], dataset, variables)

    try:
        for d in range(total):
            pair = pairs[d % len(pairs)]
            if config.adapter_mode == "deterministic":
                weights, score, note = _deterministic_step(
                    weights, targets["train"], ctx, c, score
                )
                history.append(
                    HistoryEntry(len(history) + 1, weights, pair.pair_id, score, note)
                )
            else:
                weights, entry = llm_step(weights, history, pair, c, adapter, ctx)
                history.append(entry)
                score = entry.train_correlation
            if d < config.warmup_iterations or config.adapter_mode == "deterministic":
                continue
            # Main-phase policy path: extract -> screen -> validate.
            candidate = extract_policy(
                format_history(history),
                f"pair {pair.pair_id}: {pair.id_a} vs {pair.id_b}, "
                f"preferred {pair.preferred}",
                incumbent,
                adapter,
            )
            event: dict = {"iteration": d + 1}
            if candidate is None:
                event["outcome"] = "extraction skipped"
                policy_log.append(event)
                continue
            added = set(candidate.metric_names) - set(
                incumbent.metric_names if incumbent else ()
            )
            screened_out = False
            if incumbent is not None and added:
                accept, stats = screen_new_metric(
                    added.pop(), candidate, pairs, dataset, variables
                )
                event["screening"] = stats.to_dict()
                screened_out = not accept
            if screened_out:
                event["outcome"] = "new metric rejected by screening"
                policy_log.append(event)
                continue
            decision = validate_policy(
                candidate,
                incumbent,
                dataset,
                dataset.split.validation,
                targets["validation"],
                variables,
                runs=config.validation_runs,
            )
            event["validation"] = decision.to_dict()
            if decision.accepted:
                incumbent = candidate
                event["outcome"] = f"accepted version {candidate.version}"
            else:
                event["outcome"] = "rejected by validation"
            policy_log.append(event)
    except ApefError as err:
        raise AdapterFailure(f"training aborted at iteration {len(history)}: {err}") from err

    weight_val = training_correlation(weights, targets["validation"], dataset, variables)
    policy_val = (
        policy_correlation(
            incumbent, dataset, dataset.split.validation, targets["validation"], variables
        )
        if incumbent is not None
        else None
    )
    test_correlations = evaluate_on_test(
        dataset, dataset.split.test, targets["test"], weights, incumbent, variables
    )
    return RunReport(
        config=config.to_dict(),
        final_weights=weights.to_dict(),
        final_policy=incumbent.to_dict() if incumbent else None,
        history=[h.to_dict() for h in history],
        train_correlations=[h.train_correlation for h in history],
        weight_validation_correlation=weight_val,
        policy_validation_correlation=policy_val,
        test_correlations=test_correlations,
        policy_versions=incumbent.version if incumbent else 0,
        policy_log=policy_log,
    )


def _label_by_target(pairs: list[PairedSample], target: TargetRanking) -> list[PairedSample]:
    out = []
    for p in pairs:
        sa, sb = target.score_of(p.id_a), target.score_of(p.id_b)
        out.append(p.labeled("A" if sa >= sb else "B"))
    return out


def _mean_metric(fn, dataset: Dataset, sid: str, variables: list[str]) -> float:
    return float(
        np.mean(
            [
                fn(dataset.predictions[sid][var], dataset.observations[var])
                for var in variables
            ]
        )
    )


def evaluate_on_test(
    dataset: Dataset,
    test_ids: tuple[str, ...],
    target: TargetRanking,
    weights: MetricWeights,
    policy: Policy | None,
    variables: list[str],
) -> dict[str, float]:
    """Spearman against the target ranking for the final weights, the final
    policy, and each baseline.  Error metrics rank ascending (negated scores),
    fit metrics descending."""
    from .datagen import score_series

    targets = [target.score_of(sid) for sid in test_ids]

    def corr(scores):
        return spearman(scores, targets)

    out = {
        "weights": corr([score_series(dataset, sid, weights, variables) for sid in test_ids]),
        "r2": corr([_mean_metric(r2, dataset, sid, variables) for sid in test_ids]),
        "rmse": corr([-_mean_metric(rmse, dataset, sid, variables) for sid in test_ids]),
        "mae": corr([-_mean_metric(mae, dataset, sid, variables) for sid in test_ids]),
        "nse": corr([_mean_metric(nse, dataset, sid, variables) for sid in test_ids]),
    }
    if policy is not None:
        out["policy"] = policy_correlation(policy, dataset, test_ids, target, variables)
    return out


# ---------------------------------------------------------------------------
# PRP-Rank baseline: all-pairs LLM tournament
# ---------------------------------------------------------------------------

_VERDICT_RE = re.compile(r"\b([AB])\b")


def prp_rank(
    candidate_ids: tuple[str, ...],
    dataset: Dataset,
    variables: list[str],
    adapter,
) -> TargetRanking:
    """Rank candidates by win counts over all C(n,2) pairwise LLM verdicts.

    An unparseable verdict counts as half a win for each side.
    """
    ids = sorted(candidate_ids)
    wins = {sid: 0.0 for sid in ids}
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            payload = {
                "candidate_A": {
                    var: list(dataset.predictions[ids[i]][var].values) for var in variables
                },
                "candidate_B": {
                    var: list(dataset.predictions[ids[j]][var].values) for var in variables
                },
                "observation": {
                    var: list(dataset.observations[var].values) for var in variables
                },
            }
            prompt = (
                "Which candidate prediction better matches the observation? "
                "Answer with the single letter A or B.\n\n" + json.dumps(payload)
            )
            response = adapter.complete(
                LlmRequest(
                    system_text="You compare time-series predictions against observations.",
                    user_text=prompt,
                    request_tag="prp_rank",
                )
            )
            m = _VERDICT_RE.search(response.text)
            if m is None:
                wins[ids[i]] += 0.5
                wins[ids[j]] += 0.5
            elif m.group(1) == "A":
                wins[ids[i]] += 1.0
            else:
                wins[ids[j]] += 1.0
    ordered = sorted(ids, key=lambda sid: (-wins[sid], sid))
    return TargetRanking(
        ids=tuple(ordered),
        scores=tuple(wins[sid] for sid in ordered),
        source="prp_rank",
    )


# ---------------------------------------------------------------------------
# Majority voting over human annotations
# ---------------------------------------------------------------------------


def _vote_fields(vote) -> tuple[str, str, str]:
    if isinstance(vote, dict):
        return vote["pair_id"], vote["rater_id"], vote["choice"]
    return vote.pair_id, vote.rater_id, vote.choice


def majority_vote(
    annotations: list,
    pairs: list[PairedSample],
    tie_break_rater: str | None = None,
) -> tuple[TargetRanking, float | None]:
    """Majority label per pair, win-count ranking, and Fleiss' kappa.

    Kappa is computed from the per-pair choice counts and is None when rater
    counts differ across pairs.  An even split raises UnresolvedTie unless a
    tie-break rater is configured.
    """
    by_pair: dict[str, list[tuple[str, str]]] = {}
    for vote in annotations:
        pair_id, rater_id, choice = _vote_fields(vote)
        by_pair.setdefault(pair_id, []).append((rater_id, choice))
    pair_map = {p.pair_id: p for p in pairs}
    wins: dict[str, float] = {}
    counts = []
    for pair_id, votes in sorted(by_pair.items()):
        if pair_id not in pair_map:
            raise ValueError(f"votes reference unknown pair {pair_id!r}")
        n_a = sum(1 for _, c in votes if c == "A")
        n_b = sum(1 for _, c in votes if c == "B")
        counts.append([n_a, n_b])
        if n_a == n_b:
            tie_votes = dict((r, c) for r, c in votes)
            if tie_break_rater is None or tie_break_rater not in tie_votes:
                raise UnresolvedTie(pair_id)
            majority = tie_votes[tie_break_rater]
        else:
            majority = "A" if n_a > n_b else "B"
        pair = pair_map[pair_id]
        winner = pair.id_a if majority == "A" else pair.id_b
        loser = pair.id_b if majority == "A" else pair.id_a
        wins[winner] = wins.get(winner, 0.0) + 1.0
        wins.setdefault(loser, 0.0)
    totals = {sum(row) for row in counts}
    kappa = None
    if len(totals) == 1 and totals and next(iter(totals)) >= 2:
        try:
            kappa = fleiss_kappa(counts)
        except ApefError:
            kappa = None
    ordered = sorted(wins, key=lambda sid: (-wins[sid], sid))
    ranking = TargetRanking(
        ids=tuple(ordered),
        scores=tuple(wins[sid] for sid in ordered),
        source="expert_majority",
    )
    return ranking, kappa
