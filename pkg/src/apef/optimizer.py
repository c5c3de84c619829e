"""Pairwise-preference-driven adjustment of the base-metric weights.

Two routes: an LLM-guided step with constraint enforcement, and a
deterministic coordinate-descent hill climber that doubles as the non-LLM
mode and the oracle for the LLM path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .datagen import Dataset, PairedSample, TargetRanking, score_series
from .errors import ParseFailure, Unrepairable
from .llm import DEFAULT_TEMPERATURES, LlmRequest, parse_weight_response
from .metrics import (
    MetricWeights,
    TOLERANCE_LOWER,
    TOLERANCE_UPPER,
    WEIGHT_LOWER,
    WEIGHT_UPPER,
    base_metric,
)
from .series import spearman

WEIGHT_KEYS = ("w_peak", "w_der", "w_amp")
HISTORY_WINDOW = 10
HILL_CLIMB_STEP = 0.05
_EPS = 1e-9


@dataclass(frozen=True)
class ConstraintSet:
    lower: float = WEIGHT_LOWER
    upper: float = WEIGHT_UPPER
    delta: float = 0.2
    tolerance_bounds: tuple[float, float] = (TOLERANCE_LOWER, TOLERANCE_UPPER)

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.lower >= self.upper or self.tolerance_bounds[0] >= self.tolerance_bounds[1]:
            raise ValueError("bounds must be ordered")


@dataclass(frozen=True)
class HistoryEntry:
    iteration: int
    weights: MetricWeights
    pair_id: str
    train_correlation: float
    rationale_text: str = ""

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "weights": self.weights.to_dict(),
            "pair_id": self.pair_id,
            "train_correlation": self.train_correlation,
            "rationale_text": self.rationale_text,
        }


@dataclass
class TrainingContext:
    """Everything a weight step needs to score pairs and rankings."""

    dataset: Dataset
    variables: list[str]
    ranking: TargetRanking


def format_history(history: list[HistoryEntry], window: int = HISTORY_WINDOW) -> str:
    """Render the last `window` entries as a table, oldest first."""
    header = "iteration | w_peak | w_der | w_amp | tolerance | pair | train_correlation"
    if not history:
        return header + "\nno prior iterations"
    rows = [header]
    for entry in history[-window:]:
        w = entry.weights
        rows.append(
            f"{entry.iteration} | "
            f"{format(w.w_peak, '.17g')} | {format(w.w_der, '.17g')} | "
            f"{format(w.w_amp, '.17g')} | {format(w.tolerance, '.17g')} | "
            f"{entry.pair_id} | {format(entry.train_correlation, '.17g')}"
        )
    return "\n".join(rows)


def validate_weights(proposed, previous: MetricWeights, c: ConstraintSet) -> tuple[MetricWeights, str]:
    """Repair a proposed weight vector to the feasible set near the previous one.

    Each weight is clamped into bounds intersected with the smoothness window
    [prev - delta, prev + delta]; the three normalized weights are then pushed
    back onto the sum-1 simplex by spreading the residual over coordinates not
    pinned at a box edge.  Returns the repaired weights and a repair report
    ("" when the proposal was already feasible).
    """
    lo = [max(c.lower, getattr(previous, k) - c.delta) for k in WEIGHT_KEYS]
    hi = [min(c.upper, getattr(previous, k) + c.delta) for k in WEIGHT_KEYS]
    if sum(lo) > 1.0 + _EPS or sum(hi) < 1.0 - _EPS:
        raise Unrepairable(f"box [{lo}, {hi}] misses the simplex")
    notes = []
    w = []
    for k, lo_k, hi_k in zip(WEIGHT_KEYS, lo, hi):
        v = float(getattr(proposed, k))
        clipped = min(max(v, lo_k), hi_k)
        if clipped != v:
            notes.append(f"{k}: {v} -> {clipped}")
        w.append(clipped)
    # Spread the sum deficit over coordinates that still have slack.
    for _ in range(len(w) + 1):
        deficit = 1.0 - sum(w)
        if abs(deficit) <= _EPS:
            break
        free = [
            i for i in range(len(w))
            if (deficit > 0 and w[i] < hi[i] - _EPS) or (deficit < 0 and w[i] > lo[i] + _EPS)
        ]
        share = deficit / len(free)
        for i in free:
            w[i] = min(max(w[i] + share, lo[i]), hi[i])
    if abs(sum(w) - 1.0) > _EPS:  # pragma: no cover - box was checked feasible
        raise Unrepairable("renormalization failed")
    if abs(sum(w) - (proposed.w_peak + proposed.w_der + proposed.w_amp)) > _EPS and not notes:
        notes.append("renormalized to sum 1")
    tol_lo, tol_hi = c.tolerance_bounds
    tol = min(max(float(proposed.tolerance), tol_lo), tol_hi)
    if tol != proposed.tolerance:
        notes.append(f"tolerance: {proposed.tolerance} -> {tol}")
    repaired = MetricWeights(w_peak=w[0], w_der=w[1], w_amp=w[2], tolerance=tol)
    return repaired, "; ".join(notes)


def pairwise_agreement(
    weights: MetricWeights,
    pairs: list[PairedSample],
    dataset: Dataset,
    variables: list[str],
) -> float:
    """Fraction of labeled pairs where the metric's ordering matches the label."""
    if not pairs:
        return 0.0
    hits = 0
    for p in pairs:
        if p.preferred is None:
            raise ValueError(f"pair {p.pair_id} is unlabeled")
        sa = score_series(dataset, p.id_a, weights, variables)
        sb = score_series(dataset, p.id_b, weights, variables)
        predicted = "A" if sa >= sb else "B"
        hits += predicted == p.preferred
    return hits / len(pairs)


def training_correlation(
    weights: MetricWeights,
    ranking: TargetRanking,
    dataset: Dataset,
    variables: list[str],
) -> float:
    """Spearman correlation between metric scores and target scores over the
    ranking's ids."""
    scores = [score_series(dataset, sid, weights, variables) for sid in ranking.ids]
    targets = [ranking.score_of(sid) for sid in ranking.ids]
    return spearman(scores, targets)


def _pair_summary(pair: PairedSample, weights: MetricWeights, ctx: TrainingContext) -> str:
    lines = [f"pair {pair.pair_id}: candidate A = {pair.id_a}, candidate B = {pair.id_b}"]
    for label, sid in (("A", pair.id_a), ("B", pair.id_b)):
        parts = []
        for var in ctx.variables:
            bd = base_metric(
                ctx.dataset.predictions[sid][var], ctx.dataset.observations[var], weights
            )
            parts.append(
                f"{var}: similarity={bd.similarity:.6f} peak={bd.s_peak:.6f} "
                f"slope={bd.s_slope:.6f} curvature={bd.s_curv:.6f}"
            )
        lines.append(f"  {label}: " + "; ".join(parts))
    lines.append(f"desired ordering: {pair.preferred} should score higher")
    return "\n".join(lines)


WEIGHT_SYSTEM_PROMPT = (
    "You tune the weights of a time-series similarity metric. "
    "Respond with a JSON object containing exactly the keys "
    "w_peak, w_der, w_amp, tolerance."
)


def build_weight_prompt(
    current: MetricWeights,
    history: list[HistoryEntry],
    pair: PairedSample,
    c: ConstraintSet,
    ctx: TrainingContext,
) -> str:
    return "\n\n".join(
        [
            "Current weights: " + str(current.to_dict()),
            "Optimization history (oldest first):\n" + format_history(history),
            _pair_summary(pair, current, ctx),
            (
                f"Constraints: each of w_peak, w_der, w_amp in [{c.lower}, {c.upper}]; "
                f"w_peak + w_der + w_amp = 1; per-weight step at most {c.delta}; "
                f"tolerance in [{c.tolerance_bounds[0]}, {c.tolerance_bounds[1]}]."
            ),
            "Propose updated weights that better respect the desired ordering. "
            "Answer with a single JSON object.",
        ]
    )


def llm_step(
    current: MetricWeights,
    history: list[HistoryEntry],
    pair: PairedSample,
    c: ConstraintSet,
    adapter,
    ctx: TrainingContext,
) -> tuple[MetricWeights, HistoryEntry]:
    """One LLM-guided weight update: prompt, parse, repair, score, record.

    A parse failure triggers one retry with a stricter format reminder; a
    second failure keeps the current weights and records a skipped iteration.
    """
    if pair.preferred is None:
        raise ValueError("pair must be labeled")
    prompt = build_weight_prompt(current, history, pair, c, ctx)
    rationale = ""
    new_weights = current
    for attempt in range(2):
        text = prompt if attempt == 0 else (
            prompt + "\n\nREMINDER: reply with ONLY one JSON object with keys "
            "w_peak, w_der, w_amp, tolerance."
        )
        response = adapter.complete(
            LlmRequest(
                system_text=WEIGHT_SYSTEM_PROMPT,
                user_text=text,
                request_tag="weight_update",
                temperature=DEFAULT_TEMPERATURES["weight_update"],
            )
        )
        try:
            proposal = parse_weight_response(response.text)
        except ParseFailure:
            if attempt == 1:
                rationale = "skipped: unparseable response"
                break
            continue
        new_weights, repair = validate_weights(proposal, current, c)
        rationale = f"repaired: {repair}" if repair else "accepted as proposed"
        break
    entry = HistoryEntry(
        iteration=len(history) + 1,
        weights=new_weights,
        pair_id=pair.pair_id,
        train_correlation=training_correlation(new_weights, ctx.ranking, ctx.dataset, ctx.variables),
        rationale_text=rationale,
    )
    return new_weights, entry


def _neighbors(weights: MetricWeights, c: ConstraintSet) -> list[MetricWeights]:
    """Candidate moves in a fixed order: mass transfers between weight pairs,
    then tolerance steps of +-1 on the integer grid."""
    out = []
    vals = {k: getattr(weights, k) for k in WEIGHT_KEYS}
    for src, dst in itertools.permutations(WEIGHT_KEYS, 2):
        moved = dict(vals)
        moved[src] -= HILL_CLIMB_STEP
        moved[dst] += HILL_CLIMB_STEP
        if all(c.lower - _EPS <= v <= c.upper + _EPS for v in moved.values()):
            out.append(MetricWeights(tolerance=weights.tolerance, **moved))
    for step in (1.0, -1.0):
        tol = weights.tolerance + step
        if c.tolerance_bounds[0] <= tol <= c.tolerance_bounds[1]:
            out.append(MetricWeights(tolerance=tol, **vals))
    return out


def deterministic_optimize(
    initial: MetricWeights,
    ranking: TargetRanking,
    ctx: TrainingContext,
    c: ConstraintSet | None = None,
    budget: int = 200,
) -> tuple[MetricWeights, list[HistoryEntry]]:
    """First-improvement coordinate hill climbing on the weight simplex.

    Fully deterministic: candidates are scanned in a fixed order and the
    first strictly improving move is accepted, consuming one budget unit.
    The climb stops early when no candidate improves the objective.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    c = c or ConstraintSet()
    current = initial
    score = training_correlation(current, ranking, ctx.dataset, ctx.variables)
    history: list[HistoryEntry] = [
        HistoryEntry(1, current, "", score, "initial weights")
    ]
    for _ in range(budget):
        improved = False
        for cand in _neighbors(current, c):
            cand_score = training_correlation(cand, ranking, ctx.dataset, ctx.variables)
            if cand_score > score + 1e-12:
                current, score = cand, cand_score
                history.append(
                    HistoryEntry(
                        len(history) + 1, current, "", score, "accepted hill-climb move"
                    )
                )
                improved = True
                break
        if not improved:
            break
    return current, history
