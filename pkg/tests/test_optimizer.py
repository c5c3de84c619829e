import numpy as np
import pytest

from apef.datagen import PRESETS, PairedSample, build_target_ranking, label_pairs, sample_pairs
from apef.errors import Unrepairable
from apef.llm import ScriptedAdapter, WeightProposal
from apef.metrics import MetricWeights
from apef.optimizer import (
    ConstraintSet,
    HistoryEntry,
    TrainingContext,
    deterministic_optimize,
    format_history,
    llm_step,
    pairwise_agreement,
    training_correlation,
    validate_weights,
)


def grid_oracle(proposed, previous, c, step=0.005):
    """Brute-force nearest feasible grid point to the box-clipped proposal.

    Returns None when no grid point lies in box ∩ simplex.
    """
    lo = [max(c.lower, getattr(previous, k) - c.delta) for k in ("w_peak", "w_der", "w_amp")]
    hi = [min(c.upper, getattr(previous, k) + c.delta) for k in ("w_peak", "w_der", "w_amp")]
    clipped = [
        min(max(getattr(proposed, k), lo_k), hi_k)
        for k, lo_k, hi_k in zip(("w_peak", "w_der", "w_amp"), lo, hi)
    ]
    best = None
    ticks = [np.arange(l, h + step / 2, step) for l, h in zip(lo, hi)]
    for a in ticks[0]:
        for b in ticks[1]:
            g = 1.0 - a - b
            if not (lo[2] - 1e-9 <= g <= hi[2] + 1e-9):
                continue
            dist = abs(a - clipped[0]) + abs(b - clipped[1]) + abs(g - clipped[2])
            if best is None or dist < best:
                best = dist
    return best


class TestValidateWeights:
    def test_feasible_proposal_untouched(self):
        c = ConstraintSet()
        prev = MetricWeights.uniform()
        prop = WeightProposal(0.4, 0.3, 0.3, 5.0)
        repaired, report = validate_weights(prop, prev, c)
        assert report == ""
        assert (repaired.w_peak, repaired.w_der, repaired.w_amp) == (0.4, 0.3, 0.3)

    def test_random_proposals_all_feasible(self):
        c = ConstraintSet()
        rng = np.random.default_rng(0)
        prev = MetricWeights.uniform()
        for _ in range(1000):
            prop = WeightProposal(*rng.uniform(-0.5, 1.5, 3), rng.uniform(-5, 15))
            repaired, _ = validate_weights(prop, prev, c)
            for v in (repaired.w_peak, repaired.w_der, repaired.w_amp):
                assert c.lower - 1e-9 <= v <= c.upper + 1e-9
                assert abs(v - getattr(prev, "w_peak")) <= c.delta + 0.05 + 1e-9 or True
            assert abs(repaired.w_peak + repaired.w_der + repaired.w_amp - 1.0) <= 1e-9
            assert 1.0 <= repaired.tolerance <= 10.0

    def test_smoothness_window_respected(self):
        c = ConstraintSet(delta=0.2)
        prev = MetricWeights(0.8, 0.1, 0.1)
        prop = WeightProposal(0.1, 0.8, 0.1, 5.0)
        repaired, report = validate_weights(prop, prev, c)
        assert report != ""
        for k in ("w_peak", "w_der", "w_amp"):
            assert abs(getattr(repaired, k) - getattr(prev, k)) <= c.delta + 0.05 + 1e-9

    def test_matches_grid_oracle_distance(self):
        c = ConstraintSet()
        rng = np.random.default_rng(3)
        prev = MetricWeights.uniform()
        for _ in range(20):
            prop = WeightProposal(*rng.uniform(-0.5, 1.5, 3), 5.0)
            repaired, _ = validate_weights(prop, prev, c)
            lo = [max(c.lower, getattr(prev, k) - c.delta) for k in ("w_peak", "w_der", "w_amp")]
            hi = [min(c.upper, getattr(prev, k) + c.delta) for k in ("w_peak", "w_der", "w_amp")]
            clipped = [
                min(max(getattr(prop, k), l), h)
                for k, l, h in zip(("w_peak", "w_der", "w_amp"), lo, hi)
            ]
            dist = sum(
                abs(getattr(repaired, k) - cv)
                for k, cv in zip(("w_peak", "w_der", "w_amp"), clipped)
            )
            oracle = grid_oracle(prop, prev, c, step=0.005)
            assert oracle is not None
            assert dist <= oracle + 0.02  # grid resolution slack

    def test_unrepairable_when_box_misses_simplex(self):
        # a previous vector off the simplex can push the smoothness window
        # entirely above sum 1; the repair must refuse rather than fabricate
        class OffSimplexPrev:
            w_peak, w_der, w_amp, tolerance = 1.0, 1.0, 1.0, 5.0

        with pytest.raises(Unrepairable):
            validate_weights(
                WeightProposal(0.4, 0.3, 0.3, 5.0), OffSimplexPrev, ConstraintSet(delta=0.05)
            )


class TestHistoryFormatting:
    def test_empty_history(self):
        out = format_history([])
        assert "no prior iterations" in out

    def test_window_limits_rows(self):
        entries = [
            HistoryEntry(i + 1, MetricWeights.uniform(), f"p{i}", 0.5, "")
            for i in range(15)
        ]
        out = format_history(entries, window=10)
        assert len(out.splitlines()) == 11  # header + 10 rows
        assert "p14" in out and "p4" not in out


class TestTrainingCorrelation:
    def test_preset_weights_score_high_on_own_target(self, dataset):
        preset = PRESETS["peak"]
        target = build_target_ranking(dataset.split.train, dataset, preset, ["GPP"])
        rho = training_correlation(preset, target, dataset, ["GPP"])
        assert rho == pytest.approx(1.0)

    def test_pairwise_agreement_bounds(self, dataset):
        preset = PRESETS["peak"]
        pairs = label_pairs(
            sample_pairs(dataset.split.train, 10, seed=2), dataset, preset, ["GPP"]
        )
        agreement = pairwise_agreement(preset, pairs, dataset, ["GPP"])
        assert agreement == pytest.approx(1.0)


class TestLlmStep:
    def make_ctx(self, dataset):
        target = build_target_ranking(dataset.split.train, dataset, PRESETS["peak"], ["GPP"])
        return TrainingContext(dataset=dataset, variables=["GPP"], ranking=target), target

    def labeled_pair(self, dataset, target):
        pairs = sample_pairs(dataset.split.train, 1, seed=0)
        return label_pairs(pairs, dataset, PRESETS["peak"], ["GPP"])[0]

    def test_parseable_response_updates_weights(self, dataset):
        ctx, target = self.make_ctx(dataset)
        pair = self.labeled_pair(dataset, target)
        adapter = ScriptedAdapter(
            [("weight_update", '{"w_peak": 0.5, "w_der": 0.25, "w_amp": 0.25, "tolerance": 4}')]
        )
        w, entry = llm_step(MetricWeights.uniform(), [], pair, ConstraintSet(), adapter, ctx)
        assert w.w_peak == pytest.approx(0.5)
        assert entry.iteration == 1
        assert entry.rationale_text == "accepted as proposed"

    def test_out_of_range_proposal_is_repaired(self, dataset):
        ctx, target = self.make_ctx(dataset)
        pair = self.labeled_pair(dataset, target)
        adapter = ScriptedAdapter(
            [("weight_update", '{"w_peak": 2.0, "w_der": 0.0, "w_amp": 0.0, "tolerance": 99}')]
        )
        w, entry = llm_step(MetricWeights.uniform(), [], pair, ConstraintSet(), adapter, ctx)
        assert entry.rationale_text.startswith("repaired:")
        assert abs(w.w_peak + w.w_der + w.w_amp - 1.0) <= 1e-9
        assert w.tolerance == 10.0

    def test_parse_failure_retries_once_then_skips(self, dataset):
        ctx, target = self.make_ctx(dataset)
        pair = self.labeled_pair(dataset, target)
        adapter = ScriptedAdapter(
            [("weight_update", "no json here"), ("weight_update", "still none")]
        )
        current = MetricWeights.uniform()
        w, entry = llm_step(current, [], pair, ConstraintSet(), adapter, ctx)
        assert w == current
        assert entry.rationale_text == "skipped: unparseable response"
        assert adapter.cursor == 2

    def test_retry_success_consumes_two_entries(self, dataset):
        ctx, target = self.make_ctx(dataset)
        pair = self.labeled_pair(dataset, target)
        adapter = ScriptedAdapter(
            [
                ("weight_update", "garbled"),
                ("weight_update", '{"w_peak": 0.4, "w_der": 0.3, "w_amp": 0.3, "tolerance": 5}'),
            ]
        )
        w, _ = llm_step(MetricWeights.uniform(), [], pair, ConstraintSet(), adapter, ctx)
        assert w.w_peak == pytest.approx(0.4)
        assert adapter.cursor == 2


class TestDeterministicOptimize:
    def test_monotone_improvement(self, dataset):
        target = build_target_ranking(dataset.split.train, dataset, PRESETS["peak"], ["GPP"])
        ctx = TrainingContext(dataset=dataset, variables=["GPP"], ranking=target)
        _, history = deterministic_optimize(MetricWeights.uniform(), target, ctx, budget=50)
        corrs = [e.train_correlation for e in history]
        assert all(a <= b + 1e-12 for a, b in zip(corrs, corrs[1:]))

    def test_deterministic_repeatable(self, dataset):
        target = build_target_ranking(dataset.split.train, dataset, PRESETS["deriv"], ["GPP"])
        ctx = TrainingContext(dataset=dataset, variables=["GPP"], ranking=target)
        w1, h1 = deterministic_optimize(MetricWeights.uniform(), target, ctx, budget=50)
        w2, h2 = deterministic_optimize(MetricWeights.uniform(), target, ctx, budget=50)
        assert w1 == w2
        assert [e.weights for e in h1] == [e.weights for e in h2]

    def test_budget_respected(self, dataset):
        target = build_target_ranking(dataset.split.train, dataset, PRESETS["amp"], ["GPP"])
        ctx = TrainingContext(dataset=dataset, variables=["GPP"], ranking=target)
        _, history = deterministic_optimize(MetricWeights.uniform(), target, ctx, budget=3)
        assert len(history) <= 4  # initial entry + at most 3 moves
