"""Synthetic prediction generation, dataset splitting, pair sampling, and target rankings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InvalidParams
from .metrics import MetricWeights, base_metric, two_variable_score
from .series import TimeSeries

KINDS = ("noise", "slice_shuffle", "magnitude_warp", "window_warp")

PRESETS = {
    "peak": MetricWeights(0.8, 0.1, 0.1),
    "deriv": MetricWeights(0.1, 0.8, 0.1),
    "amp": MetricWeights(0.1, 0.1, 0.8),
}


@dataclass(frozen=True)
class AugmentationSpec:
    kind: str
    params: dict
    seed: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParams(f"unknown kind {self.kind!r}")
        p = self.params
        if self.kind == "noise" and not p.get("sigma", 0) > 0:
            raise InvalidParams("noise needs sigma > 0")
        if self.kind == "slice_shuffle" and p.get("slices", 0) < 2:
            raise InvalidParams("slice_shuffle needs slices >= 2")
        if self.kind == "magnitude_warp" and p.get("knots", 0) < 2:
            raise InvalidParams("magnitude_warp needs knots >= 2")
        if self.kind == "window_warp" and not (0 < p.get("window_frac", 0) < 1):
            raise InvalidParams("window_warp needs window_frac in (0, 1)")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentationSpec":
        return cls(kind=d["kind"], params=d["params"], seed=int(d["seed"]))


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "train": list(self.train),
            "validation": list(self.validation),
            "test": list(self.test),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSplit":
        return cls(tuple(d["train"]), tuple(d["validation"]), tuple(d["test"]))


@dataclass(frozen=True)
class TargetRanking:
    """Series ids ordered best-first with weakly decreasing target scores."""

    ids: tuple[str, ...]
    scores: tuple[float, ...]
    source: str

    def score_of(self, series_id: str) -> float:
        return self.scores[self.ids.index(series_id)]

    def to_dict(self) -> dict:
        return {"ids": list(self.ids), "scores": list(self.scores), "source": self.source}

    @classmethod
    def from_dict(cls, d: dict) -> "TargetRanking":
        return cls(tuple(d["ids"]), tuple(float(s) for s in d["scores"]), d["source"])


@dataclass(frozen=True)
class PairedSample:
    """Two candidate ids for one instance, optionally with a preference label."""

    pair_id: str
    id_a: str
    id_b: str
    preferred: str | None = None  # "A" or "B"

    def labeled(self, preferred: str) -> "PairedSample":
        return PairedSample(self.pair_id, self.id_a, self.id_b, preferred)

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "id_a": self.id_a,
            "id_b": self.id_b,
            "preferred": self.preferred,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PairedSample":
        return cls(d["pair_id"], d["id_a"], d["id_b"], d.get("preferred"))


# ---------------------------------------------------------------------------
# Augmentations.  Every kind preserves length and is deterministic per seed.
# ---------------------------------------------------------------------------


def augment(obs: TimeSeries, spec: AugmentationSpec) -> TimeSeries:
    rng = np.random.default_rng(spec.seed)
    x = obs.values
    t = x.size
    p = spec.params
    if spec.kind == "noise":
        out = x + rng.normal(0.0, p["sigma"], size=t)
    elif spec.kind == "slice_shuffle":
        pieces = np.array_split(np.arange(t), p["slices"])
        order = rng.permutation(len(pieces))
        out = x[np.concatenate([pieces[k] for k in order])]
    elif spec.kind == "magnitude_warp":
        knots = p["knots"]
        knot_pos = np.linspace(0, t - 1, knots + 2)
        knot_val = rng.normal(1.0, p.get("sigma", 0.2), size=knots + 2)
        envelope = CubicSpline(knot_pos, knot_val)(np.arange(t))
        out = x * np.clip(envelope, 0.05, None)
    elif spec.kind == "window_warp":
        win = max(2, int(round(p["window_frac"] * t)))
        start = int(rng.integers(0, t - win + 1))
        factor = p.get("factor", 2.0) if rng.random() < 0.5 else 1.0 / p.get("factor", 2.0)
        window = x[start : start + win]
        stretched = np.interp(
            np.linspace(0, win - 1, max(2, int(round(win * factor)))),
            np.arange(win),
            window,
        )
        glued = np.concatenate([x[:start], stretched, x[start + win :]])
        out = np.interp(np.linspace(0, glued.size - 1, t), np.arange(glued.size), glued)
    else:  # pragma: no cover - guarded by the spec constructor
        raise InvalidParams(spec.kind)
    return obs.with_values(out)


def default_spec(kind: str, obs: TimeSeries, seed: int) -> AugmentationSpec:
    if kind == "noise":
        params = {"sigma": 0.1 * float(obs.values.std())}
    elif kind == "slice_shuffle":
        params = {"slices": 4}
    elif kind == "magnitude_warp":
        params = {"knots": 4, "sigma": 0.2}
    elif kind == "window_warp":
        params = {"window_frac": 0.1, "factor": 2.0}
    else:
        raise InvalidParams(kind)
    return AugmentationSpec(kind=kind, params=params, seed=seed)


def _largest_remainder_split(n: int, ratios=(0.5, 0.25, 0.25)) -> tuple[int, int, int]:
    exact = [n * r for r in ratios]
    floors = [int(np.floor(e)) for e in exact]
    short = n - sum(floors)
    order = sorted(range(3), key=lambda k: exact[k] - floors[k], reverse=True)
    for k in order[:short]:
        floors[k] += 1
    return tuple(floors)


@dataclass
class Dataset:
    """Observations plus generated predictions, with full provenance."""

    observations: dict[str, TimeSeries]  # variable -> observation series
    predictions: dict[str, dict[str, TimeSeries]]  # series id -> variable -> series
    specs: dict[str, AugmentationSpec]  # series id -> augmentation provenance
    split: DatasetSplit
    rankings: dict[str, TargetRanking] = field(default_factory=dict)

    @property
    def variables(self) -> list[str]:
        return sorted(self.observations)


def generate_dataset(obs_set: list[TimeSeries], n: int = 20, seed: int = 0) -> Dataset:
    """Generate n augmented prediction sets and a 50/25/25 split.

    The four augmentation kinds are cycled so each contributes n/4 series
    (uncomposed).  A prediction set shares one spec kind across variables,
    with per-variable seeds derived from the dataset seed.
    """
    if n < 4:
        raise ValueError("need n >= 4")
    observations = {s.variable: s for s in obs_set}
    predictions: dict[str, dict[str, TimeSeries]] = {}
    specs: dict[str, AugmentationSpec] = {}
    seed_seq = np.random.SeedSequence(seed)
    child_seeds = seed_seq.generate_state(n * len(observations) + 1)
    k = 0
    for idx in range(n):
        sid = f"aug{idx:03d}"
        kind = KINDS[idx % len(KINDS)]
        predictions[sid] = {}
        for var in sorted(observations):
            spec = default_spec(kind, observations[var], int(child_seeds[k]))
            k += 1
            generated = augment(observations[var], spec)
            predictions[sid][var] = generated.with_values(generated.values, instance_id=sid)
            specs[f"{sid}/{var}"] = spec
    rng = np.random.default_rng(int(child_seeds[-1]))
    ids = sorted(predictions)
    order = [ids[i] for i in rng.permutation(len(ids))]
    n_train, n_val, n_test = _largest_remainder_split(n)
    split = DatasetSplit(
        train=tuple(order[:n_train]),
        validation=tuple(order[n_train : n_train + n_val]),
        test=tuple(order[n_train + n_val :]),
    )
    return Dataset(observations, predictions, specs, split)


def score_series(dataset: Dataset, sid: str, weights: MetricWeights, variables: list[str]) -> float:
    """Base-metric score of one prediction set: single-variable similarity or
    the two-variable coupled score."""
    if len(variables) == 1:
        var = variables[0]
        return base_metric(
            dataset.predictions[sid][var], dataset.observations[var], weights
        ).similarity
    if len(variables) == 2:
        p, q = variables
        return two_variable_score(
            dataset.predictions[sid][p],
            dataset.predictions[sid][q],
            dataset.observations[p],
            dataset.observations[q],
            weights,
        )
    raise ValueError("one or two variables supported")


def build_target_ranking(
    ids: tuple[str, ...],
    dataset: Dataset,
    preset: MetricWeights,
    variables: list[str],
    source: str = "preset_weights",
) -> TargetRanking:
    """Rank ids by base-metric score under the preset weights, best first.

    Ties break lexicographically by series id.
    """
    scored = sorted(
        ((score_series(dataset, sid, preset, variables), sid) for sid in ids),
        key=lambda sv: (-sv[0], sv[1]),
    )
    return TargetRanking(
        ids=tuple(sid for _, sid in scored),
        scores=tuple(s for s, _ in scored),
        source=source,
    )


def sample_pairs(train_ids: tuple[str, ...], count: int, seed: int = 0) -> list[PairedSample]:
    """Uniformly random unordered training pairs, no immediate repetition.

    The first len(train) - 1 pairs form a random spanning tree so the full
    ranking is reconstructible from pairwise preferences; connectivity is
    guaranteed whenever count >= len(train) - 1.
    """
    ids = sorted(train_ids)
    if len(ids) < 2:
        raise ValueError("need at least 2 training ids")
    rng = np.random.default_rng(seed)
    if len(ids) == 2:
        return [
            PairedSample(f"pair{k:03d}", ids[0], ids[1]) for k in range(count)
        ]
    order = [ids[i] for i in rng.permutation(len(ids))]
    tree = []
    for i in range(1, len(order)):
        partner = order[int(rng.integers(0, i))]
        tree.append(tuple(sorted((order[i], partner))))
    rng.shuffle(tree)
    pairs: list[tuple[str, str]] = list(tree[:count])
    prev = pairs[-1] if pairs else None
    while len(pairs) < count:
        a, b = rng.choice(len(ids), size=2, replace=False)
        cand = tuple(sorted((ids[a], ids[b])))
        if cand == prev:
            continue
        pairs.append(cand)
        prev = cand
    return [
        PairedSample(f"pair{k:03d}", a, b) for k, (a, b) in enumerate(pairs)
    ]


def label_pairs(
    pairs: list[PairedSample],
    dataset: Dataset,
    weights: MetricWeights,
    variables: list[str],
) -> list[PairedSample]:
    """Label each pair by base-metric preference under the given weights."""
    out = []
    for p in pairs:
        sa = score_series(dataset, p.id_a, weights, variables)
        sb = score_series(dataset, p.id_b, weights, variables)
        out.append(p.labeled("A" if sa >= sb else "B"))
    return out


# ---------------------------------------------------------------------------
# Manifest persistence
# ---------------------------------------------------------------------------


def dataset_to_manifest(dataset: Dataset) -> dict:
    return {
        "observations": {
            var: {"instance_id": s.instance_id, "values": [float(format(v, ".15g")) for v in s.values]}
            for var, s in dataset.observations.items()
        },
        "predictions": {
            sid: {
                var: [float(format(v, ".15g")) for v in s.values]
                for var, s in by_var.items()
            }
            for sid, by_var in dataset.predictions.items()
        },
        "specs": {key: spec.to_dict() for key, spec in dataset.specs.items()},
        "split": dataset.split.to_dict(),
        "rankings": {name: r.to_dict() for name, r in dataset.rankings.items()},
    }


def dataset_from_manifest(manifest: dict) -> Dataset:
    observations = {
        var: TimeSeries(d["instance_id"], var, np.array(d["values"]))
        for var, d in manifest["observations"].items()
    }
    predictions = {
        sid: {
            var: TimeSeries(sid, var, np.array(vals))
            for var, vals in by_var.items()
        }
        for sid, by_var in manifest["predictions"].items()
    }
    specs = {k: AugmentationSpec.from_dict(d) for k, d in manifest["specs"].items()}
    split = DatasetSplit.from_dict(manifest["split"])
    rankings = {
        name: TargetRanking.from_dict(d) for name, d in manifest.get("rankings", {}).items()
    }
    return Dataset(observations, predictions, specs, split, rankings)


def save_dataset(dataset: Dataset, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(dataset_to_manifest(dataset), fh, sort_keys=True)


def load_dataset(path: str) -> Dataset:
    with open(path) as fh:
        return dataset_from_manifest(json.load(fh))


def default_observations(length: int = 120) -> list[TimeSeries]:
    """Deterministic synthetic observations with clear seasonal rise/fall
    structure: a two-bump productivity curve and a coupled drawdown curve."""
    t = np.arange(length, dtype=float)
    bump1 = 3.0 * np.exp(-0.5 * ((t - 0.35 * length) / (0.08 * length)) ** 2)
    bump2 = 1.8 * np.exp(-0.5 * ((t - 0.62 * length) / (0.06 * length)) ** 2)
    gpp = 1.0 + bump1 + bump2
    co2 = 400.0 + 2.0 * np.sin(2 * np.pi * t / length) - 0.8 * (bump1 + bump2)
    return [
        TimeSeries("obs", "GPP", gpp),
        TimeSeries("obs", "CO2", co2),
    ]
