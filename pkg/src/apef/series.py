"""Core time-series types, segmentation, peak detection, derivatives, and rank statistics.

All functions here are pure and operate on immutable inputs; they are safe to
call from any number of workers.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAgreement, DegenerateRanking, NoRiseFallPattern

DEFAULT_THETA_RISE = 0.01
DEFAULT_THETA_FALL = -0.01
DEFAULT_THETA_PERIOD = 5


@dataclass(frozen=True)
class TimeSeries:
    """A uniformly sampled sequence of values for one variable of one instance."""

    instance_id: str
    variable: str
    values: np.ndarray
    timestep: str = "daily"

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if arr.size < 3:
            raise ValueError("series needs at least 3 points")
        if not np.all(np.isfinite(arr)):
            raise ValueError("series values must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)

    def with_values(self, values: np.ndarray, instance_id: str | None = None) -> "TimeSeries":
        return TimeSeries(
            instance_id=instance_id if instance_id is not None else self.instance_id,
            variable=self.variable,
            values=np.asarray(values, dtype=float),
            timestep=self.timestep,
        )


@dataclass(frozen=True)
class Segmentation:
    """Peak window boundaries: first sustained rise start to last sustained fall end.

    Indices are 1-based timestep indices into the series.
    """

    rise_start: int
    fall_end: int
    rising_steps: tuple[int, ...]
    falling_steps: tuple[int, ...]


@dataclass(frozen=True)
class PeakSet:
    """Strict local maxima: 1-based indices and their values."""

    indices: tuple[int, ...]
    values: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.indices)


def _runs(mask: np.ndarray, min_len: int) -> list[tuple[int, int]]:
    """Return (start, end) 0-based inclusive index pairs of True runs of length >= min_len."""
    runs = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start >= min_len:
                runs.append((start, i - 1))
            start = None
    if start is not None and len(mask) - start >= min_len:
        runs.append((start, len(mask) - 1))
    return runs


def segment(
    series: TimeSeries,
    theta_rise: float = DEFAULT_THETA_RISE,
    theta_fall: float = DEFAULT_THETA_FALL,
    theta_period: int = DEFAULT_THETA_PERIOD,
) -> Segmentation:
    """Detect the peak window from sustained rising then falling first differences.

    A difference at position t (1-based, t in 1..T-1) describes the change
    between timesteps t and t+1.  The window runs from the start of the first
    qualifying rising run to the timestep after the last qualifying falling
    run's final difference.

    Raises NoRiseFallPattern when no qualifying rising run precedes a
    qualifying falling run.
    """
    if not (theta_rise > 0 > theta_fall):
        raise ValueError("need theta_rise > 0 > theta_fall")
    if theta_period < 1:
        raise ValueError("theta_period must be >= 1")
    diffs = np.diff(series.values)
    rise_runs = _runs(diffs > theta_rise, theta_period)
    fall_runs = _runs(diffs < theta_fall, theta_period)
    if not rise_runs or not fall_runs:
        raise NoRiseFallPattern(series.instance_id)
    first_rise = rise_runs[0]
    qualifying_falls = [r for r in fall_runs if r[0] > first_rise[1]]
    if not qualifying_falls:
        raise NoRiseFallPattern(series.instance_id)
    last_fall = qualifying_falls[-1]
    rising = tuple(
        t + 1 for a, b in rise_runs for t in range(a, b + 1)
    )
    falling = tuple(
        t + 1 for a, b in fall_runs for t in range(a, b + 1)
    )
    return Segmentation(
        rise_start=first_rise[0] + 1,
        fall_end=last_fall[1] + 2,  # diff index k covers steps k..k+1
        rising_steps=rising,
        falling_steps=falling,
    )


def detect_peaks(values) -> PeakSet:
    """Strict local maxima (both neighbors smaller); plateau maxima are excluded.

    Accepts a TimeSeries or a raw sequence; sequences shorter than 3 yield an
    empty PeakSet.
    """
    arr = values.values if isinstance(values, TimeSeries) else np.asarray(values, dtype=float)
    if arr.size < 3:
        return PeakSet(indices=(), values=())
    interior = np.arange(1, arr.size - 1)
    hits = interior[(arr[interior] > arr[interior - 1]) & (arr[interior] > arr[interior + 1])]
    return PeakSet(
        indices=tuple(int(t) + 1 for t in hits),
        values=tuple(float(arr[t]) for t in hits),
    )


def first_derivative(values) -> np.ndarray:
    """Forward differences, length T-1."""
    arr = values.values if isinstance(values, TimeSeries) else np.asarray(values, dtype=float)
    return np.diff(arr)


def second_derivative(values) -> np.ndarray:
    """Second forward differences p[t+2] - 2 p[t+1] + p[t], length T-2."""
    arr = values.values if isinstance(values, TimeSeries) else np.asarray(values, dtype=float)
    return np.diff(arr, n=2)


def average_ranks(values) -> np.ndarray:
    """Ranks 1..n with ties assigned the average of their positions."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.size, dtype=float)
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(scores_a, scores_b) -> float:
    """Spearman rank correlation: Pearson correlation of average-rank vectors."""
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("need two equal-length vectors of length >= 2")
    ra = average_ranks(a)
    rb = average_ranks(b)
    da = ra - ra.mean()
    db = rb - rb.mean()
    va = float(np.dot(da, da))
    vb = float(np.dot(db, db))
    if va == 0.0 or vb == 0.0:
        raise DegenerateRanking("zero rank variance")
    return float(np.dot(da, db) / np.sqrt(va * vb))


def fleiss_kappa(ratings) -> float:
    """Fleiss' kappa from an items x categories matrix of rating counts.

    Every item must carry the same number of ratings (raters) r >= 2.
    """
    counts = np.asarray(ratings, dtype=float)
    if counts.ndim != 2 or counts.shape[0] < 1 or counts.shape[1] < 2:
        raise ValueError("need an items x categories count matrix")
    per_item = counts.sum(axis=1)
    r = per_item[0]
    if r < 2 or not np.all(per_item == r):
        raise ValueError("every item needs the same rater count >= 2")
    n_items = counts.shape[0]
    p_i = (np.sum(counts * (counts - 1), axis=1)) / (r * (r - 1))
    p_bar = float(p_i.mean())
    p_j = counts.sum(axis=0) / (n_items * r)
    p_e = float(np.sum(p_j**2))
    if p_e >= 1.0:
        raise DegenerateAgreement("all raters always pick a single category")
    return (p_bar - p_e) / (1.0 - p_e)


def split_occurrences(
    series: TimeSeries,
    theta_rise: float = DEFAULT_THETA_RISE,
    theta_fall: float = DEFAULT_THETA_FALL,
    theta_period: int = DEFAULT_THETA_PERIOD,
) -> list[TimeSeries]:
    """Split a long series into chunks each containing one rise-fall occurrence.

    Boundaries fall at the midpoint between one falling run's end and the next
    rising run's start.  Series with at most one occurrence come back whole.
    """
    diffs = np.diff(series.values)
    rise_runs = _runs(diffs > theta_rise, theta_period)
    fall_runs = _runs(diffs < theta_fall, theta_period)
    # Pair each rising run with the first falling run after it.
    occurrences = []
    fall_iter = iter(fall_runs)
    current_fall = next(fall_iter, None)
    for rise in rise_runs:
        while current_fall is not None and current_fall[0] <= rise[1]:
            current_fall = next(fall_iter, None)
        if current_fall is None:
            break
        occurrences.append((rise[0], current_fall[1] + 1))
    if len(occurrences) <= 1:
        return [series]
    cuts = [0]
    for (_, end_a), (start_b, _) in zip(occurrences, occurrences[1:]):
        cuts.append((end_a + start_b) // 2 + 1)
    cuts.append(len(series))
    out = []
    for k, (lo, hi) in enumerate(zip(cuts, cuts[1:])):
        out.append(
            series.with_values(
                series.values[lo:hi], instance_id=f"{series.instance_id}#{k}"
            )
        )
    return out


# ---------------------------------------------------------------------------
# Serialization: CSV (instance_id,variable,t,value) and the JSON equivalent.
# Both round-trip at 15 significant digits.
# ---------------------------------------------------------------------------


def to_csv(series_list: list[TimeSeries]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["instance_id", "variable", "t", "value"])
    for s in series_list:
        for t, v in enumerate(s.values, start=1):
            writer.writerow([s.instance_id, s.variable, t, format(v, ".15g")])
    return buf.getvalue()


def from_csv(text: str) -> list[TimeSeries]:
    reader = csv.DictReader(io.StringIO(text))
    grouped: dict[tuple[str, str], list[tuple[int, float]]] = {}
    order: list[tuple[str, str]] = []
    for row in reader:
        key = (row["instance_id"], row["variable"])
        if key not in grouped:
            grouped[key] = []
            order.append(key)
        grouped[key].append((int(row["t"]), float(row["value"])))
    out = []
    for key in order:
        rows = sorted(grouped[key])
        if [t for t, _ in rows] != list(range(1, len(rows) + 1)):
            raise ValueError(f"non-contiguous timesteps for {key}")
        out.append(TimeSeries(key[0], key[1], np.array([v for _, v in rows])))
    return out


def to_json(series_list: list[TimeSeries]) -> str:
    return json.dumps(
        [
            {
                "instance_id": s.instance_id,
                "variable": s.variable,
                "values": [float(format(v, ".15g")) for v in s.values],
                "timestep": s.timestep,
            }
            for s in series_list
        ]
    )


def from_json(text: str) -> list[TimeSeries]:
    return [
        TimeSeries(
            d["instance_id"], d["variable"], np.array(d["values"], dtype=float),
            d.get("timestep", "daily"),
        )
        for d in json.loads(text)
    ]
