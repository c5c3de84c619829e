"""Base similarity metric, two-variable coupling, baseline metrics, and ILAMB scores."""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .errors import DegenerateObservation, InvalidParams, NoRiseFallPattern
from .series import (
    TimeSeries,
    detect_peaks,
    first_derivative,
    second_derivative,
    segment,
    spearman,
)

WEIGHT_LOWER = 0.1
WEIGHT_UPPER = 1.0
TOLERANCE_LOWER = 1.0
TOLERANCE_UPPER = 10.0
SUM_EPS = 1e-9


@dataclass(frozen=True)
class MetricWeights:
    """Adjustable parameters of the base metric.

    w_peak, w_der, w_amp lie in [0.1, 1.0] and sum to 1; tolerance is a
    peak-matching window length in timesteps (>= 1) and is excluded from the
    normalization.
    """

    w_peak: float
    w_der: float
    w_amp: float
    tolerance: float = 5.0

    def __post_init__(self):
        for name in ("w_peak", "w_der", "w_amp"):
            v = getattr(self, name)
            if not (WEIGHT_LOWER - SUM_EPS <= v <= WEIGHT_UPPER + SUM_EPS):
                raise InvalidParams(f"{name}={v} outside [{WEIGHT_LOWER}, {WEIGHT_UPPER}]")
        total = self.w_peak + self.w_der + self.w_amp
        if abs(total - 1.0) > SUM_EPS:
            raise InvalidParams(f"weights sum to {total}, expected 1")
        if not TOLERANCE_LOWER <= self.tolerance <= TOLERANCE_UPPER:
            raise InvalidParams(
                f"tolerance={self.tolerance} outside [{TOLERANCE_LOWER}, {TOLERANCE_UPPER}]"
            )

    def to_dict(self) -> dict:
        return {
            "w_peak": self.w_peak,
            "w_der": self.w_der,
            "w_amp": self.w_amp,
            "tolerance": self.tolerance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricWeights":
        return cls(
            w_peak=float(d["w_peak"]),
            w_der=float(d["w_der"]),
            w_amp=float(d["w_amp"]),
            tolerance=float(d["tolerance"]),
        )

    @classmethod
    def uniform(cls) -> "MetricWeights":
        return cls(w_peak=1 / 3, w_der=1 / 3, w_amp=1 / 3, tolerance=5.0)


@dataclass(frozen=True)
class ScoreBreakdown:
    """All components of one base-metric evaluation.

    Peak and derivative components refer to the in-peak segment; s_before,
    s_in, s_after are the per-segment distances; s_total is the combined
    distance and similarity = 1 / (1 + s_total).
    """

    s_peak_x: float
    s_peak_y: float
    s_peak: float
    s_slope: float
    s_curv: float
    s_deriv: float
    s_before: float
    s_in: float
    s_after: float
    s_total: float
    similarity: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _peak_terms(pred_vals: np.ndarray, obs_vals: np.ndarray, tolerance: float) -> tuple[float, float]:
    """Temporal and amplitude peak-matching scores in [0, 1].

    Peaks are matched greedily by nearest time, one-to-one; each matched pair
    contributes a clamped temporal term and a clamped amplitude term, and the
    sums are averaged over max(peak counts) so unmatched peaks count as zero.
    """
    peaks_p = detect_peaks(pred_vals)
    peaks_o = detect_peaks(obs_vals)
    n_p, n_o = len(peaks_p), len(peaks_o)
    if n_p == 0 and n_o == 0:
        return 1.0, 1.0
    if n_p == 0 or n_o == 0:
        return 0.0, 0.0
    # Tie-break on the unordered time pair so matching is symmetric in the
    # two series when peak counts are equal.
    candidates = sorted(
        (abs(tp - ty), min(tp, ty), max(tp, ty), i, j)
        for i, tp in enumerate(peaks_p.indices)
        for j, ty in enumerate(peaks_o.indices)
    )
    used_p: set[int] = set()
    used_o: set[int] = set()
    x_sum = 0.0
    y_sum = 0.0
    for gap, _, _, i, j in candidates:
        if i in used_p or j in used_o:
            continue
        used_p.add(i)
        used_o.add(j)
        x_sum += max(0.0, 1.0 - gap / tolerance)
        vp, vy = peaks_p.values[i], peaks_o.values[j]
        denom = max(abs(vp), abs(vy))
        if denom == 0.0:
            y_sum += 1.0
        else:
            y_sum += max(0.0, 1.0 - abs(vp - vy) / denom)
    n = max(n_p, n_o)
    return x_sum / n, y_sum / n


def peak_similarity(
    pred: TimeSeries | np.ndarray,
    obs: TimeSeries | np.ndarray,
    tolerance: float,
    w_amp: float,
) -> tuple[float, float, float]:
    """Soft peak matching: (temporal score, amplitude score, combined score)."""
    if tolerance < 1:
        raise ValueError("tolerance must be >= 1")
    if not 0.0 <= w_amp <= 1.0:
        raise ValueError("w_amp must be in [0, 1]")
    pv = pred.values if isinstance(pred, TimeSeries) else np.asarray(pred, dtype=float)
    ov = obs.values if isinstance(obs, TimeSeries) else np.asarray(obs, dtype=float)
    s_x, s_y = _peak_terms(pv, ov, tolerance)
    return s_x, s_y, (1.0 - w_amp) * s_x + w_amp * s_y


def derivative_distance(
    pred: TimeSeries | np.ndarray,
    obs: TimeSeries | np.ndarray,
    w_der: float,
) -> tuple[float, float, float]:
    """Mean squared slope and curvature differences, scaled by w_der.

    Segments too short to carry a derivative contribute zero.
    """
    pv = pred.values if isinstance(pred, TimeSeries) else np.asarray(pred, dtype=float)
    ov = obs.values if isinstance(obs, TimeSeries) else np.asarray(obs, dtype=float)
    if pv.shape != ov.shape:
        raise ValueError("series lengths differ")
    s_slope = 0.0
    s_curv = 0.0
    if pv.size >= 2:
        d1 = first_derivative(pv) - first_derivative(ov)
        s_slope = float(np.mean(d1**2))
    if pv.size >= 3:
        d2 = second_derivative(pv) - second_derivative(ov)
        s_curv = float(np.mean(d2**2))
    return s_slope, s_curv, w_der * (s_slope + s_curv)


def _segment_distance(
    pred_vals: np.ndarray, obs_vals: np.ndarray, weights: MetricWeights
) -> tuple[float, tuple[float, float, float], tuple[float, float, float]]:
    """Distance for one segment: (1 - peak similarity) + derivative distance."""
    if pred_vals.size == 0:
        return 0.0, (1.0, 1.0, 1.0), (0.0, 0.0, 0.0)
    s_x, s_y = _peak_terms(pred_vals, obs_vals, weights.tolerance)
    s_peak = (1.0 - weights.w_amp) * s_x + weights.w_amp * s_y
    s_slope, s_curv, s_deriv = derivative_distance(pred_vals, obs_vals, weights.w_der)
    return (1.0 - s_peak) + s_deriv, (s_x, s_y, s_peak), (s_slope, s_curv, s_deriv)


def base_metric(pred: TimeSeries, obs: TimeSeries, weights: MetricWeights) -> ScoreBreakdown:
    """Segment-weighted combination of peak and derivative distances.

    Segmentation comes from the observation series only and is applied to
    both series.  When no rise-fall pattern exists the whole series is the
    in-peak segment and the outer distances are zero.
    """
    if len(pred) != len(obs):
        raise ValueError("series lengths differ")
    try:
        seg = segment(obs)
        t_st, t_ed = seg.rise_start, seg.fall_end
    except NoRiseFallPattern:
        t_st, t_ed = 1, len(obs)
    pv, ov = pred.values, obs.values
    before = slice(0, t_st - 1)
    inner = slice(t_st - 1, t_ed)
    after = slice(t_ed, len(obs))
    d_before, _, _ = _segment_distance(pv[before], ov[before], weights)
    d_in, peak_parts, deriv_parts = _segment_distance(pv[inner], ov[inner], weights)
    d_after, _, _ = _segment_distance(pv[after], ov[after], weights)
    s_total = weights.w_peak * d_in + (1.0 - weights.w_peak) / 2.0 * (d_before + d_after)
    return ScoreBreakdown(
        s_peak_x=peak_parts[0],
        s_peak_y=peak_parts[1],
        s_peak=peak_parts[2],
        s_slope=deriv_parts[0],
        s_curv=deriv_parts[1],
        s_deriv=deriv_parts[2],
        s_before=d_before,
        s_in=d_in,
        s_after=d_after,
        s_total=s_total,
        similarity=1.0 / (1.0 + s_total),
    )


def similarity(pred: TimeSeries, obs: TimeSeries, weights: MetricWeights) -> float:
    return base_metric(pred, obs, weights).similarity


def two_variable_score(
    pred_p: TimeSeries,
    pred_q: TimeSeries,
    obs_p: TimeSeries,
    obs_q: TimeSeries,
    weights: MetricWeights,
) -> float:
    """Average per-variable similarity scaled by the cross-correlation gap."""
    sim_p = base_metric(pred_p, obs_p, weights).similarity
    sim_q = base_metric(pred_q, obs_q, weights).similarity
    corr = 1.0 - abs(
        spearman(obs_p.values, obs_q.values) - spearman(pred_p.values, pred_q.values)
    )
    return (sim_p + sim_q) / 2.0 * corr


# ---------------------------------------------------------------------------
# Baseline metrics
# ---------------------------------------------------------------------------


def _arrays(pred, obs) -> tuple[np.ndarray, np.ndarray]:
    pv = pred.values if isinstance(pred, TimeSeries) else np.asarray(pred, dtype=float)
    ov = obs.values if isinstance(obs, TimeSeries) else np.asarray(obs, dtype=float)
    if pv.shape != ov.shape:
        raise ValueError("series lengths differ")
    return pv, ov


def rmse(pred, obs) -> float:
    pv, ov = _arrays(pred, obs)
    return float(np.sqrt(np.mean((pv - ov) ** 2)))


def mae(pred, obs) -> float:
    pv, ov = _arrays(pred, obs)
    return float(np.mean(np.abs(pv - ov)))


def nse(pred, obs) -> float:
    """Nash-Sutcliffe efficiency: 1 - SS_res / SS_tot."""
    pv, ov = _arrays(pred, obs)
    ss_tot = float(np.sum((ov - ov.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateObservation("observation variance is zero")
    return 1.0 - float(np.sum((ov - pv) ** 2)) / ss_tot


def r2(pred, obs) -> float:
    """Squared Pearson correlation; 0 when the prediction has no variance."""
    pv, ov = _arrays(pred, obs)
    if float(np.var(ov)) == 0.0:
        raise DegenerateObservation("observation variance is zero")
    if float(np.var(pv)) == 0.0:
        return 0.0
    return float(np.corrcoef(pv, ov)[0, 1]) ** 2


# ---------------------------------------------------------------------------
# ILAMB component scores
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IlambScore:
    bias_score: float
    rmse_score: float
    seasonal_score: float
    final: float


def ilamb_scores(
    pred: TimeSeries,
    obs: TimeSeries,
    weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3),
    cycle_length: int = 365,
) -> IlambScore:
    """Bias, RMSE, and seasonal-cycle scores, each exp-mapped into [0, 1].

    bias_score = exp(-|mean(pred) - mean(obs)| / |mean(obs)|)
    rmse_score = exp(-rmse / std(obs))
    seasonal_score = exp(-rmse of cycle-averaged profiles / std(obs))
    """
    pv, ov = _arrays(pred, obs)
    obs_mean = float(ov.mean())
    obs_std = float(ov.std())
    if obs_mean == 0.0 or obs_std == 0.0:
        raise DegenerateObservation("observation mean/std is zero")
    if pv.size < cycle_length:
        raise ValueError(f"need T >= cycle_length ({cycle_length}) for the seasonal score")
    bias_score = float(np.exp(-abs(pv.mean() - obs_mean) / abs(obs_mean)))
    rmse_score = float(np.exp(-rmse(pv, ov) / obs_std))
    n_cycles = pv.size // cycle_length
    trimmed = n_cycles * cycle_length
    pred_cycle = pv[:trimmed].reshape(n_cycles, cycle_length).mean(axis=0)
    obs_cycle = ov[:trimmed].reshape(n_cycles, cycle_length).mean(axis=0)
    seasonal_score = float(np.exp(-rmse(pred_cycle, obs_cycle) / obs_std))
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    final = float(w[0] * bias_score + w[1] * rmse_score + w[2] * seasonal_score)
    return IlambScore(bias_score, rmse_score, seasonal_score, final)
