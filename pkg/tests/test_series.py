import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apef.errors import DegenerateAgreement, DegenerateRanking, NoRiseFallPattern
from apef.series import (
    TimeSeries,
    average_ranks,
    detect_peaks,
    first_derivative,
    fleiss_kappa,
    from_csv,
    from_json,
    second_derivative,
    segment,
    spearman,
    split_occurrences,
    to_csv,
    to_json,
)


def brute_force_ranks(values):
    """Definition oracle: rank = average 1-based sorted position of equal values."""
    values = list(values)
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    for i, idx in enumerate(order):
        same = [j + 1 for j, k in enumerate(order) if values[k] == values[idx]]
        ranks[idx] = sum(same) / len(same)
    return ranks


def brute_force_spearman(a, b):
    ra, rb = brute_force_ranks(a), brute_force_ranks(b)
    return float(np.corrcoef(ra, rb)[0, 1])


class TestTimeSeries:
    def test_values_read_only(self):
        s = TimeSeries("x", "GPP", [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            s.values[0] = 9.0

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            TimeSeries("x", "GPP", [1.0, float("nan"), 3.0])

    def test_rejects_too_short(self):
        with pytest.raises(ValueError):
            TimeSeries("x", "GPP", [1.0, 2.0])


class TestSegmentation:
    def test_trapezoid_ramp(self):
        diffs = [0.1] * 6 + [0.0] + [-0.1] * 6 + [0.0]
        values = np.concatenate([[0.0], np.cumsum(diffs)])
        seg = segment(TimeSeries("trap", "GPP", values))
        assert seg.rise_start == 1
        assert seg.fall_end == 14

    def test_flat_series_has_no_pattern(self):
        with pytest.raises(NoRiseFallPattern):
            segment(TimeSeries("flat", "GPP", np.linspace(0, 0.001, 30)))

    def test_short_runs_do_not_qualify(self):
        # four rising then four falling steps: below the five-step persistence
        values = np.concatenate([np.linspace(0, 0.4, 5), np.linspace(0.3, 0.0, 4)])
        with pytest.raises(NoRiseFallPattern):
            segment(TimeSeries("short", "GPP", values))

    def test_bumpy_series_segments(self, bumpy_series):
        seg = segment(bumpy_series)
        assert 1 <= seg.rise_start < seg.fall_end <= len(bumpy_series.values)

    def test_fall_must_follow_rise(self):
        # long fall first, then a rise, then nothing: no rise-then-fall pattern
        values = np.concatenate([np.linspace(1, 0, 10), np.linspace(0, 1, 10)])
        with pytest.raises(NoRiseFallPattern):
            segment(TimeSeries("vee", "GPP", values))


class TestPeaks:
    def test_strict_local_maxima(self):
        peaks = detect_peaks([0, 1, 0, 2, 2, 0, 3, 0])
        # 1-based; the flat-top pair at values (2, 2) is not strict
        assert peaks.indices == (2, 7)

    def test_monotone_has_no_peaks(self):
        assert detect_peaks(np.arange(10.0)).indices == ()

    def test_short_input(self):
        assert detect_peaks([1.0, 2.0]).indices == ()


class TestDerivatives:
    def test_first_derivative_matches_diff(self):
        x = np.array([1.0, 4.0, 9.0, 16.0])
        assert np.allclose(first_derivative(x), np.diff(x))

    def test_second_derivative_matches_double_diff(self):
        x = np.array([1.0, 4.0, 9.0, 16.0, 25.0])
        assert np.allclose(second_derivative(x), np.diff(x, n=2))


class TestSpearman:
    def test_matches_brute_force_with_ties(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            a = rng.integers(0, 5, size=10).astype(float)
            b = rng.integers(0, 5, size=10).astype(float)
            if np.ptp(a) == 0 or np.ptp(b) == 0:
                continue
            assert spearman(a, b) == pytest.approx(brute_force_spearman(a, b), abs=1e-12)

    def test_average_ranks_with_ties(self):
        assert list(average_ranks([10.0, 20.0, 20.0, 30.0])) == [1.0, 2.5, 2.5, 4.0]

    def test_perfect_and_reversed(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
        assert spearman([1, 2, 3], [30, 20, 10]) == pytest.approx(-1.0)

    def test_constant_input_raises(self):
        with pytest.raises(DegenerateRanking):
            spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    @given(
        st.lists(st.integers(0, 6), min_size=4, max_size=12),
        st.data(),
    )
    @settings(max_examples=50, deadline=None)
    def test_property_bounded_and_symmetric(self, a, data):
        b = data.draw(st.lists(st.integers(0, 6), min_size=len(a), max_size=len(a)))
        a = [float(v) for v in a]
        b = [float(v) for v in b]
        if len(set(a)) < 2 or len(set(b)) < 2:
            return
        rho = spearman(a, b)
        assert -1.0 - 1e-12 <= rho <= 1.0 + 1e-12
        assert rho == pytest.approx(spearman(b, a), abs=1e-12)


def oracle_fleiss(counts):
    """Definition oracle computed straight from the published formulas."""
    counts = np.asarray(counts, dtype=float)
    n_items, _ = counts.shape
    n_raters = counts[0].sum()
    p_i = ((counts**2).sum(axis=1) - n_raters) / (n_raters * (n_raters - 1))
    p_bar = p_i.mean()
    p_j = counts.sum(axis=0) / (n_items * n_raters)
    p_e = (p_j**2).sum()
    return (p_bar - p_e) / (1 - p_e)


class TestFleissKappa:
    def test_unanimous_is_exactly_one(self):
        counts = [[3, 0], [0, 3], [3, 0], [0, 3]]
        assert fleiss_kappa(counts) == 1.0

    def test_two_by_two_matches_oracle(self):
        counts = [[2, 1], [1, 2], [3, 0], [0, 3], [2, 1]]
        assert fleiss_kappa(counts) == pytest.approx(oracle_fleiss(counts), abs=1e-12)

    def test_degenerate_single_category(self):
        with pytest.raises(DegenerateAgreement):
            fleiss_kappa([[3, 0], [3, 0]])

    def test_unequal_rater_counts_rejected(self):
        with pytest.raises(ValueError):
            fleiss_kappa([[2, 1], [1, 1]])


class TestSplitOccurrences:
    def test_two_bumps_split_into_two_chunks(self):
        t = np.arange(200, dtype=float)
        vals = (
            1.0
            + 3.0 * np.exp(-0.5 * ((t - 50) / 10) ** 2)
            + 3.0 * np.exp(-0.5 * ((t - 150) / 10) ** 2)
        )
        chunks = split_occurrences(TimeSeries("long", "GPP", vals))
        assert len(chunks) == 2
        assert sum(len(c.values) for c in chunks) == 200
        assert np.allclose(np.concatenate([c.values for c in chunks]), vals)

    def test_single_occurrence_returned_whole(self, bumpy_series):
        # two bumps but no qualifying falling run between them -> one chunk is
        # fine; use a series with a single clean rise/fall instead
        t = np.arange(80, dtype=float)
        vals = 1.0 + 3.0 * np.exp(-0.5 * ((t - 40) / 8) ** 2)
        chunks = split_occurrences(TimeSeries("one", "GPP", vals))
        assert len(chunks) == 1
        assert np.array_equal(chunks[0].values, vals)


class TestSerialization:
    def test_csv_roundtrip(self, bumpy_series):
        back = from_csv(to_csv([bumpy_series]))
        assert len(back) == 1
        assert back[0].instance_id == bumpy_series.instance_id
        assert back[0].variable == bumpy_series.variable
        assert np.allclose(back[0].values, bumpy_series.values, rtol=1e-14)

    def test_json_roundtrip(self, bumpy_series):
        back = from_json(to_json([bumpy_series]))
        assert np.allclose(back[0].values, bumpy_series.values, rtol=1e-14)

    def test_csv_multiple_series(self, bumpy_series):
        other = TimeSeries("other", "CO2", [4.0, 5.0, 6.0])
        back = from_csv(to_csv([bumpy_series, other]))
        assert {(s.instance_id, s.variable) for s in back} == {
            ("bumpy", "GPP"),
            ("other", "CO2"),
        }
