"""Series container, CSV, transform, differencing, and split tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsblend.numerics import RngStream
from tsblend.series import (
    BoxCoxParams,
    SplitSpec,
    TimeSeries,
    box_cox,
    difference,
    format_csv,
    guerrero_lambda,
    inv_box_cox,
    inv_box_cox_slope,
    load_csv,
    save_csv,
    split,
    undifference,
)


def monthly(values, year=2010, month=1):
    return TimeSeries(values=np.asarray(values, dtype=float), frequency=12,
                      start_year=year, start_period=month)


class TestTimeSeries:
    def test_values_are_immutable(self):
        s = monthly([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            s.values[0] = 9.0

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            TimeSeries(values=np.array([1.0, np.nan]), frequency=1)

    def test_monthly_labels_and_advance(self):
        s = monthly(np.arange(113.0))
        labels = s.period_labels()
        assert labels[0] == "2010-01"
        assert labels[-1] == "2019-05"
        assert s.period_label(107) == "2018-12"
        assert s.advance(13).period_label(0) == "2011-02"

    def test_final_paper_window_is_six_months(self):
        s = monthly(np.arange(113.0))
        window = [s.period_label(i) for i in range(107, 113)]
        assert window == ["2018-12", "2019-01", "2019-02", "2019-03",
                          "2019-04", "2019-05"]

    def test_integer_labels(self):
        s = TimeSeries(values=np.arange(4.0), frequency=4, start_period=5)
        assert s.period_labels() == ["5", "6", "7", "8"]


class TestLoadCsv:
    def test_monthly_round_trip(self, tmp_path):
        s = monthly(np.linspace(100, 190, 113))
        path = tmp_path / "m.csv"
        save_csv(s, str(path))
        loaded = load_csv(str(path), value_column="value", date_column="period")
        assert loaded.n == 113
        assert loaded.start_year == 2010 and loaded.start_period == 1
        assert np.array_equal(loaded.values, s.values)

    def test_daily_rows_aggregate_by_month(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(
            "date,count\n"
            "2020-01-03,2\n"
            "2020-01-20,3\n"
            "2020-02-01,5\n"
            "2020-03-11,1\n"
            "2020-03-12,1\n"
        )
        s = load_csv(str(path), value_column="count", date_column="date")
        assert np.array_equal(s.values, [5.0, 5.0, 2.0])
        assert s.period_labels() == ["2020-01", "2020-02", "2020-03"]

    def test_unsorted_input_is_sorted(self, tmp_path):
        path = tmp_path / "u.csv"
        path.write_text("p,v\n2020-03,3\n2020-01,1\n2020-02,2\n")
        s = load_csv(str(path), value_column="v", date_column="p")
        assert np.array_equal(s.values, [1.0, 2.0, 3.0])

    def test_missing_period_named(self, tmp_path):
        path = tmp_path / "g.csv"
        path.write_text("p,v\n2020-01,1\n2020-02,2\n2020-04,4\n")
        with pytest.raises(ValueError, match="missing period 2020-03"):
            load_csv(str(path), value_column="v", date_column="p")

    def test_duplicate_month_row_named(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("p,v\n2020-01,1\n2020-01,2\n")
        with pytest.raises(ValueError, match="duplicate period 2020-01"):
            load_csv(str(path), value_column="v", date_column="p")

    def test_bad_value_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("p,v\n2020-01,1\n2020-02,oops\n")
        with pytest.raises(ValueError, match="row 3.*oops"):
            load_csv(str(path), value_column="v", date_column="p")

    def test_missing_column_lists_available(self, tmp_path):
        path = tmp_path / "col.csv"
        path.write_text("p,v\n2020-01,1\n")
        with pytest.raises(ValueError, match="available columns: p, v"):
            load_csv(str(path), value_column="count", date_column="p")

    def test_integer_periods(self, tmp_path):
        path = tmp_path / "i.csv"
        path.write_text("t,v\n3,30\n1,10\n2,20\n")
        s = load_csv(str(path), value_column="v", date_column="t", frequency=4)
        assert np.array_equal(s.values, [10.0, 20.0, 30.0])
        assert s.frequency == 4 and s.start_period == 1

    def test_integer_gap_named(self, tmp_path):
        path = tmp_path / "ig.csv"
        path.write_text("t,v\n1,10\n3,30\n")
        with pytest.raises(ValueError, match="missing period 2"):
            load_csv(str(path), value_column="v", date_column="t", frequency=1)

    def test_crlf_line_endings(self):
        s = monthly([1.0, 2.0])
        assert format_csv(s).endswith("\r\n")


class TestBoxCox:
    def test_log_case(self):
        y = np.array([1.0, np.e, np.e ** 2])
        out = box_cox(y, BoxCoxParams(lam=0.0))
        assert np.allclose(out, [0.0, 1.0, 2.0], atol=1e-12)

    def test_identity_like_case(self):
        y = np.array([1.0, 2.0, 5.0])
        out = box_cox(y, BoxCoxParams(lam=1.0))
        assert np.allclose(out, y - 1.0, atol=1e-12)

    def test_round_trip_over_lambda_grid(self):
        rng = RngStream(seed=21).generator()
        y = rng.uniform(0.1, 100.0, size=500)
        for lam in (-0.5, 0.0, 0.3, 0.60377, 1.0):
            p = BoxCoxParams(lam=lam)
            back = inv_box_cox(box_cox(y, p), p)
            assert np.max(np.abs(back - y)) < 1e-9

    def test_shift_applied_and_removed(self):
        y = np.array([-2.0, 0.0, 3.0])
        p = BoxCoxParams(lam=0.5, shift=3.0)
        back = inv_box_cox(box_cox(y, p), p)
        assert np.allclose(back, y, atol=1e-9)

    def test_monotone(self):
        y = np.sort(RngStream(seed=22).generator().uniform(0.01, 50.0, 200))
        for lam in (-1.0, -0.3, 0.0, 0.7, 2.0):
            out = box_cox(y, BoxCoxParams(lam=lam))
            assert np.all(np.diff(out) > 0)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            box_cox(np.array([1.0, 0.0]), BoxCoxParams(lam=0.5))

    def test_bias_adjusted_spot_values(self):
        got = inv_box_cox(np.array([0.0]), BoxCoxParams(lam=0.0),
                          sigma2=0.04, bias_adjust=True)
        assert abs(got[0] - 1.02) < 1e-12
        got = inv_box_cox(np.array([2.0]), BoxCoxParams(lam=0.5),
                          sigma2=0.1, bias_adjust=True)
        assert abs(got[0] - 4.025) < 1e-12

    def test_adjustment_never_shrinks_for_contracting_transforms(self):
        rng = RngStream(seed=23).generator()
        x = rng.uniform(0.5, 3.0, 100)
        for lam in (-0.5, 0.0, 0.5, 0.9):
            p = BoxCoxParams(lam=lam)
            y = box_cox(x, p)
            plain = inv_box_cox(y, p)
            adj = inv_box_cox(y, p, sigma2=0.2, bias_adjust=True)
            assert np.all(adj >= plain)

    def test_adjustment_requires_sigma2(self):
        with pytest.raises(ValueError, match="sigma2"):
            inv_box_cox(np.array([1.0]), BoxCoxParams(lam=0.5), bias_adjust=True)

    def test_inverse_domain_error(self):
        with pytest.raises(ValueError, match="undefined"):
            inv_box_cox(np.array([-3.0]), BoxCoxParams(lam=0.5))

    def test_slope_matches_finite_difference(self):
        y = np.array([0.5, 1.0, 2.0])
        for lam in (0.0, 0.4, 1.3):
            p = BoxCoxParams(lam=lam)
            h = 1e-6
            fd = (inv_box_cox(y + h, p) - inv_box_cox(y - h, p)) / (2 * h)
            assert np.allclose(inv_box_cox_slope(y, p), fd, rtol=1e-5)


def _cv_reference(x, block, lam):
    """Literal variance-profile objective, kept independent of the library."""
    nb = x.size // block
    mat = x[x.size - nb * block:].reshape(nb, block)
    sd = mat.std(axis=1, ddof=1)
    mean = mat.mean(axis=1)
    ratio = sd / mean ** (1.0 - lam)
    return ratio.std(ddof=1) / ratio.mean()


class TestGuerrero:
    def test_matches_reference_grid_search(self, base_stream):
        for k in range(5):
            rng = base_stream.substream(40, k).generator()
            level = 20 * np.exp(0.01 * np.arange(120))
            y = level * (1 + 0.15 * rng.standard_normal(120))
            s = monthly(y)
            got = guerrero_lambda(s)
            grid = np.arange(-1.0, 2.0005, 0.001)
            cvs = np.array([_cv_reference(y, 12, lam) for lam in grid])
            want = grid[np.argmin(cvs)]
            assert abs(got.lam - want) < 1e-9

    def test_multiplicative_noise_selects_near_zero(self, base_stream):
        hits = 0
        seeds = 200
        for k in range(seeds):
            rng = base_stream.substream(41, k).generator()
            level = 20 * np.exp(0.015 * np.arange(120))
            y = level * (1 + 0.2 * rng.standard_normal(120))
            if np.any(y <= 0):
                y = np.abs(y) + 0.5
            lam = guerrero_lambda(monthly(y)).lam
            if -0.25 <= lam <= 0.25:
                hits += 1
        assert hits >= 0.90 * seeds

    def test_additive_noise_selects_near_one(self, base_stream):
        hits = 0
        seeds = 100
        for k in range(seeds):
            rng = base_stream.substream(42, k).generator()
            level = 50 + 40 * np.sin(np.arange(144) / 20.0)
            y = level + 2.0 * rng.standard_normal(144)
            lam = guerrero_lambda(monthly(y)).lam
            if 0.5 <= lam <= 1.5:
                hits += 1
        assert hits >= 0.80 * seeds

    def test_constant_series_degenerate(self):
        got = guerrero_lambda(monthly(np.full(48, 7.0)))
        assert got.lam == 1.0 and got.degenerate

    def test_shift_for_nonpositive_series(self):
        y = np.concatenate([[-4.0], np.abs(RngStream(seed=3).generator()
                                           .standard_normal(47)) + 1.0])
        got = guerrero_lambda(monthly(y))
        assert got.shift == 5.0
        box_cox(monthly(y), got)  # must be applicable

    def test_too_short_rejected(self):
        with pytest.raises(ValueError, match="blocks"):
            guerrero_lambda(monthly(np.arange(1.0, 13.0)))


class TestDifference:
    def test_first_difference_example(self):
        s = monthly([1.0, 3.0, 6.0, 10.0])
        d = difference(s, d=1)
        assert np.array_equal(d.values, [2.0, 3.0, 4.0])
        assert d.period_label(0) == "2010-02"
        back = undifference(d, [1.0], d=1)
        assert np.array_equal(back, [1.0, 3.0, 6.0, 10.0])

    def test_seasonal_difference_removes_fixed_pattern(self):
        pattern = np.tile(np.arange(12.0), 4)
        s = monthly(pattern + 100.0)
        d = difference(s, d=0, D=1)
        assert np.allclose(d.values, 0.0)
        assert d.period_label(0) == "2011-01"

    @given(
        st.lists(st.floats(-100, 100), min_size=30, max_size=60),
        st.integers(0, 2),
        st.integers(0, 1),
    )
    @settings(max_examples=80, deadline=None)
    def test_round_trip(self, vals, d, D):
        if d == 0 and D == 0:
            return
        y = np.asarray(vals, dtype=float)
        m = 12
        s = TimeSeries(values=y, frequency=m)
        k = d + D * m
        if y.size <= k + 1:
            return
        w = difference(s, d=d, D=D)
        back = undifference(w, y[:k], d=d, D=D, m=m)
        assert np.allclose(back, y, atol=1e-8)

    def test_too_short(self):
        with pytest.raises(ValueError, match="too short"):
            difference(monthly(np.arange(10.0)), d=0, D=1)


class TestSplit:
    def test_spec_counts(self):
        s = monthly(np.arange(113.0))
        tr, va, te = split(s, SplitSpec())
        assert (tr.n, va.n, te.n) == (90, 16, 7)
        glued = np.concatenate([tr.values, va.values, te.values])
        assert np.array_equal(glued, s.values)
        assert va.period_label(0) == s.period_label(90)
        assert te.period_label(0) == s.period_label(106)

    def test_fraction_validation(self):
        with pytest.raises(ValueError, match="sum to 1"):
            SplitSpec(train=0.8, validation=0.15, test=0.1)
        with pytest.raises(ValueError, match="strictly"):
            SplitSpec(train=1.0, validation=0.15, test=-0.15)

    def test_tiny_series_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            split(monthly(np.arange(5.0)), SplitSpec())
