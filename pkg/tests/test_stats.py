import math
import random

import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats as sps

from gridcascade import defaults
from gridcascade.outages import EventCategory, load_geo_grouping
from gridcascade.stats import (
    DegenerateRegressorError,
    HypothesisConfig,
    UndefinedStatisticError,
    annual_counts,
    climate_share,
    format_hypothesis_table,
    hypotheses_to_json,
    ols_fit,
    regularized_incomplete_beta,
    run_hypotheses,
    student_t_two_sided_p,
    top_states,
    welch_t_test,
)

from conftest import make_record


# --- special functions -------------------------------------------------------


def test_incomplete_beta_matches_scipy_to_1e10():
    cases = [
        (0.5, 0.5, 0.3), (2.0, 3.0, 0.5), (4.5, 0.5, 0.9), (0.5, 60.0, 0.01),
        (30.0, 0.5, 0.99), (250.0, 0.5, 0.999), (1.0, 1.0, 0.42), (7.0, 7.0, 0.5),
    ]
    rng = random.Random(7)
    for _ in range(200):
        cases.append((rng.uniform(0.1, 300), rng.uniform(0.1, 300), rng.random()))
    for a, b, x in cases:
        mine = regularized_incomplete_beta(a, b, x)
        ref = float(special.betainc(a, b, x))
        assert mine == pytest.approx(ref, abs=1e-10), (a, b, x)


def test_t_two_sided_p_matches_scipy():
    rng = random.Random(11)
    for _ in range(200):
        t = rng.uniform(-8, 8)
        df = rng.uniform(1, 200)
        assert student_t_two_sided_p(t, df) == pytest.approx(
            2 * sps.t.sf(abs(t), df), rel=1e-9, abs=1e-12
        )


# --- OLS ----------------------------------------------------------------------


def test_ols_exact_line():
    result = ols_fit([0, 1, 2], [0, 2, 4])
    assert result.slope == pytest.approx(2.0)
    assert result.intercept == pytest.approx(0.0)
    assert result.r_squared == pytest.approx(1.0)


def test_ols_hand_derived():
    # normal equations by hand: slope 1/2, intercept 1/6, R^2 3/4
    result = ols_fit([0, 1, 2], [0, 1, 1])
    assert result.slope == pytest.approx(0.5)
    assert result.intercept == pytest.approx(1.0 / 6.0)
    assert result.r_squared == pytest.approx(0.75)
    ref = sps.linregress([0, 1, 2], [0, 1, 1])
    assert result.p_value == pytest.approx(ref.pvalue, rel=1e-9)
    assert result.slope_stderr == pytest.approx(ref.stderr, rel=1e-9)


def test_ols_constant_x_rejected():
    with pytest.raises(DegenerateRegressorError):
        ols_fit([1, 1, 1], [0, 1, 2])


def test_ols_constant_y_degenerate():
    result = ols_fit([0, 1, 2], [5, 5, 5])
    assert result.degenerate
    assert result.slope == 0.0
    assert result.r_squared == 0.0
    assert result.p_value == 1.0


def test_ols_residual_orthogonality():
    rng = random.Random(3)
    x = [rng.uniform(0, 10) for _ in range(40)]
    y = [2.0 * xi - 1.0 + rng.gauss(0, 2) for xi in x]
    result = ols_fit(x, y)
    xbar = sum(x) / len(x)
    dot = sum(
        (xi - xbar) * (yi - (result.intercept + result.slope * xi)) for xi, yi in zip(x, y)
    )
    scale = sum((xi - xbar) ** 2 for xi in x)
    assert abs(dot) / scale < 1e-9


@given(
    st.lists(
        st.tuples(
            st.floats(-100, 100, allow_nan=False),
            st.floats(-100, 100, allow_nan=False),
        ),
        min_size=3,
        max_size=30,
    ),
    st.floats(-50, 50, allow_nan=False),
)
def test_ols_shift_property(pairs, c):
    xs = [round(p[0], 3) for p in pairs]
    ys = [p[1] for p in pairs]
    if len(set(xs)) < 2:
        return
    base = ols_fit(xs, ys)
    shifted = ols_fit(xs, [y + c for y in ys])
    assert shifted.slope == pytest.approx(base.slope, rel=1e-9, abs=1e-9)
    assert shifted.intercept == pytest.approx(base.intercept + c, rel=1e-9, abs=1e-6)
    if not base.degenerate and not shifted.degenerate:
        assert shifted.r_squared == pytest.approx(base.r_squared, rel=1e-6, abs=1e-9)


# --- Welch -----------------------------------------------------------------------


def test_welch_identical_samples():
    result = welch_t_test([1, 2, 3], [1, 2, 3])
    assert result.t == 0.0
    assert result.p_value == pytest.approx(1.0)


def test_welch_frozen_oracle():
    # frozen from an independent evaluation of the Welch formula + t CDF
    result = welch_t_test([10.0, 12.0, 14.0, 16.0], [1.0, 2.0, 3.0, 4.0])
    assert result.t == pytest.approx(7.274613391789285, rel=1e-6)
    assert result.df == pytest.approx(4.411764705882353, rel=1e-6)
    assert result.p_value == pytest.approx(0.0012888920337881294, rel=1e-6)


def test_welch_zero_variance_equal_means():
    with pytest.raises(UndefinedStatisticError):
        welch_t_test([2.0, 2.0], [2.0, 2.0])


def test_welch_zero_variance_distinct_means():
    result = welch_t_test([3.0, 3.0], [1.0, 1.0])
    assert result.t == math.inf
    assert result.p_value == 0.0


@given(
    st.lists(st.floats(-1e4, 1e4, allow_nan=False), min_size=2, max_size=25),
    st.lists(st.floats(-1e4, 1e4, allow_nan=False), min_size=2, max_size=25),
)
@settings(max_examples=60)
def test_welch_antisymmetry(a, b):
    try:
        fwd = welch_t_test(a, b)
        rev = welch_t_test(b, a)
    except UndefinedStatisticError:
        return
    assert fwd.t == pytest.approx(-rev.t, rel=1e-9, abs=1e-12)
    assert fwd.p_value == pytest.approx(rev.p_value, rel=1e-9, abs=1e-12)
    assert fwd.df == pytest.approx(rev.df, rel=1e-9)


def test_pooled_variant_matches_scipy():
    a = [3.1, 4.2, 5.6, 4.4, 3.9]
    b = [2.2, 2.8, 3.3, 2.1]
    mine = welch_t_test(a, b, pooled=True)
    ref = sps.ttest_ind(a, b, equal_var=True)
    assert mine.t == pytest.approx(float(ref.statistic), rel=1e-9)
    assert mine.p_value == pytest.approx(float(ref.pvalue), rel=1e-9)


# --- descriptive ------------------------------------------------------------------


def test_annual_counts_zero_filled():
    records = [make_record(event_id="a", year=2016), make_record(event_id="b", year=2016)]
    series = annual_counts(records)
    assert len(series) == 9
    assert dict(series)[2016] == 2
    assert dict(series)[2020] == 0
    assert sum(v for _, v in series) == len(records)


def test_annual_counts_empty():
    assert all(v == 0 for _, v in annual_counts([]))


def test_top_states_ranking_and_ties():
    records = (
        [make_record(event_id=f"t{i}", state="TX") for i in range(3)]
        + [make_record(event_id=f"f{i}", state="FL") for i in range(3)]
        + [make_record(event_id="c", state="CA")]
    )
    ranked = top_states(records, 5)
    assert ranked == [("FL", 3), ("TX", 3), ("CA", 1)]
    single = top_states([make_record(state="TX")], 3)
    assert single == [("TX", 1)]


def test_climate_share():
    records = [make_record(event_id="c", category=EventCategory.SEVERE_WEATHER)] + [
        make_record(event_id=f"o{i}", category=EventCategory.OTHER) for i in range(3)
    ]
    assert climate_share(records) == pytest.approx(0.25)
    assert climate_share([make_record()]) == 1.0
    with pytest.raises(UndefinedStatisticError):
        climate_share([])


# --- hypotheses --------------------------------------------------------------------


@pytest.fixture(scope="module")
def grouping():
    return load_geo_grouping(defaults.default_path(defaults.GEO_GROUPING))


def _grown_records():
    """Climate counts rising strongly by year; coastal impact well above inland."""
    records = []
    i = 0
    base_counts = {"TX": 4, "FL": 3, "CO": 2, "KS": 1}
    impact = {"TX": 60_000, "FL": 45_000, "CO": 900, "KS": 700}
    for offset, year in enumerate(range(2015, 2024)):
        for state, base in base_counts.items():
            for _ in range(base + 3 * offset):
                records.append(
                    make_record(
                        event_id=f"r{i}",
                        state=state,
                        year=year,
                        max_customers=impact[state] + 37 * (i % 11),
                        duration_minutes=60.0 + (i % 13),
                    )
                )
                i += 1
    return records


def test_run_hypotheses_directions(grouping):
    rows = run_hypotheses(_grown_records(), grouping)
    by_key = {r.key: r for r in rows}
    assert set(by_key) == {"H1(a)", "H1(b)", "H1(c)", "H1(d)", "H2(a)", "H2(b)"}
    assert by_key["H1(a)"].supported  # strong upward trend
    assert by_key["H2(b)"].supported  # coastal impact far above inland
    assert by_key["H2(b)"].statistic["t"] > 0


def test_flat_counts_not_supported(grouping):
    records = []
    i = 0
    counts = {"TX": 5, "FL": 4, "CO": 3, "KS": 2}
    for year in range(2015, 2024):
        for state, count in counts.items():
            for _ in range(count):
                records.append(
                    make_record(event_id=f"f{i}", state=state, year=year, max_customers=1000 + i)
                )
                i += 1
    rows = run_hypotheses(records, grouping)
    h1a = next(r for r in rows if r.key == "H1(a)")
    assert not h1a.supported


def test_identical_severity_not_supported(grouping):
    # coastal and inland event-level severity samples are identical multisets
    records = []
    i = 0
    plans = {"TX": (1000, 2000, 3000), "FL": (1000, 2000, 3000, 4000),
             "CO": (1000, 2000, 3000), "KS": (1000, 2000, 3000, 4000)}
    for year in range(2015, 2024):
        for state, values in plans.items():
            for customers in values:
                records.append(
                    make_record(event_id=f"s{i}", state=state, year=year, max_customers=customers)
                )
                i += 1
    rows = run_hypotheses(records, grouping)
    h2b = next(r for r in rows if r.key == "H2(b)")
    assert h2b.statistic["t"] == pytest.approx(0.0, abs=1e-12)
    assert not h2b.supported


def test_report_emission_fields(grouping):
    rows = run_hypotheses(_grown_records(), grouping)
    text = hypotheses_to_json(rows)
    assert '"slope"' in text and '"r_squared"' in text and '"t"' in text
    table = format_hypothesis_table(rows)
    assert "H1(a)" in table and "Supported" in table
