"""Descriptive outage statistics plus from-scratch OLS and two-sample t machinery.

The t distribution CDF is evaluated through the regularized incomplete beta
function (continued fraction), so no statistics library is needed at runtime.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

from .outages import (
    STUDY_END_YEAR,
    STUDY_START_YEAR,
    GeoGroup,
    OutageRecord,
)


class StatsError(ValueError):
    pass


class DegenerateRegressorError(StatsError):
    """x is constant; the slope is not identified."""


class UndefinedStatisticError(StatsError):
    pass


class HypothesisError(StatsError):
    """A hypothesis test failed; carries the hypothesis name."""


# --- special functions ------------------------------------------------------

_CF_EPS = 1e-16
_CF_FPMIN = 1e-300
_CF_MAX_ITER = 500


def log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_FPMIN:
        d = _CF_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction stalled at a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = a * math.log(x) + b * math.log1p(-x) - log_beta(a, b)
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with df degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def student_t_cdf(t: float, df: float) -> float:
    p2 = student_t_two_sided_p(t, df)
    return 1.0 - p2 / 2.0 if t >= 0 else p2 / 2.0


# --- descriptive characterization --------------------------------------------


def annual_counts(records, predicate=None) -> list[tuple[int, int]]:
    """Per-year record counts over the study window, zero-filled for empty years."""
    counts = Counter()
    for r in records:
        if predicate is None or predicate(r):
            counts[r.year] += 1
    return [(year, counts.get(year, 0)) for year in range(STUDY_START_YEAR, STUDY_END_YEAR + 1)]


def top_states(records, k: int) -> list[tuple[str, int]]:
    """Top k states by record count, descending; ties broken alphabetically."""
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = Counter(r.state for r in records)
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def climate_share(records) -> float:
    total = len(records)
    if total == 0:
        raise UndefinedStatisticError("climate share is undefined for an empty record set")
    return sum(1 for r in records if r.category.is_climate) / total


# --- OLS ----------------------------------------------------------------------


@dataclass(frozen=True)
class OlsResult:
    slope: float
    intercept: float
    r_squared: float
    n: int
    slope_stderr: float
    p_value: float
    degenerate: bool = False  # SST was zero; r_squared pinned to 0


def ols_fit(x, y) -> OlsResult:
    """Closed-form simple least squares with a two-sided slope t-test."""
    n = len(x)
    if n != len(y):
        raise ValueError("x and y must have equal length")
    if n < 3:
        raise ValueError("need at least 3 points")
    xbar = sum(x) / n
    ybar = sum(y) / n
    sxx = sum((xi - xbar) ** 2 for xi in x)
    if sxx == 0:
        raise DegenerateRegressorError("x is constant")
    sxy = sum((xi - xbar) * (yi - ybar) for xi, yi in zip(x, y))
    slope = sxy / sxx
    intercept = ybar - slope * xbar
    sse = sum((yi - (intercept + slope * xi)) ** 2 for xi, yi in zip(x, y))
    sst = sum((yi - ybar) ** 2 for yi in y)

    degenerate = sst == 0
    r_squared = 0.0 if degenerate else max(0.0, 1.0 - sse / sst)

    stderr = math.sqrt(max(sse, 0.0) / (n - 2) / sxx)
    if stderr == 0.0:
        # exact fit (or constant y with zero slope): no sampling noise left
        p_value = 1.0 if slope == 0.0 else 0.0
    else:
        p_value = student_t_two_sided_p(slope / stderr, n - 2)
    return OlsResult(slope, intercept, r_squared, n, stderr, p_value, degenerate)


# --- two-sample t tests ---------------------------------------------------------


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p_value: float
    mean_a: float
    mean_b: float


def _sample_variance(values, mean: float) -> float:
    return sum((v - mean) ** 2 for v in values) / (len(values) - 1)


def welch_t_test(a, b, pooled: bool = False) -> TTestResult:
    """Two-sample t-test, Welch by default, pooled-variance when pooled=True."""
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError("each sample needs at least 2 observations")
    mean_a = sum(a) / na
    mean_b = sum(b) / nb
    va = _sample_variance(a, mean_a)
    vb = _sample_variance(b, mean_b)

    if pooled:
        df = na + nb - 2.0
        sp2 = ((na - 1) * va + (nb - 1) * vb) / df
        se = math.sqrt(sp2 * (1.0 / na + 1.0 / nb))
    else:
        se2 = va / na + vb / nb
        se = math.sqrt(se2)
        numerator = se2**2
        denominator = (va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)
        if numerator > 0 and denominator > 0:
            df = numerator / denominator
        elif se2 > 0:
            # subnormal variances underflow the quartic terms; use the
            # conservative Welch-Satterthwaite lower bound
            df = float(min(na, nb) - 1)
        else:
            df = na + nb - 2.0

    if se == 0.0:
        if mean_a == mean_b:
            raise UndefinedStatisticError("zero variance in both samples with equal means")
        t = math.inf if mean_a > mean_b else -math.inf
        return TTestResult(t, df, 0.0, mean_a, mean_b)

    t = (mean_a - mean_b) / se
    return TTestResult(t, df, student_t_two_sided_p(t, df), mean_a, mean_b)


# --- hypothesis harness ----------------------------------------------------------

#: how a hypothesis is "supported" at level alpha:
#:   increase    - positive slope, trend significant
#:   stable      - stability not rejected (p >= alpha)
#:   greater     - mean_a > mean_b, difference significant
SUPPORT_RULES = ("increase", "stable", "greater")


@dataclass(frozen=True)
class HypothesisConfig:
    alpha: float = 0.05
    major_outage_threshold: int = 50_000
    pooled_t: bool = False
    #: support direction per hypothesis, overridable without code changes
    directions: dict = field(
        default_factory=lambda: {
            "H1(a)": "increase",
            "H1(b)": "stable",
            "H1(c)": "stable",
            "H1(d)": "stable",
            "H2(a)": "greater",
            "H2(b)": "greater",
        }
    )


@dataclass(frozen=True)
class HypothesisRow:
    key: str
    name: str
    test: str
    statistic: dict
    p_value: float
    alpha: float
    direction: str
    supported: bool


def run_hypotheses(
    records: list[OutageRecord],
    grouping: dict[str, GeoGroup],
    config: HypothesisConfig | None = None,
) -> list[HypothesisRow]:
    """Evaluate the six climate-outage hypotheses on cleaned study-window records."""
    cfg = config or HypothesisConfig()
    climate = [r for r in records if r.category.is_climate]
    rows = []

    rows.append(
        _ols_row(
            "H1(a)",
            "Climate-outage frequency increased over time",
            annual_counts(climate),
            cfg,
        )
    )
    rows.append(
        _ols_row(
            "H1(b)",
            "Major-outage proportion remained stable",
            _annual_major_proportion(climate, cfg.major_outage_threshold),
            cfg,
        )
    )
    rows.append(
        _ols_row(
            "H1(c)",
            "Average duration shows weak trend",
            _annual_mean(climate, lambda r: r.duration_minutes),
            cfg,
        )
    )
    rows.append(
        _ols_row(
            "H1(d)",
            "Average severity shows weak trend",
            _annual_mean(
                [r for r in climate if r.max_customers is not None],
                lambda r: r.max_customers,
            ),
            cfg,
        )
    )

    coastal_states, inland_states = _split_states(climate, grouping)
    n_years = STUDY_END_YEAR - STUDY_START_YEAR + 1
    per_state = Counter(r.state for r in climate)
    coastal_freq = [per_state[s] / n_years for s in coastal_states]
    inland_freq = [per_state[s] / n_years for s in inland_states]
    rows.append(
        _ttest_row("H2(a)", "Coastal frequency > inland", coastal_freq, inland_freq, cfg)
    )

    coastal_sev = [
        r.max_customers
        for r in climate
        if r.max_customers is not None and grouping[r.state].coastal
    ]
    inland_sev = [
        r.max_customers
        for r in climate
        if r.max_customers is not None and not grouping[r.state].coastal
    ]
    rows.append(
        _ttest_row("H2(b)", "Coastal severity > inland", coastal_sev, inland_sev, cfg)
    )
    return rows


def _split_states(records, grouping):
    states = sorted({r.state for r in records})
    unknown = [s for s in states if s not in grouping]
    if unknown:
        raise HypothesisError(f"states missing from the geographic grouping: {unknown}")
    coastal = [s for s in states if grouping[s].coastal]
    inland = [s for s in states if not grouping[s].coastal]
    return coastal, inland


def _annual_major_proportion(records, threshold):
    sized = [r for r in records if r.max_customers is not None]
    totals = Counter(r.year for r in sized)
    majors = Counter(r.year for r in sized if r.max_customers >= threshold)
    series = []
    for year in range(STUDY_START_YEAR, STUDY_END_YEAR + 1):
        if totals.get(year, 0) == 0:
            series.append((year, 0.0))
        else:
            series.append((year, majors.get(year, 0) / totals[year]))
    return series


def _annual_mean(records, value):
    sums = Counter()
    counts = Counter()
    for r in records:
        sums[r.year] += value(r)
        counts[r.year] += 1
    series = []
    for year in range(STUDY_START_YEAR, STUDY_END_YEAR + 1):
        series.append((year, sums[year] / counts[year] if counts.get(year) else 0.0))
    return series


def _ols_row(key, name, series, cfg: HypothesisConfig) -> HypothesisRow:
    direction = cfg.directions[key]
    try:
        result = ols_fit([y for y, _ in series], [v for _, v in series])
    except StatsError as err:
        raise HypothesisError(f"{key}: {err}") from err
    if direction == "increase":
        supported = result.slope > 0 and result.p_value < cfg.alpha
    elif direction == "stable":
        supported = result.p_value >= cfg.alpha
    else:
        raise HypothesisError(f"{key}: direction {direction!r} does not apply to OLS")
    statistic = {
        "slope": result.slope,
        "r_squared": result.r_squared,
        "slope_stderr": result.slope_stderr,
        "n": result.n,
        "degenerate": result.degenerate,
    }
    return HypothesisRow(key, name, "OLS", statistic, result.p_value, cfg.alpha, direction, supported)


def _ttest_row(key, name, sample_a, sample_b, cfg: HypothesisConfig) -> HypothesisRow:
    direction = cfg.directions[key]
    if direction != "greater":
        raise HypothesisError(f"{key}: direction {direction!r} does not apply to a t-test")
    try:
        result = welch_t_test(sample_a, sample_b, pooled=cfg.pooled_t)
    except (StatsError, ValueError) as err:
        raise HypothesisError(f"{key}: {err}") from err
    supported = result.t > 0 and result.p_value < cfg.alpha
    statistic = {
        "t": result.t,
        "df": result.df,
        "mean_a": result.mean_a,
        "mean_b": result.mean_b,
        "n_a": len(sample_a),
        "n_b": len(sample_b),
    }
    test = "pooled t-test" if cfg.pooled_t else "Welch t-test"
    return HypothesisRow(key, name, test, statistic, result.p_value, cfg.alpha, direction, supported)


def hypotheses_to_json(rows: list[HypothesisRow]) -> str:
    payload = [
        {
            "key": row.key,
            "name": row.name,
            "test": row.test,
            "statistic": row.statistic,
            "p_value": row.p_value,
            "alpha": row.alpha,
            "direction": row.direction,
            "outcome": "Supported" if row.supported else "Not Supported",
        }
        for row in rows
    ]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def format_hypothesis_table(rows: list[HypothesisRow]) -> str:
    lines = []
    header = f"{'Hypothesis':<52}{'Test':<14}{'Key Statistic':<38}Outcome"
    lines.append(header)
    lines.append("-" * len(header))
    for row in rows:
        if row.test == "OLS":
            stat = f"slope = {row.statistic['slope']:.4g}, R^2 = {row.statistic['r_squared']:.3f}"
        else:
            stat = f"t = {row.statistic['t']:.2f}, p = {_format_p(row.p_value)}"
        outcome = "Supported" if row.supported else "Not Supported"
        lines.append(f"{row.key + ': ' + row.name:<52}{row.test:<14}{stat:<38}{outcome}")
    return "\n".join(lines) + "\n"


def _format_p(p: float) -> str:
    return "< 0.001" if p < 0.001 else f"{p:.3f}"
