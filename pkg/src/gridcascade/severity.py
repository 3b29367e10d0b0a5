"""Composite severity labeling and an interpretable L2 logistic regression.

The label is the top quartile of a composite score (mean of min-max normalized
duration and peak customers). Features deliberately exclude both impact
variables; a guard refuses any feature whose name smells like leakage.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field

import numpy as np

from .outages import CENSUS_REGIONS, EventCategory, GeoGroup, OutageRecord

SEASONS = ("DJF", "MAM", "JJA", "SON")
_MONTH_SEASON = {
    12: "DJF", 1: "DJF", 2: "DJF",
    3: "MAM", 4: "MAM", 5: "MAM",
    6: "JJA", 7: "JJA", 8: "JJA",
    9: "SON", 10: "SON", 11: "SON",
}

_LEAKAGE_TOKENS = ("duration", "customer")


class SeverityError(ValueError):
    pass


class DegenerateNormalizationError(SeverityError):
    pass


class StratificationError(SeverityError):
    pass


class LeakageError(SeverityError):
    """A feature name references an impact variable the model must not see."""


class ConvergenceError(SeverityError):
    pass


class UndefinedAucError(SeverityError):
    pass


# --- labeling -----------------------------------------------------------------


@dataclass(frozen=True)
class SeverityLabeling:
    duration_min: float
    duration_max: float
    customers_min: float
    customers_max: float
    threshold: float

    def score(self, record: OutageRecord) -> float:
        nd = (record.duration_minutes - self.duration_min) / (self.duration_max - self.duration_min)
        nc = (record.max_customers - self.customers_min) / (self.customers_max - self.customers_min)
        return (nd + nc) / 2.0

    def to_dict(self) -> dict:
        return {
            "duration_min": self.duration_min,
            "duration_max": self.duration_max,
            "customers_min": self.customers_min,
            "customers_max": self.customers_max,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SeverityLabeling":
        return cls(**payload)


@dataclass(frozen=True)
class LabeledRecord:
    record: OutageRecord
    score: float
    severe: bool


def severity_eligible(records) -> list[OutageRecord]:
    """Records usable for severity work: a known customer impact and finite duration."""
    return [
        r
        for r in records
        if r.max_customers is not None and math.isfinite(r.duration_minutes)
    ]


def label_severity(records) -> tuple[list[LabeledRecord], SeverityLabeling]:
    """Label the top quartile by composite score as severe.

    The threshold is the k-th largest score with k = ceil(n/4), so with
    distinct scores exactly ceil(25%) of records are severe; ties at the
    threshold are all labeled severe.
    """
    if not records:
        raise SeverityError("no records to label")
    for r in records:
        if r.max_customers is None or not math.isfinite(r.duration_minutes):
            raise SeverityError(f"record {r.event_id} lacks a finite duration or customer count")

    durations = [r.duration_minutes for r in records]
    customers = [float(r.max_customers) for r in records]
    dmin, dmax = min(durations), max(durations)
    cmin, cmax = min(customers), max(customers)
    if dmax == dmin or cmax == cmin:
        raise DegenerateNormalizationError(
            "duration or customer impact is constant; min-max normalization is undefined"
        )

    half = SeverityLabeling(dmin, dmax, cmin, cmax, threshold=math.nan)
    scores = [half.score(r) for r in records]
    k = math.ceil(len(records) / 4)
    threshold = sorted(scores, reverse=True)[k - 1]
    labeling = SeverityLabeling(dmin, dmax, cmin, cmax, threshold)
    labeled = [
        LabeledRecord(r, s, s >= threshold) for r, s in zip(records, scores)
    ]
    return labeled, labeling


# --- feature encoding -----------------------------------------------------------


def validate_feature_names(names) -> None:
    for name in names:
        lowered = name.lower()
        for token in _LEAKAGE_TOKENS:
            if token in lowered:
                raise LeakageError(f"feature {name!r} leaks the severity target")


def season_of(record: OutageRecord) -> str:
    return _MONTH_SEASON[record.start_time.month]


class FeatureEncoder:
    """Context features only: category, season, region, coastal flag, year,
    and the full season x region interaction, never duration or customers."""

    def __init__(self, grouping: dict[str, GeoGroup]):
        self.grouping = grouping
        self.categories = [c.value for c in EventCategory]
        self.regions = list(CENSUS_REGIONS)
        names = [f"category={c}" for c in self.categories]
        names += [f"season={s}" for s in SEASONS]
        names += [f"region={r}" for r in self.regions]
        names.append("coastal")
        names.append("year")
        names += [f"season={s}*region={r}" for s in SEASONS for r in self.regions]
        validate_feature_names(names)
        self.feature_names = names

    def encode(self, records) -> np.ndarray:
        n = len(records)
        X = np.zeros((n, len(self.feature_names)), dtype=float)
        cat_index = {c: i for i, c in enumerate(self.categories)}
        season_index = {s: i for i, s in enumerate(SEASONS)}
        region_index = {r: i for i, r in enumerate(self.regions)}
        base_season = len(self.categories)
        base_region = base_season + len(SEASONS)
        coastal_col = base_region + len(self.regions)
        year_col = coastal_col + 1
        inter_base = year_col + 1
        for i, r in enumerate(records):
            geo = self.grouping[r.state]
            X[i, cat_index[r.category.value]] = 1.0
            s = season_index[season_of(r)]
            X[i, base_season + s] = 1.0
            g = region_index[geo.census_region]
            X[i, base_region + g] = 1.0
            X[i, coastal_col] = 1.0 if geo.coastal else 0.0
            X[i, year_col] = float(r.year)
            X[i, inter_base + s * len(self.regions) + g] = 1.0
        return X


@dataclass
class Standardizer:
    means: np.ndarray
    stds: np.ndarray
    kept: list[int]
    dropped_names: list[str]

    @classmethod
    def fit(cls, X: np.ndarray, names: list[str]) -> "Standardizer":
        means = X.mean(axis=0)
        stds = X.std(axis=0)
        kept = [j for j in range(X.shape[1]) if stds[j] > 0]
        dropped = [names[j] for j in range(X.shape[1]) if stds[j] == 0]
        return cls(means[kept], stds[kept], kept, dropped)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X[:, self.kept] - self.means) / self.stds


# --- stratified split ------------------------------------------------------------


def stratified_split(labeled, train_fraction: float = 0.8, seed: int = 0):
    """Deterministic stratified split preserving the severe ratio within one record."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    by_class = {True: [], False: []}
    for i, item in enumerate(labeled):
        by_class[item.severe].append(i)
    for severe, idx in by_class.items():
        if len(idx) < 2:
            raise StratificationError(
                f"class severe={severe} has {len(idx)} record(s); need at least 2"
            )
    rng = random.Random(seed)
    test_idx = []
    for severe in (False, True):
        idx = list(by_class[severe])
        rng.shuffle(idx)
        n_test = int(math.floor((1.0 - train_fraction) * len(idx) + 0.5))
        test_idx.extend(idx[:n_test])
    test_set = set(test_idx)
    train = [labeled[i] for i in range(len(labeled)) if i not in test_set]
    test = [labeled[i] for i in range(len(labeled)) if i in test_set]
    return train, test


def balanced_class_weights(labels) -> tuple[float, float]:
    """(w_severe, w_nonsevere) with w_c = N / (2 * N_c)."""
    n = len(labels)
    n_pos = int(sum(labels))
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SeverityError("balanced weights need both classes present")
    return n / (2.0 * n_pos), n / (2.0 * n_neg)


# --- logistic regression -----------------------------------------------------------


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(z: np.ndarray) -> np.ndarray:
    # log(1 + e^z), stable for large |z|
    return np.where(z > 30, z, np.log1p(np.exp(np.minimum(z, 30))))


def weighted_penalized_loss(X, y, w, b, l2_lambda, class_weights) -> float:
    """Weighted negative log-likelihood plus (lambda/2)||w||^2; intercept unpenalized."""
    w_pos, w_neg = class_weights
    omega = np.where(y == 1, w_pos, w_neg)
    z = X @ w + b
    nll = omega * np.where(y == 1, _softplus(-z), _softplus(z))
    return float(nll.sum() + 0.5 * l2_lambda * np.dot(w, w))


def loss_gradient(X, y, w, b, l2_lambda, class_weights):
    w_pos, w_neg = class_weights
    omega = np.where(y == 1, w_pos, w_neg)
    p = _sigmoid(X @ w + b)
    resid = omega * (p - y)
    return X.T @ resid + l2_lambda * w, float(resid.sum())


@dataclass
class FitResult:
    weights: np.ndarray
    intercept: float
    iterations: int
    gradient_norm: float
    loss_path: list[float]


def fit_logistic(
    X,
    y,
    l2_lambda: float = 1.0,
    class_weights: tuple[float, float] = (1.0, 1.0),
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> FitResult:
    """Newton iterations with backtracking from w = 0; deterministic throughout."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if l2_lambda <= 0:
        raise ValueError("l2_lambda must be positive")
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    w_pos, w_neg = class_weights
    omega = np.where(y == 1, w_pos, w_neg)
    loss = weighted_penalized_loss(X, y, w, b, l2_lambda, class_weights)
    loss_path = [loss]

    for iteration in range(1, max_iter + 1):
        g_w, g_b = loss_gradient(X, y, w, b, l2_lambda, class_weights)
        grad_norm = math.sqrt(float(np.dot(g_w, g_w)) + g_b * g_b)
        if grad_norm <= tol:
            return FitResult(w, b, iteration - 1, grad_norm, loss_path)

        p = _sigmoid(X @ w + b)
        s = omega * p * (1.0 - p)
        H = np.empty((d + 1, d + 1))
        H[:d, :d] = X.T @ (s[:, None] * X) + l2_lambda * np.eye(d)
        H[:d, d] = X.T @ s
        H[d, :d] = H[:d, d]
        H[d, d] = s.sum() + 1e-12
        g = np.concatenate([g_w, [g_b]])
        try:
            delta = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            delta = -g  # fall back to plain gradient descent direction

        # backtracking line search keeps the loss path monotone
        step = 1.0
        descent = float(g @ delta)
        while step > 2.0**-50:
            w_new = w + step * delta[:d]
            b_new = b + step * delta[d]
            loss_new = weighted_penalized_loss(X, y, w_new, b_new, l2_lambda, class_weights)
            if loss_new <= loss + 1e-4 * step * descent or loss_new <= loss:
                break
            step *= 0.5
        else:
            return FitResult(w, b, iteration - 1, grad_norm, loss_path)
        if loss_new > loss:
            return FitResult(w, b, iteration - 1, grad_norm, loss_path)
        w, b, loss = w_new, b_new, loss_new
        loss_path.append(loss)

    g_w, g_b = loss_gradient(X, y, w, b, l2_lambda, class_weights)
    grad_norm = math.sqrt(float(np.dot(g_w, g_w)) + g_b * g_b)
    if grad_norm <= tol:
        return FitResult(w, b, max_iter, grad_norm, loss_path)
    raise ConvergenceError(
        f"no convergence within {max_iter} iterations; gradient norm {grad_norm:.3e}"
    )


@dataclass
class LogisticModel:
    weights: np.ndarray
    intercept: float
    l2_lambda: float
    class_weights: tuple[float, float]
    feature_names: list[str]  # retained (non-constant) features, in weight order
    feature_means: np.ndarray
    feature_stds: np.ndarray
    dropped_features: list[str] = field(default_factory=list)
    label_threshold: float | None = None


def standardize_raw(model: LogisticModel, X_raw: np.ndarray, raw_feature_names) -> np.ndarray:
    """Select the model's retained columns from a raw encoding and standardize them."""
    try:
        idx = [raw_feature_names.index(name) for name in model.feature_names]
    except ValueError as err:
        raise SeverityError(f"raw encoding is missing a model feature: {err}") from None
    return (X_raw[:, idx] - model.feature_means) / model.feature_stds


def train_severity_model(
    train,
    grouping: dict[str, GeoGroup],
    l2_lambda: float = 1.0,
    tol: float = 1e-8,
    label_threshold: float | None = None,
) -> tuple[LogisticModel, FitResult]:
    """Encode, standardize on the training set, and fit with balanced class weights."""
    encoder = FeatureEncoder(grouping)
    X_raw = encoder.encode([t.record for t in train])
    y = np.array([1.0 if t.severe else 0.0 for t in train])
    standardizer = Standardizer.fit(X_raw, encoder.feature_names)
    X = standardizer.transform(X_raw)
    weights = balanced_class_weights(y)
    fit = fit_logistic(X, y, l2_lambda=l2_lambda, class_weights=weights, tol=tol)
    kept_names = [encoder.feature_names[j] for j in standardizer.kept]
    model = LogisticModel(
        weights=fit.weights,
        intercept=fit.intercept,
        l2_lambda=l2_lambda,
        class_weights=weights,
        feature_names=kept_names,
        feature_means=standardizer.means,
        feature_stds=standardizer.stds,
        dropped_features=standardizer.dropped_names,
        label_threshold=label_threshold,
    )
    return model, fit


def score_records(model: LogisticModel, records, grouping: dict[str, GeoGroup]) -> np.ndarray:
    encoder = FeatureEncoder(grouping)
    X_raw = encoder.encode(records)
    return predict_proba(model, standardize_raw(model, X_raw, encoder.feature_names))


def predict_proba(model: LogisticModel, X: np.ndarray) -> np.ndarray:
    """sigma(w . x + b) for already-standardized feature rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.weights.shape[0]:
        raise ValueError(
            f"feature dimension {X.shape[1]} does not match model ({model.weights.shape[0]})"
        )
    return _sigmoid(X @ model.weights + model.intercept)


def model_to_json(model: LogisticModel) -> str:
    payload = {
        "weights": model.weights.tolist(),
        "intercept": model.intercept,
        "l2_lambda": model.l2_lambda,
        "class_weights": list(model.class_weights),
        "feature_names": model.feature_names,
        "feature_means": model.feature_means.tolist(),
        "feature_stds": model.feature_stds.tolist(),
        "dropped_features": model.dropped_features,
        "label_threshold": model.label_threshold,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def model_from_json(text: str) -> LogisticModel:
    payload = json.loads(text)
    return LogisticModel(
        weights=np.array(payload["weights"], dtype=float),
        intercept=payload["intercept"],
        l2_lambda=payload["l2_lambda"],
        class_weights=tuple(payload["class_weights"]),
        feature_names=payload["feature_names"],
        feature_means=np.array(payload["feature_means"], dtype=float),
        feature_stds=np.array(payload["feature_stds"], dtype=float),
        dropped_features=payload["dropped_features"],
        label_threshold=payload["label_threshold"],
    )


# --- evaluation ------------------------------------------------------------------


@dataclass
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    per_class: dict
    macro_precision: float
    macro_recall: float
    macro_f1: float
    auc: float
    roc_points: list[tuple[float, float]]

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC with average-rank tie handling."""
    scores = list(scores)
    labels = list(labels)
    n_pos = sum(1 for label in labels if label == 1)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAucError("AUC needs both classes present")
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    ranks = [0.0] * len(scores)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        avg_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg_rank
        i = j + 1
    rank_sum_pos = sum(r for r, label in zip(ranks, labels) if label == 1)
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def roc_curve(scores, labels) -> list[tuple[float, float]]:
    """(FPR, TPR) points from sweeping a decision threshold over distinct scores."""
    n_pos = sum(1 for label in labels if label == 1)
    n_neg = len(labels) - n_pos
    pairs = sorted(zip(scores, labels), key=lambda p: -p[0])
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(pairs):
        score = pairs[i][0]
        while i < len(pairs) and pairs[i][0] == score:
            if pairs[i][1] == 1:
                tp += 1
            else:
                fp += 1
            i += 1
        points.append((fp / n_neg, tp / n_pos))
    return points


def evaluate_scores(scores, labels, threshold: float = 0.5) -> EvalReport:
    """Confusion-matrix metrics plus ROC/AUC for the severe class."""
    scores = list(scores)
    labels = list(labels)
    if not scores:
        raise SeverityError("empty evaluation set")
    n_pos = sum(1 for label in labels if label == 1)
    if n_pos == 0 or n_pos == len(labels):
        raise UndefinedAucError("evaluation set must contain both classes")

    tp = fp = tn = fn = 0
    for score, label in zip(scores, labels):
        predicted = score >= threshold
        if predicted and label == 1:
            tp += 1
        elif predicted:
            fp += 1
        elif label == 1:
            fn += 1
        else:
            tn += 1
    total = tp + fp + tn + fn
    accuracy = (tp + tn) / total

    def _prf(tp_, fp_, fn_, support):
        precision = tp_ / (tp_ + fp_) if tp_ + fp_ else 0.0
        recall = tp_ / (tp_ + fn_) if tp_ + fn_ else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return {"precision": precision, "recall": recall, "f1": f1, "support": support}

    severe = _prf(tp, fp, fn, tp + fn)
    non_severe = _prf(tn, fn, fp, tn + fp)
    per_class = {"Severe": severe, "Non-Severe": non_severe}
    return EvalReport(
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        accuracy=accuracy,
        per_class=per_class,
        macro_precision=(severe["precision"] + non_severe["precision"]) / 2,
        macro_recall=(severe["recall"] + non_severe["recall"]) / 2,
        macro_f1=(severe["f1"] + non_severe["f1"]) / 2,
        auc=roc_auc(scores, labels),
        roc_points=roc_curve(scores, labels),
    )


def evaluate(model: LogisticModel, X: np.ndarray, labels, threshold: float = 0.5) -> EvalReport:
    return evaluate_scores(predict_proba(model, X), labels, threshold)


def coefficient_ranking(model: LogisticModel, top_k: int = 10):
    """All coefficients sorted descending, plus nonzero top positives/negatives."""
    ranked = sorted(
        zip(model.feature_names, model.weights.tolist()), key=lambda item: -item[1]
    )
    top_positive = [(n, c) for n, c in ranked if c > 0][:top_k]
    top_negative = [(n, c) for n, c in sorted(ranked, key=lambda item: item[1]) if c < 0][:top_k]
    return ranked, top_positive, top_negative


def eval_report_to_json(report: EvalReport) -> str:
    payload = {
        "confusion": {"tp": report.tp, "fp": report.fp, "tn": report.tn, "fn": report.fn},
        "accuracy": report.accuracy,
        "per_class": report.per_class,
        "macro_avg": {
            "precision": report.macro_precision,
            "recall": report.macro_recall,
            "f1": report.macro_f1,
        },
        "auc_roc": report.auc,
        "total": report.total,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def format_classification_report(report: EvalReport) -> str:
    lines = [f"{'Class':<12}{'Precision':>10}{'Recall':>10}{'F1-score':>10}{'Support':>10}"]
    for name in ("Non-Severe", "Severe"):
        c = report.per_class[name]
        lines.append(
            f"{name:<12}{c['precision']:>10.2f}{c['recall']:>10.2f}{c['f1']:>10.2f}{c['support']:>10d}"
        )
    lines.append(f"{'Accuracy':<12}{'-':>10}{'-':>10}{report.accuracy:>10.3f}{report.total:>10d}")
    lines.append(
        f"{'Macro-avg':<12}{report.macro_precision:>10.2f}{report.macro_recall:>10.2f}"
        f"{report.macro_f1:>10.2f}{report.total:>10d}"
    )
    lines.append(f"AUC-ROC: {report.auc:.3f}")
    return "\n".join(lines) + "\n"


def roc_to_csv(points) -> str:
    lines = ["fpr,tpr"]
    lines += [f"{fpr!r},{tpr!r}" for fpr, tpr in points]
    return "\n".join(lines) + "\n"
