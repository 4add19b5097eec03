"""Evaluation protocols and report shapes.

Cross-validation (naive Bayes, logistic regression, the CART baselines)
pools held-out predictions into one confusion matrix and also reports the
per-fold average. Random forests are evaluated by repeated random 65/35
train/test splits with averaged test metrics. Imputation statistics are
always computed on the training portion only and applied to the held-out
portion, so no test information leaks into training.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractError, DegenerateDataError
from .features import BASELINE_COLUMNS, FEATURE_SETS, Dataset, apply_means, column_means
from .learning import predict_scores, train_classifier
from .stats import TestResult, cohens_d, mann_whitney_u

METRIC_COLUMNS = (
    "useful_precision",
    "useful_recall",
    "non_useful_precision",
    "non_useful_recall",
    "precision",
    "recall",
    "f1",
    "accuracy",
)

BASELINE_SPECS = (
    ("baseline-I", ("keyword_count",)),
    ("baseline-II-a", ("sentiment_group",)),
    ("baseline-II-b", ("sentiment_value",)),
    ("baseline-III-a", ("keyword_count", "sentiment_group")),
    ("baseline-III-b", ("keyword_count", "sentiment_value")),
)

REVHELPER_SPECS = (
    ("revhelper-textual", "textual"),
    ("revhelper-experience", "experience"),
    ("revhelper-all", "all"),
)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    support: int
    degenerate: bool  # a zero denominator was reported as 0.0


@dataclass(frozen=True)
class MetricSummary:
    useful: ClassMetrics
    non_useful: ClassMetrics
    precision: float  # support-weighted
    recall: float
    f1: float
    accuracy: float
    confusion: dict

    def column(self, name: str) -> float:
        if name == "useful_precision":
            return self.useful.precision
        if name == "useful_recall":
            return self.useful.recall
        if name == "non_useful_precision":
            return self.non_useful.precision
        if name == "non_useful_recall":
            return self.non_useful.recall
        return getattr(self, name)


@dataclass
class EvalReport:
    kind: str
    feature_set: str
    protocol: str  # "cv" or "rf-runs"
    seed: int
    splits: int
    pooled: MetricSummary
    per_split: list
    split_accuracies: list
    averaged: dict
    roc_points: list
    pr_points: list
    auc: Optional[float]
    missing_fraction: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def headline(self) -> dict:
        """The reported metric row: pooled for CV, run-averaged for RF."""
        if self.protocol == "rf-runs":
            return dict(self.averaged)
        return {name: self.pooled.column(name) for name in METRIC_COLUMNS}


def _as01(labels) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.dtype.kind in "biu" or arr.dtype.kind == "f":
        return arr.astype(int)
    return np.array([1 if v == "useful" else 0 for v in arr], dtype=int)


def classification_metrics(truth, predicted) -> MetricSummary:
    """Per-class precision/recall, weighted overalls, F1 and accuracy.

    Zero-denominator rates are reported as 0.0 and flagged. The weighted
    aggregates are re-derived from the confusion matrix as a self-audit.
    """
    t = _as01(truth)
    p = _as01(predicted)
    if len(t) != len(p):
        raise ContractError("truth and prediction lengths differ")
    if len(t) == 0:
        raise ContractError("cannot compute metrics on zero rows")

    tp = int(((t == 1) & (p == 1)).sum())
    fp = int(((t == 0) & (p == 1)).sum())
    fn = int(((t == 1) & (p == 0)).sum())
    tn = int(((t == 0) & (p == 0)).sum())

    useful, u_degenerate = _class_metrics(tp, fp, fn)
    non_useful, n_degenerate = _class_metrics(tn, fn, fp)
    support_u = tp + fn
    support_n = tn + fp
    n = len(t)
    precision = (support_u * useful[0] + support_n * non_useful[0]) / n
    recall = (support_u * useful[1] + support_n * non_useful[1]) / n
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    accuracy = (tp + tn) / n

    # self-audit: recompute the weighted aggregates straight from the matrix
    audit_prec = (
        support_u * (tp / (tp + fp) if tp + fp else 0.0)
        + support_n * (tn / (tn + fn) if tn + fn else 0.0)
    ) / n
    audit_rec = (
        support_u * (tp / (tp + fn) if tp + fn else 0.0)
        + support_n * (tn / (tn + fp) if tn + fp else 0.0)
    ) / n
    if abs(audit_prec - precision) > 1e-12 or abs(audit_rec - recall) > 1e-12:
        raise RuntimeError("metric self-audit failed")

    return MetricSummary(
        useful=ClassMetrics(useful[0], useful[1], support_u, u_degenerate),
        non_useful=ClassMetrics(non_useful[0], non_useful[1], support_n, n_degenerate),
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=accuracy,
        confusion={"tp": tp, "fp": fp, "fn": fn, "tn": tn},
    )


def _class_metrics(true_hits, false_hits, misses):
    degenerate = False
    if true_hits + false_hits == 0:
        precision = 0.0
        degenerate = True
    else:
        precision = true_hits / (true_hits + false_hits)
    if true_hits + misses == 0:
        recall = 0.0
        degenerate = True
    else:
        recall = true_hits / (true_hits + misses)
    return (precision, recall), degenerate


def roc_auc(truth, scores):
    """ROC points from a threshold sweep over the distinct scores, with the
    trapezoid AUC cross-checked against its rank-statistic form."""
    t = _as01(truth)
    s = np.asarray(scores, dtype=float)
    n_pos = int(t.sum())
    n_neg = int(len(t) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ContractError("ROC needs both classes present")

    points = [(0.0, 0.0)]
    for threshold in sorted(set(s.tolist()), reverse=True):
        predicted = s >= threshold
        tpr = float(((predicted) & (t == 1)).sum()) / n_pos
        fpr = float(((predicted) & (t == 0)).sum()) / n_neg
        points.append((fpr, tpr))
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))

    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0

    # rank (Mann-Whitney) formulation must agree
    from .stats import midranks

    ranks = midranks(s.tolist())
    rank_sum_pos = sum(r for r, label in zip(ranks, t) if label == 1)
    auc_rank = (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    if abs(auc - auc_rank) > 1e-9:
        raise RuntimeError(
            f"AUC cross-check failed: trapezoid {auc} vs rank {auc_rank}"
        )
    return points, auc


def pr_curve(truth, scores):
    """(recall, precision) points over the same threshold sweep."""
    t = _as01(truth)
    s = np.asarray(scores, dtype=float)
    n_pos = int(t.sum())
    points = []
    for threshold in sorted(set(s.tolist()), reverse=True):
        predicted = s >= threshold
        tp = int((predicted & (t == 1)).sum())
        fp = int((predicted & (t == 0)).sum())
        if tp + fp == 0:
            continue
        precision = tp / (tp + fp)
        recall = tp / n_pos if n_pos else 0.0
        points.append((recall, precision))
    return points


def kfold_split(n: int, k: int, stratify_labels=None, seed: int = 0) -> list:
    """Disjoint, exhaustive folds with sizes differing by at most one; with
    stratification each fold's class counts are within one of proportional."""
    if k < 2:
        raise ContractError(f"k must be >= 2, got {k}")
    if n < k:
        raise ContractError(f"cannot split {n} rows into {k} folds")
    rng = np.random.default_rng([seed, 271828])
    folds = [[] for _ in range(k)]
    if stratify_labels is None:
        for cursor, idx in enumerate(rng.permutation(n)):
            folds[cursor % k].append(int(idx))
    else:
        labels = _as01(stratify_labels)
        if len(labels) != n:
            raise ContractError("stratify_labels length must equal n")
        cursor = 0
        for cls in sorted(set(labels.tolist())):
            cls_idx = np.flatnonzero(labels == cls)
            for idx in rng.permutation(cls_idx):
                folds[cursor % k].append(int(idx))
                cursor += 1
    return [np.array(sorted(f), dtype=int) for f in folds]


def _impute_train_test(ds: Dataset, train_idx, test_idx):
    """Column means from the training rows only, applied to both sides."""
    means = column_means(ds.X[train_idx], ds.feature_names)
    train = ds.subset_rows(train_idx)
    test = ds.subset_rows(test_idx)
    train.X = apply_means(train.X, means)
    test.X = apply_means(test.X, means)
    return train, test


def _mean_metrics(summaries) -> dict:
    return {
        name: float(np.mean([s.column(name) for s in summaries]))
        for name in METRIC_COLUMNS
    }


def cross_validate(
    ds: Dataset,
    kind: str,
    hyper: Optional[dict] = None,
    k: int = 10,
    seed: int = 0,
    feature_set: str = "all",
    jobs: int = 1,
) -> EvalReport:
    """Stratified k-fold cross-validation with pooled headline metrics."""
    from .features import missing_fraction

    folds = kfold_split(ds.n_rows, k, stratify_labels=ds.y, seed=seed)
    pooled_truth = []
    pooled_scores = []
    per_fold = []
    for f, test_idx in enumerate(folds):
        train_idx = np.concatenate([folds[g] for g in range(k) if g != f])
        train_ds, test_ds = _impute_train_test(ds, train_idx, test_idx)
        model = train_classifier(train_ds, kind, hyper, seed=seed * 1009 + f, jobs=jobs)
        scores = predict_scores(model, test_ds.X)
        pooled_truth.append(test_ds.y)
        pooled_scores.append(scores)
        per_fold.append(classification_metrics(test_ds.y, scores >= 0.5))

    truth = np.concatenate(pooled_truth)
    scores = np.concatenate(pooled_scores)
    pooled = classification_metrics(truth, scores >= 0.5)
    roc_points, auc = roc_auc(truth, scores)
    return EvalReport(
        kind=kind,
        feature_set=feature_set,
        protocol="cv",
        seed=seed,
        splits=k,
        pooled=pooled,
        per_split=per_fold,
        split_accuracies=[m.accuracy for m in per_fold],
        averaged=_mean_metrics(per_fold),
        roc_points=roc_points,
        pr_points=pr_curve(truth, scores),
        auc=auc,
        missing_fraction=missing_fraction(ds),
    )


def evaluate_random_forest_runs(
    ds: Dataset,
    hyper: Optional[dict] = None,
    runs: int = 10,
    seed: int = 0,
    train_fraction: float = 0.65,
    feature_set: str = "all",
    jobs: int = 1,
) -> EvalReport:
    """Repeated random-split protocol: train on 65% of rows, test on the
    rest, average the test metrics over the runs (the headline numbers)."""
    from .features import missing_fraction

    if runs < 1:
        raise ContractError(f"runs must be >= 1, got {runs}")
    n = ds.n_rows
    m = int(round(train_fraction * n))
    if m < 1 or m >= n:
        raise ContractError(f"{n} rows cannot be split {train_fraction:.0%}/test")

    per_run = []
    run_aucs = []
    pooled_truth = []
    pooled_scores = []
    for r in range(runs):
        rng = np.random.default_rng([seed, 424242, r])
        order = rng.permutation(n)
        train_idx = np.sort(order[:m])
        test_idx = np.sort(order[m:])
        train_ds, test_ds = _impute_train_test(ds, train_idx, test_idx)
        model = train_classifier(
            train_ds, "random_forest", hyper, seed=seed * 1013 + r, jobs=jobs
        )
        scores = predict_scores(model, test_ds.X)
        per_run.append(classification_metrics(test_ds.y, scores >= 0.5))
        pooled_truth.append(test_ds.y)
        pooled_scores.append(scores)
        if 0 < test_ds.y.sum() < len(test_ds.y):
            run_aucs.append(roc_auc(test_ds.y, scores)[1])

    truth = np.concatenate(pooled_truth)
    scores = np.concatenate(pooled_scores)
    pooled = classification_metrics(truth, scores >= 0.5)
    roc_points, pooled_auc = (
        roc_auc(truth, scores) if 0 < truth.sum() < len(truth) else ([], None)
    )
    return EvalReport(
        kind="random_forest",
        feature_set=feature_set,
        protocol="rf-runs",
        seed=seed,
        splits=runs,
        pooled=pooled,
        per_split=per_run,
        split_accuracies=[m.accuracy for m in per_run],
        averaged=_mean_metrics(per_run),
        roc_points=roc_points,
        pr_points=pr_curve(truth, scores),
        auc=float(np.mean(run_aucs)) if run_aucs else None,
        missing_fraction=missing_fraction(ds),
        extra={"pooled_auc": pooled_auc},
    )


# ---------------------------------------------------------------------------
# baseline comparison


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    test: EvalReport
    validation: EvalReport
    significance: Optional[TestResult]
    effect: Optional[float]


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple
    best_baseline: str


def _baseline_dataset(ds: Dataset, columns) -> Dataset:
    for column in columns:
        if column not in ds.extras:
            raise ContractError(
                f"baseline feature {column!r} unavailable; build the dataset "
                "from a corpus or JSONL export"
            )
    X = np.column_stack([ds.extras[c] for c in columns])
    return Dataset(
        feature_names=tuple(columns),
        X=X,
        y=ds.y.copy(),
        extras={},
        meta=ds.meta,
        provenance=dict(ds.provenance),
    )


def run_baseline_comparison(
    train_ds: Dataset,
    validation_ds: Dataset,
    seed: int = 0,
    k: int = 10,
    runs: int = 10,
    rf_hyper: Optional[dict] = None,
    cart_hyper: Optional[dict] = None,
    jobs: int = 1,
) -> ComparisonReport:
    """Five keyword/sentiment CART baselines against the text-only,
    experience-only, and all-feature random forest variants.

    Both datasets are evaluated with the same protocol and seed, so
    identical inputs produce identical test and validation columns. The
    significance column compares per-split test accuracies of each forest
    variant with those of the best baseline.
    """
    if train_ds.feature_names != validation_ds.feature_names:
        raise ContractError("train and validation datasets disagree on features")

    rows = []
    baseline_reports = {}
    for name, columns in BASELINE_SPECS:
        test = cross_validate(
            _baseline_dataset(train_ds, columns),
            "cart",
            cart_hyper,
            k=k,
            seed=seed,
            feature_set="+".join(columns),
            jobs=jobs,
        )
        validation = cross_validate(
            _baseline_dataset(validation_ds, columns),
            "cart",
            cart_hyper,
            k=k,
            seed=seed,
            feature_set="+".join(columns),
            jobs=jobs,
        )
        baseline_reports[name] = test
        rows.append(
            ComparisonRow(
                name=name, test=test, validation=validation, significance=None, effect=None
            )
        )

    best_baseline = max(
        baseline_reports.items(), key=lambda item: item[1].pooled.accuracy
    )[0]
    best_samples = baseline_reports[best_baseline].split_accuracies

    for name, set_name in REVHELPER_SPECS:
        features = FEATURE_SETS[set_name]
        test = evaluate_random_forest_runs(
            train_ds.select_features(features),
            rf_hyper,
            runs=runs,
            seed=seed,
            feature_set=set_name,
            jobs=jobs,
        )
        validation = evaluate_random_forest_runs(
            validation_ds.select_features(features),
            rf_hyper,
            runs=runs,
            seed=seed,
            feature_set=set_name,
            jobs=jobs,
        )
        significance = mann_whitney_u(test.split_accuracies, best_samples)
        try:
            effect = cohens_d(test.split_accuracies, best_samples)
        except (ContractError, DegenerateDataError):
            effect = None
        rows.append(
            ComparisonRow(
                name=name,
                test=test,
                validation=validation,
                significance=significance,
                effect=effect,
            )
        )
    return ComparisonReport(rows=tuple(rows), best_baseline=best_baseline)


# ---------------------------------------------------------------------------
# rendering


def _headline_cells(report: EvalReport) -> list:
    return [f"{report.headline[name]:.4f}" for name in METRIC_COLUMNS]


def render_eval_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind", "feature_set", "protocol", "splits", "seed"] + list(METRIC_COLUMNS) + ["auc"])
    writer.writerow(
        [report.kind, report.feature_set, report.protocol, report.splits, report.seed]
        + _headline_cells(report)
        + ["" if report.auc is None else f"{report.auc:.4f}"]
    )
    writer.writerow([])
    writer.writerow(["split"] + list(METRIC_COLUMNS))
    for i, summary in enumerate(report.per_split):
        writer.writerow([i] + [f"{summary.column(name):.4f}" for name in METRIC_COLUMNS])
    return buf.getvalue()


def eval_report_to_dict(report: EvalReport) -> dict:
    return {
        "kind": report.kind,
        "feature_set": report.feature_set,
        "protocol": report.protocol,
        "splits": report.splits,
        "seed": report.seed,
        "headline": report.headline,
        "pooled": _summary_to_dict(report.pooled),
        "averaged": report.averaged,
        "per_split": [_summary_to_dict(s) for s in report.per_split],
        "auc": report.auc,
        "roc_points": report.roc_points,
        "pr_points": report.pr_points,
        "missing_fraction": report.missing_fraction,
    }


def _summary_to_dict(summary: MetricSummary) -> dict:
    return {
        "useful_precision": summary.useful.precision,
        "useful_recall": summary.useful.recall,
        "non_useful_precision": summary.non_useful.precision,
        "non_useful_recall": summary.non_useful.recall,
        "precision": summary.precision,
        "recall": summary.recall,
        "f1": summary.f1,
        "accuracy": summary.accuracy,
        "confusion": summary.confusion,
    }


def render_eval_json(report: EvalReport) -> str:
    return json.dumps(eval_report_to_dict(report), indent=2, ensure_ascii=False) + "\n"


def render_eval_table(report: EvalReport) -> str:
    headers = [
        "Useful P",
        "Useful R",
        "Non-useful P",
        "Non-useful R",
        "Precision",
        "Recall",
        "F1",
        "Accuracy",
    ]
    cells = _headline_cells(report)
    name = f"{report.kind} [{report.feature_set}] ({report.protocol}, {report.splits} splits)"
    widths = [max(len(h), len(c)) for h, c in zip(headers, cells)]
    lines = [
        name,
        "  ".join(h.rjust(w) for h, w in zip(headers, widths)),
        "  ".join(c.rjust(w) for c, w in zip(cells, widths)),
    ]
    if report.auc is not None:
        lines.append(f"AUC: {report.auc:.4f}")
    return "\n".join(lines) + "\n"


def render_comparison_csv(report: ComparisonReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["classifier"]
        + [f"test_{c}" for c in METRIC_COLUMNS]
        + [f"validation_{c}" for c in METRIC_COLUMNS]
        + ["significance_p", "cohens_d"]
    )
    for row in report.rows:
        writer.writerow(
            [row.name]
            + _headline_cells(row.test)
            + _headline_cells(row.validation)
            + [
                "" if row.significance is None else f"{row.significance.p_value:.6f}",
                "" if row.effect is None else f"{row.effect:.4f}",
            ]
        )
    return buf.getvalue()


def render_comparison_json(report: ComparisonReport) -> str:
    doc = {
        "best_baseline": report.best_baseline,
        "rows": [
            {
                "classifier": row.name,
                "test": row.test.headline,
                "validation": row.validation.headline,
                "significance_p": None
                if row.significance is None
                else row.significance.p_value,
                "cohens_d": row.effect,
            }
            for row in report.rows
        ],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def render_comparison_table(report: ComparisonReport) -> str:
    short = ["U-P", "U-R", "N-P", "N-R", "P", "R", "F1", "Acc"]
    headers = (
        ["classifier"]
        + [f"test {h}" for h in short]
        + [f"val {h}" for h in short]
        + ["signif. p & d"]
    )
    table = [headers]
    for row in report.rows:
        significance = (
            "--"
            if row.significance is None
            else f"{row.significance.p_value:.3f} & "
            + ("n/a" if row.effect is None else f"{row.effect:.2f}")
        )
        table.append(
            [row.name]
            + [f"{row.test.headline[c]:.4f}" for c in METRIC_COLUMNS]
            + [f"{row.validation.headline[c]:.4f}" for c in METRIC_COLUMNS]
            + [significance]
        )
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    lines = []
    for i, row in enumerate(table):
        lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    lines.append(f"best baseline: {report.best_baseline}")
    return "\n".join(lines) + "\n"
