"""Assembly of the 15-variable feature vector and model-ready datasets.

Feature layout (fixed order):

====  ===========  ====================================================
idx   name         meaning
====  ===========  ====================================================
0     RE_full      Flesch reading ease of the full body
1     RE_prose     Flesch reading ease with code elements removed
2     SWR          stop word ratio
3     SKWR         stop word + programming keyword ratio
4     QR           interrogative sentence ratio
5     CEP          1 if the body embeds any code element
6     STR          source token ratio
7     CS           max cosine similarity with earlier changed lines
8     CA_file      commits the reviewer authored on the file before
9     CA_sys       commits the reviewer authored anywhere before
10    CA_presence  1 if the reviewer ever changed the file before
11    CR_file      commits on the file the reviewer reviewed before
12    CR_commits   commits the reviewer reviewed anywhere before
13    CR_prs       pull requests the reviewer reviewed before
14    ELE          share of the file's imports the reviewer has used
====  ===========  ====================================================

Missing values (reading ease of empty prose, ELE of an import-free file)
are carried as NaN until imputation. The layout is versioned by name so
alternative expansions can be added later.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .corpus import USEFUL, InlineComment, PullRequest, ReviewCorpus, SystemRecord
from .errors import ContractError, ImputationError
from .experience import (
    authorship_counts,
    build_histories,
    empty_history,
    external_library_experience,
    reviewership_counts,
)
from .labeling import DEFAULT_POLICY, LabelPolicy
from .text_features import (
    Lexicons,
    baseline_keyword_count,
    conceptual_similarity,
    default_lexicons,
    question_ratio,
    reading_ease,
    sentiment_score,
    source_token_ratio,
    stop_word_ratio,
    tokenize,
)

FEATURE_SET_VERSION = "fifteen-v1"

FEATURE_NAMES = (
    "RE_full",
    "RE_prose",
    "SWR",
    "SKWR",
    "QR",
    "CEP",
    "STR",
    "CS",
    "CA_file",
    "CA_sys",
    "CA_presence",
    "CR_file",
    "CR_commits",
    "CR_prs",
    "ELE",
)

TEXTUAL_FEATURES = FEATURE_NAMES[:8]
EXPERIENCE_FEATURES = FEATURE_NAMES[8:]

FEATURE_SETS = {
    "all": FEATURE_NAMES,
    "textual": TEXTUAL_FEATURES,
    "experience": EXPERIENCE_FEATURES,
    "best": (
        "CS",
        "CA_file",
        "CA_sys",
        "CA_presence",
        "CR_file",
        "CR_commits",
        "CR_prs",
        "ELE",
        "SWR",
    ),
}

BASELINE_COLUMNS = ("keyword_count", "sentiment_value", "sentiment_group")

_SENTIMENT_GROUP_CODE = {"negative": -1.0, "neutral": 0.0, "positive": 1.0}


@dataclass(frozen=True)
class FeatureVector:
    """One comment's predictor values plus its label and provenance."""

    values: tuple  # aligned with FEATURE_NAMES, None = missing
    label: Optional[str]
    system: str = ""
    pr_id: str = ""
    comment_id: str = ""
    keyword_count: float = 0.0
    sentiment_value: float = 0.0
    sentiment_group: float = 0.0

    def value(self, name: str):
        return self.values[FEATURE_NAMES.index(name)]


@dataclass
class Dataset:
    """Feature matrix with labels; NaN marks a missing value."""

    feature_names: tuple
    X: np.ndarray
    y: np.ndarray  # 1 = useful, 0 = non-useful
    extras: dict = field(default_factory=dict)
    meta: tuple = ()  # (system, pr_id, comment_id) per row
    provenance: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return int(self.X.shape[0])

    def class_counts(self):
        useful = int(self.y.sum())
        return useful, int(len(self.y) - useful)

    def select_features(self, names) -> "Dataset":
        names = tuple(names)
        missing = [n for n in names if n not in self.feature_names]
        if missing:
            raise ContractError(f"unknown features requested: {missing}")
        cols = [self.feature_names.index(n) for n in names]
        return Dataset(
            feature_names=names,
            X=self.X[:, cols].copy(),
            y=self.y.copy(),
            extras=dict(self.extras),
            meta=self.meta,
            provenance=dict(self.provenance),
        )

    def subset_rows(self, indices) -> "Dataset":
        indices = np.asarray(indices)
        return Dataset(
            feature_names=self.feature_names,
            X=self.X[indices],
            y=self.y[indices],
            extras={k: v[indices] for k, v in self.extras.items()},
            meta=tuple(self.meta[i] for i in indices) if self.meta else (),
            provenance=dict(self.provenance),
        )


class FeatureExtractor:
    """Computes feature vectors for one system (histories built once)."""

    def __init__(
        self,
        system: SystemRecord,
        lexicons: Optional[Lexicons] = None,
        policy: LabelPolicy = DEFAULT_POLICY,
        ele_window_days: Optional[int] = None,
        sidecar: Optional[dict] = None,
    ):
        self.system = system
        self.lexicons = lexicons or default_lexicons()
        self.policy = policy
        self.ele_window_days = ele_window_days
        self.histories = build_histories(system, sidecar=sidecar)

    def vector(self, comment: InlineComment, pr: PullRequest) -> FeatureVector:
        if comment.label is None:
            raise ContractError(f"comment {comment.id} is not labeled")
        lex = self.lexicons
        tok = tokenize(comment.body)
        hist = self.histories.get(comment.reviewer) or empty_history(comment.reviewer)

        ca_file, ca_sys, ca_presence = authorship_counts(
            comment.reviewer, comment.anchor_path, comment.timestamp, hist
        )
        cr_file, cr_commits, cr_prs, _seen = reviewership_counts(
            comment.reviewer, comment.anchor_path, comment.timestamp, hist
        )
        ele = external_library_experience(
            comment.reviewer,
            target_imports_for(comment, pr),
            comment.timestamp,
            hist,
            window_days=self.ele_window_days,
        )

        sent_value, sent_group = sentiment_score(comment.body, lex)
        values = (
            reading_ease(tok, prose_only=False),
            reading_ease(tok, prose_only=True),
            stop_word_ratio(tok, False, lex),
            stop_word_ratio(tok, True, lex),
            question_ratio(tok),
            1.0 if tok.code_elements else 0.0,
            source_token_ratio(tok),
            conceptual_similarity(comment, pr, lex),
            float(ca_file),
            float(ca_sys),
            float(ca_presence),
            float(cr_file),
            float(cr_commits),
            float(cr_prs),
            ele,
        )
        return FeatureVector(
            values=values,
            label=comment.label.value,
            system=self.system.name,
            pr_id=pr.id,
            comment_id=comment.id,
            keyword_count=float(baseline_keyword_count(tok, lex)),
            sentiment_value=sent_value,
            sentiment_group=_SENTIMENT_GROUP_CODE[sent_group],
        )


def target_imports_for(comment: InlineComment, pr: PullRequest) -> tuple:
    """Imports of the commented file as last recorded at or before the
    comment (empty when never recorded)."""
    found = ()
    for commit in sorted(pr.commits, key=lambda c: (c.timestamp, c.id)):
        if commit.timestamp > comment.timestamp:
            break
        for diff in commit.file_diffs:
            if diff.path == comment.anchor_path and diff.post_image_imports is not None:
                found = tuple(diff.post_image_imports)
    return found


def build_feature_vector(
    comment: InlineComment,
    pr: PullRequest,
    system: SystemRecord,
    lexicons: Optional[Lexicons] = None,
    **kwargs,
) -> FeatureVector:
    return FeatureExtractor(system, lexicons=lexicons, **kwargs).vector(comment, pr)


def build_dataset(
    corpus: ReviewCorpus,
    lexicons: Optional[Lexicons] = None,
    ele_window_days: Optional[int] = None,
    sidecar: Optional[dict] = None,
    corpus_path: str = "",
) -> Dataset:
    """One row per labeled comment of every non-scaffolding pull request."""
    lexicons = lexicons or default_lexicons()
    vectors = []
    for system in corpus.systems:
        extractor = FeatureExtractor(
            system, lexicons=lexicons, ele_window_days=ele_window_days, sidecar=sidecar
        )
        for pr in system.pull_requests:
            if pr.scaffolding:
                continue
            for comment in pr.comments:
                if comment.label is None:
                    continue
                vectors.append(extractor.vector(comment, pr))
    config_hash = hashlib.sha256(
        repr(
            (
                FEATURE_SET_VERSION,
                ele_window_days,
                len(lexicons.stop_words),
                len(lexicons.prog_keywords),
                len(lexicons.sentiment_positive),
                len(lexicons.sentiment_negative),
                len(lexicons.baseline_keywords),
            )
        ).encode()
    ).hexdigest()[:16]
    return dataset_from_vectors(
        vectors, provenance={"corpus_path": corpus_path, "config_hash": config_hash}
    )


def dataset_from_vectors(vectors, provenance=None) -> Dataset:
    n = len(vectors)
    X = np.full((n, len(FEATURE_NAMES)), np.nan)
    y = np.zeros(n, dtype=np.int64)
    extras = {name: np.zeros(n) for name in BASELINE_COLUMNS}
    meta = []
    for i, vec in enumerate(vectors):
        for j, value in enumerate(vec.values):
            if value is not None:
                X[i, j] = float(value)
        y[i] = 1 if vec.label == USEFUL else 0
        extras["keyword_count"][i] = vec.keyword_count
        extras["sentiment_value"][i] = vec.sentiment_value
        extras["sentiment_group"][i] = vec.sentiment_group
        meta.append((vec.system, vec.pr_id, vec.comment_id))
    return Dataset(
        feature_names=FEATURE_NAMES,
        X=X,
        y=y,
        extras=extras,
        meta=tuple(meta),
        provenance=provenance or {},
    )


# ---------------------------------------------------------------------------
# imputation


def column_means(X: np.ndarray, feature_names) -> np.ndarray:
    """Per-feature means over non-missing rows; a feature missing everywhere
    raises ImputationError naming it."""
    means = np.empty(X.shape[1])
    for j, name in enumerate(feature_names):
        col = X[:, j]
        mask = ~np.isnan(col)
        if not mask.any():
            raise ImputationError(f"feature {name} is missing in every row")
        means[j] = col[mask].mean()
    return means


def apply_means(X: np.ndarray, means: np.ndarray) -> np.ndarray:
    out = X.copy()
    idx = np.where(np.isnan(out))
    out[idx] = np.take(means, idx[1])
    return out


def impute_missing(ds: Dataset, strategy: str = "mean") -> Dataset:
    """Resolve missing values: per-feature mean fill, or drop rows."""
    if ds.n_rows == 0:
        raise ContractError("cannot impute an empty dataset")
    if strategy == "mean":
        means = column_means(ds.X, ds.feature_names)
        return Dataset(
            feature_names=ds.feature_names,
            X=apply_means(ds.X, means),
            y=ds.y.copy(),
            extras=dict(ds.extras),
            meta=ds.meta,
            provenance=dict(ds.provenance),
        )
    if strategy == "drop":
        keep = ~np.isnan(ds.X).any(axis=1)
        return ds.subset_rows(np.flatnonzero(keep))
    raise ContractError(f"unknown imputation strategy {strategy!r}")


def missing_fraction(ds: Dataset) -> float:
    """Fraction of rows carrying at least one missing value."""
    if ds.n_rows == 0:
        return 0.0
    return float(np.isnan(ds.X).any(axis=1).mean())


# ---------------------------------------------------------------------------
# export / import


def _format_value(value) -> str:
    if np.isnan(value):
        return ""
    return repr(float(value))


def dataset_to_csv(ds: Dataset) -> str:
    """CSV with header = feature names + label; missing values are empty."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(ds.feature_names) + ["label"])
    for i in range(ds.n_rows):
        row = [_format_value(v) for v in ds.X[i]]
        row.append(USEFUL if ds.y[i] == 1 else "non_useful")
        writer.writerow(row)
    return buf.getvalue()


def dataset_to_jsonl(ds: Dataset) -> str:
    """JSON-lines export carrying provenance and baseline columns too."""
    lines = []
    for i in range(ds.n_rows):
        features = {
            name: (None if np.isnan(ds.X[i, j]) else float(ds.X[i, j]))
            for j, name in enumerate(ds.feature_names)
        }
        record = {
            "features": features,
            "label": USEFUL if ds.y[i] == 1 else "non_useful",
        }
        if ds.meta:
            record["system"], record["pr_id"], record["comment_id"] = ds.meta[i]
        for name, col in ds.extras.items():
            record[name] = float(col[i])
        lines.append(json.dumps(record, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


def load_dataset(path) -> Dataset:
    """Read a dataset back from .csv or .jsonl export."""
    text = open(path, "r", encoding="utf-8").read()
    if str(path).endswith(".jsonl"):
        return _dataset_from_jsonl(text)
    return _dataset_from_csv(text)


def _dataset_from_csv(text: str) -> Dataset:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise ContractError("empty dataset file")
    header = rows[0]
    if header[-1] != "label":
        raise ContractError("dataset CSV must end with a label column")
    names = tuple(header[:-1])
    n = len(rows) - 1
    X = np.full((n, len(names)), np.nan)
    y = np.zeros(n, dtype=np.int64)
    for i, row in enumerate(rows[1:]):
        for j, cell in enumerate(row[:-1]):
            if cell != "":
                X[i, j] = float(cell)
        y[i] = 1 if row[-1] == USEFUL else 0
    return Dataset(feature_names=names, X=X, y=y)


def _dataset_from_jsonl(text: str) -> Dataset:
    records = [json.loads(line) for line in text.splitlines() if line.strip()]
    if not records:
        raise ContractError("empty dataset file")
    names = tuple(records[0]["features"].keys())
    n = len(records)
    X = np.full((n, len(names)), np.nan)
    y = np.zeros(n, dtype=np.int64)
    extras = {name: np.zeros(n) for name in BASELINE_COLUMNS}
    meta = []
    for i, record in enumerate(records):
        for j, name in enumerate(names):
            value = record["features"].get(name)
            if value is not None:
                X[i, j] = float(value)
        y[i] = 1 if record["label"] == USEFUL else 0
        for name in BASELINE_COLUMNS:
            extras[name][i] = float(record.get(name, 0.0))
        meta.append(
            (record.get("system", ""), record.get("pr_id", ""), record.get("comment_id", ""))
        )
    return Dataset(
        feature_names=names, X=X, y=y, extras=extras, meta=tuple(meta)
    )
