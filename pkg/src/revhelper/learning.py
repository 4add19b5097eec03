"""From-scratch learners: Gaussian naive Bayes, logistic regression trained
by gradient descent, random forests of Gini CART trees, a single CART
baseline tree, and PCA.

Scores are always the probability of the useful class; the decision
threshold is fixed at 0.5. Training is deterministic for a fixed seed (each
tree draws from its own spawned generator, so per-tree work can be farmed
out without changing results). Models serialize to versioned JSON and
round-trip exactly.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractError, DegenerateDataError
from .features import Dataset
from .stats import median

MODEL_FORMAT_VERSION = 1

KINDS = ("gaussian_nb", "logistic_regression", "random_forest", "cart")

_VARIANCE_FLOOR = 1e-9

DEFAULT_HYPER = {
    "gaussian_nb": {},
    "logistic_regression": {
        "learning_rate": 0.5,
        "l2": 0.0,
        "max_iter": 10_000,
        "tol": 1e-8,
    },
    "random_forest": {
        "n_trees": 2000,
        "subsample": 0.65,
        "bootstrap": False,
        "max_features": "sqrt",
        "min_leaf": 2,
        "max_depth": None,
    },
    "cart": {"max_depth": 8, "min_leaf": 2, "max_features": "all"},
}


@dataclass
class PCATransform:
    mean: np.ndarray
    components: np.ndarray  # (k, p), orthonormal rows
    explained_variance: np.ndarray
    n_components: int

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) @ self.components.T


@dataclass
class TrainedModel:
    kind: str
    feature_names: tuple
    params: dict
    hyper: dict
    seed: int
    pca: Optional[PCATransform] = None
    metadata: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# training


def _check_training_data(ds: Dataset):
    if np.isnan(ds.X).any():
        raise ContractError("training data contains missing values; impute first")
    if not np.isfinite(ds.X).all():
        raise ContractError("training data contains non-finite feature values")
    useful, non_useful = ds.class_counts()
    if useful == 0 or non_useful == 0:
        raise ContractError(
            f"training needs both classes, got {useful} useful / {non_useful} non-useful"
        )


def train_classifier(
    ds: Dataset, kind: str, hyper: Optional[dict] = None, seed: int = 0, jobs: int = 1
) -> TrainedModel:
    """Fit one classifier on an imputed dataset.

    ``hyper`` overrides the per-kind defaults; ``pca_variance`` in hyper
    fits a PCA on the training data first and attaches the transform to
    the model.
    """
    if kind not in KINDS:
        raise ContractError(f"unknown classifier kind {kind!r}")
    _check_training_data(ds)
    merged = dict(DEFAULT_HYPER[kind])
    merged.update(hyper or {})
    pca_variance = merged.pop("pca_variance", None)

    train_ds = ds
    pca = None
    if pca_variance is not None:
        pca, train_ds = pca_fit_transform(ds, variance_target=pca_variance)

    X, y = train_ds.X, train_ds.y
    if kind == "gaussian_nb":
        params = _fit_gaussian_nb(X, y)
    elif kind == "logistic_regression":
        params = _fit_logistic_regression(X, y, merged)
    elif kind == "random_forest":
        params = _fit_random_forest(X, y, merged, seed, jobs)
    else:
        params = {"tree": _build_tree_from_hyper(X, y, merged, seed)}

    return TrainedModel(
        kind=kind,
        feature_names=ds.feature_names,
        params=params,
        hyper=merged,
        seed=seed,
        pca=pca,
        metadata=_training_metadata(ds),
    )


def _training_metadata(ds: Dataset) -> dict:
    """Per-feature medians and quartiles by class, pooled medians, and
    column means (used for rationale and for serving-time defaults)."""
    stats = {}
    for j, name in enumerate(ds.feature_names):
        col = ds.X[:, j]
        useful = col[ds.y == 1]
        non_useful = col[ds.y == 0]
        stats[name] = {
            "useful_median": median(useful.tolist()),
            "non_useful_median": median(non_useful.tolist()),
            "useful_q1": float(np.quantile(useful, 0.25)),
            "useful_q3": float(np.quantile(useful, 0.75)),
            "non_useful_q1": float(np.quantile(non_useful, 0.25)),
            "non_useful_q3": float(np.quantile(non_useful, 0.75)),
            "pooled_median": median(col.tolist()),
        }
    useful, non_useful = ds.class_counts()
    return {
        "feature_stats": stats,
        "feature_means": {
            name: float(ds.X[:, j].mean()) for j, name in enumerate(ds.feature_names)
        },
        "class_counts": {"useful": useful, "non_useful": non_useful},
    }


def _fit_gaussian_nb(X, y) -> dict:
    n = len(y)
    theta = np.empty((2, X.shape[1]))
    var = np.empty((2, X.shape[1]))
    prior = np.empty(2)
    for cls in (0, 1):
        rows = X[y == cls]
        theta[cls] = rows.mean(axis=0)
        var[cls] = np.maximum(rows.var(axis=0), _VARIANCE_FLOOR)
        prior[cls] = len(rows) / n
    return {"class_log_prior": np.log(prior), "theta": theta, "var": var}


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_and_grad(wb: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean log-loss with L2 penalty on the weights; returns (loss, grad)
    for the stacked parameter vector [w..., b]."""
    w, b = wb[:-1], wb[-1]
    z = X @ w + b
    # log(1 + exp(-s*z)) computed stably, s = +-1
    s = 2.0 * y - 1.0
    m = -s * z
    loss = float(np.mean(np.logaddexp(0.0, m)))
    n = len(y)
    loss += l2 * float(w @ w) / (2.0 * n)
    residual = _sigmoid(z) - y
    grad_w = X.T @ residual / n + l2 * w / n
    grad_b = float(residual.mean())
    return loss, np.concatenate([grad_w, [grad_b]])


def _fit_logistic_regression(X, y, hyper) -> dict:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std == 0, 1.0, std)
    Xs = (X - mean) / std

    wb = np.zeros(X.shape[1] + 1)
    lr = float(hyper["learning_rate"])
    l2 = float(hyper["l2"])
    tol = float(hyper["tol"])
    loss, grad = logistic_loss_and_grad(wb, Xs, y.astype(float), l2)
    for _ in range(int(hyper["max_iter"])):
        step = wb - lr * grad
        new_loss, new_grad = logistic_loss_and_grad(step, Xs, y.astype(float), l2)
        if new_loss > loss:
            lr *= 0.5
            if lr < 1e-12:
                break
            continue
        converged = abs(loss - new_loss) / max(abs(loss), 1e-12) < tol
        wb, loss, grad = step, new_loss, new_grad
        if converged:
            break
    return {
        "weights": wb[:-1],
        "bias": float(wb[-1]),
        "scale_mean": mean,
        "scale_std": std,
    }


# --- CART trees ---


def _gini(pos, n):
    if n == 0:
        return 0.0
    p = pos / n
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _build_tree(X, y, idx, rng, n_candidates, min_leaf, max_depth, depth=0):
    ys = y[idx]
    n = len(idx)
    pos = int(ys.sum())
    if (
        pos == 0
        or pos == n
        or n < 2 * min_leaf
        or (max_depth is not None and depth >= max_depth)
    ):
        return {"p": [1.0 - pos / n, pos / n], "n": n}
    parent = _gini(pos, n)

    p_total = X.shape[1]
    k = min(n_candidates, p_total)
    candidates = rng.choice(p_total, size=k, replace=False) if k < p_total else np.arange(p_total)

    best = None  # (weighted_gini, feature, threshold)
    lo = min_leaf - 1
    hi = n - min_leaf
    positions = np.arange(lo, hi)
    for f in candidates:
        col = X[idx, f]
        order = np.argsort(col, kind="stable")
        sorted_col = col[order]
        sorted_y = ys[order]
        if sorted_col[0] == sorted_col[-1]:
            continue
        cum_pos = np.cumsum(sorted_y)
        valid = sorted_col[positions] < sorted_col[positions + 1]
        if not valid.any():
            continue
        split_at = positions[valid]
        n_left = split_at + 1.0
        n_right = n - n_left
        pos_left = cum_pos[split_at]
        pos_right = pos - pos_left
        p_l = pos_left / n_left
        p_r = pos_right / n_right
        gini_left = 1.0 - p_l * p_l - (1.0 - p_l) ** 2
        gini_right = 1.0 - p_r * p_r - (1.0 - p_r) ** 2
        weighted = (n_left * gini_left + n_right * gini_right) / n
        j = int(np.argmin(weighted))
        if best is None or weighted[j] < best[0] - 1e-15:
            cut = int(split_at[j])
            threshold = (sorted_col[cut] + sorted_col[cut + 1]) / 2.0
            best = (float(weighted[j]), int(f), float(threshold))

    # a split is only accepted when it does not increase impurity
    if best is None or best[0] > parent + 1e-12:
        return {"p": [1.0 - pos / n, pos / n], "n": n}

    _, f, threshold = best
    mask = X[idx, f] <= threshold
    left_idx = idx[mask]
    right_idx = idx[~mask]
    if len(left_idx) == 0 or len(right_idx) == 0:
        return {"p": [1.0 - pos / n, pos / n], "n": n}
    return {
        "f": f,
        "t": threshold,
        "l": _build_tree(X, y, left_idx, rng, n_candidates, min_leaf, max_depth, depth + 1),
        "r": _build_tree(X, y, right_idx, rng, n_candidates, min_leaf, max_depth, depth + 1),
    }


def _candidate_count(max_features, p) -> int:
    if max_features == "sqrt":
        return max(1, int(math.sqrt(p)))
    if max_features == "all":
        return p
    return max(1, int(max_features))


def _build_tree_from_hyper(X, y, hyper, seed) -> dict:
    rng = np.random.default_rng([seed, 1])
    return _build_tree(
        X,
        y,
        np.arange(len(y)),
        rng,
        _candidate_count(hyper.get("max_features", "all"), X.shape[1]),
        int(hyper.get("min_leaf", 2)),
        hyper.get("max_depth"),
    )


def _fit_random_forest(X, y, hyper, seed, jobs=1) -> dict:
    n_trees = int(hyper["n_trees"])
    if n_trees < 1:
        raise ContractError(f"random forest needs n_trees >= 1, got {n_trees}")
    n = len(y)
    n_candidates = _candidate_count(hyper["max_features"], X.shape[1])
    min_leaf = int(hyper["min_leaf"])
    max_depth = hyper["max_depth"]
    subsample = float(hyper["subsample"])
    bootstrap = bool(hyper["bootstrap"])
    children = np.random.SeedSequence(seed).spawn(n_trees)

    def build_one(t):
        rng = np.random.default_rng(children[t])
        if bootstrap:
            idx = rng.choice(n, size=n, replace=True)
        else:
            m = max(1, round(subsample * n))
            idx = rng.choice(n, size=min(m, n), replace=False)
        return _build_tree(X, y, np.sort(idx), rng, n_candidates, min_leaf, max_depth)

    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trees = list(pool.map(build_one, range(n_trees)))
    else:
        trees = [build_one(t) for t in range(n_trees)]
    return {"trees": trees}


def _tree_scores(node, X, idx, out):
    if "p" in node:
        out[idx] = node["p"][1]
        return
    mask = X[idx, node["f"]] <= node["t"]
    left = idx[mask]
    right = idx[~mask]
    if len(left):
        _tree_scores(node["l"], X, left, out)
    if len(right):
        _tree_scores(node["r"], X, right, out)


def tree_score_matrix(tree, X) -> np.ndarray:
    out = np.empty(len(X))
    _tree_scores(tree, X, np.arange(len(X)), out)
    return out


# ---------------------------------------------------------------------------
# prediction


def predict_scores(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Probability of the useful class for each row (pre-PCA feature space)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(model.feature_names):
        raise ContractError(
            f"expected {len(model.feature_names)} features, got shape {X.shape}"
        )
    if model.pca is not None:
        X = model.pca.apply(X)

    if model.kind == "gaussian_nb":
        return _nb_scores(model.params, X)
    if model.kind == "logistic_regression":
        params = model.params
        Xs = (X - params["scale_mean"]) / params["scale_std"]
        return _sigmoid(Xs @ params["weights"] + params["bias"])
    if model.kind == "random_forest":
        votes = np.zeros(len(X))
        for tree in model.params["trees"]:
            votes += tree_score_matrix(tree, X) >= 0.5
        return votes / len(model.params["trees"])
    if model.kind == "cart":
        return tree_score_matrix(model.params["tree"], X)
    raise ContractError(f"unknown classifier kind {model.kind!r}")


def _nb_scores(params, X) -> np.ndarray:
    log_joint = np.empty((len(X), 2))
    for cls in (0, 1):
        var = params["var"][cls]
        theta = params["theta"][cls]
        ll = -0.5 * (np.log(2.0 * math.pi * var) + (X - theta) ** 2 / var).sum(axis=1)
        log_joint[:, cls] = params["class_log_prior"][cls] + ll
    # normalize: posteriors sum to one
    peak = log_joint.max(axis=1, keepdims=True)
    joint = np.exp(log_joint - peak)
    return joint[:, 1] / joint.sum(axis=1)


def class_posteriors(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """(n, 2) posterior matrix; rows sum to one."""
    scores = predict_scores(model, X)
    return np.column_stack([1.0 - scores, scores])


def predict(model: TrainedModel, row) -> tuple:
    """(label, score) for one feature row; label is useful iff score >= 0.5."""
    row = np.asarray(row, dtype=float)
    if row.ndim != 1 or len(row) != len(model.feature_names):
        raise ContractError(
            f"expected {len(model.feature_names)} feature values, got {row.shape}"
        )
    score = float(predict_scores(model, row.reshape(1, -1))[0])
    label = "useful" if score >= 0.5 else "non_useful"
    return label, score


# ---------------------------------------------------------------------------
# PCA


def pca_fit_transform(ds: Dataset, variance_target: float = 0.95):
    """Center, eigen-decompose the covariance, and keep the smallest
    component count reaching the cumulative explained-variance target."""
    if not (0.0 < variance_target <= 1.0):
        raise ContractError(f"variance_target must be in (0, 1], got {variance_target}")
    if ds.n_rows < 2:
        raise ContractError("PCA needs at least two rows")
    X = ds.X
    if np.isnan(X).any() or not np.isfinite(X).all():
        raise ContractError("PCA needs finite, imputed features")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (ds.n_rows - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.maximum(eigenvalues[order], 0.0)
    eigenvectors = eigenvectors[:, order]
    total = float(eigenvalues.sum())
    if total <= 0:
        raise DegenerateDataError("dataset has zero variance; PCA undefined")

    if variance_target >= 1.0:
        k = int((eigenvalues > 1e-12 * eigenvalues[0]).sum()) or 1
    else:
        cumulative = np.cumsum(eigenvalues) / total
        k = int(np.searchsorted(cumulative, variance_target - 1e-12) + 1)
        k = min(k, len(eigenvalues))

    transform = PCATransform(
        mean=mean,
        components=eigenvectors[:, :k].T.copy(),
        explained_variance=eigenvalues.copy(),
        n_components=k,
    )
    transformed = Dataset(
        feature_names=tuple(f"PC{i + 1}" for i in range(k)),
        X=transform.apply(X),
        y=ds.y.copy(),
        extras=dict(ds.extras),
        meta=ds.meta,
        provenance=dict(ds.provenance),
    )
    return transform, transformed


# ---------------------------------------------------------------------------
# permutation feature importance


def feature_importance(model: TrainedModel, ds: Dataset, n_permutations: int = 10):
    """Mean decrease in accuracy when one column is shuffled, averaged over
    fixed-seed permutations; ranked descending."""
    if model.kind != "random_forest":
        raise ContractError("feature importance is defined for random forests")
    _check_training_data(ds)
    base_pred = predict_scores(model, ds.X) >= 0.5
    base_acc = float((base_pred == (ds.y == 1)).mean())

    results = []
    for j, name in enumerate(ds.feature_names):
        drops = []
        for r in range(n_permutations):
            rng = np.random.default_rng([model.seed, 104729, j, r])
            shuffled = ds.X.copy()
            shuffled[:, j] = rng.permutation(shuffled[:, j])
            pred = predict_scores(model, shuffled) >= 0.5
            drops.append(base_acc - float((pred == (ds.y == 1)).mean()))
        results.append((name, float(np.mean(drops)), j))
    results.sort(key=lambda item: (-item[1], item[2]))
    return [(name, importance) for name, importance, _ in results]


# ---------------------------------------------------------------------------
# serialization


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_model(model))


def serialize_model(model: TrainedModel) -> str:
    doc = {
        "model_format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "feature_names": list(model.feature_names),
        "hyper": model.hyper,
        "seed": model.seed,
        "params": _params_to_json(model.kind, model.params),
        "pca": None
        if model.pca is None
        else {
            "mean": model.pca.mean.tolist(),
            "components": model.pca.components.tolist(),
            "explained_variance": model.pca.explained_variance.tolist(),
            "n_components": model.pca.n_components,
        },
        "metadata": model.metadata,
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _params_to_json(kind, params) -> dict:
    if kind == "gaussian_nb":
        return {
            "class_log_prior": params["class_log_prior"].tolist(),
            "theta": params["theta"].tolist(),
            "var": params["var"].tolist(),
        }
    if kind == "logistic_regression":
        return {
            "weights": params["weights"].tolist(),
            "bias": params["bias"],
            "scale_mean": params["scale_mean"].tolist(),
            "scale_std": params["scale_std"].tolist(),
        }
    return params  # trees are nested dicts of plain floats already


def load_model(path) -> TrainedModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("model_format_version") != MODEL_FORMAT_VERSION:
        raise ContractError(
            f"unsupported model format version {doc.get('model_format_version')!r}"
        )
    kind = doc["kind"]
    params = doc["params"]
    if kind == "gaussian_nb":
        params = {
            "class_log_prior": np.array(params["class_log_prior"]),
            "theta": np.array(params["theta"]),
            "var": np.array(params["var"]),
        }
    elif kind == "logistic_regression":
        params = {
            "weights": np.array(params["weights"]),
            "bias": float(params["bias"]),
            "scale_mean": np.array(params["scale_mean"]),
            "scale_std": np.array(params["scale_std"]),
        }
    pca = None
    if doc.get("pca"):
        pca = PCATransform(
            mean=np.array(doc["pca"]["mean"]),
            components=np.array(doc["pca"]["components"]),
            explained_variance=np.array(doc["pca"]["explained_variance"]),
            n_components=int(doc["pca"]["n_components"]),
        )
    return TrainedModel(
        kind=kind,
        feature_names=tuple(doc["feature_names"]),
        params=params,
        hyper=doc.get("hyper", {}),
        seed=int(doc.get("seed", 0)),
        pca=pca,
        metadata=doc.get("metadata", {}),
    )
