"""HTTP prediction endpoint backing the reviewer-assistant UI.

POST /predict scores a draft comment against a loaded model and returns the
prediction with per-feature rationale: the computed feature values, the
training-class medians they compare against, importance ranks when the
model is a random forest, and deterministic improvement hints.

Textual features come from the request body and its changed-lines context
(conceptual similarity uses the changed lines as the candidate set).
Experience features use the caller's overrides when given and fall back to
the training medians, so text-only requests stay meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .errors import ContractError
from .features import FEATURE_NAMES
from .learning import TrainedModel, predict
from .text_features import (
    Lexicons,
    default_lexicons,
    max_line_similarity,
    question_ratio,
    reading_ease,
    source_token_ratio,
    stop_word_ratio,
    tokenize,
)


class ReviewerStats(BaseModel):
    """Optional experience overrides; anything omitted defaults to the
    model's training median."""

    ca_file: Optional[float] = None
    ca_sys: Optional[float] = None
    cr_file: Optional[float] = None
    cr_commits: Optional[float] = None
    cr_prs: Optional[float] = None
    ele: Optional[float] = None


class PredictRequest(BaseModel):
    comment_body: str
    changed_lines: List[str] = []
    reviewer_stats: Optional[ReviewerStats] = None
    model_id: Optional[str] = None


class FeatureReading(BaseModel):
    name: str
    value: float
    useful_median: float
    non_useful_median: float
    importance_rank: Optional[int] = None


class PredictResponse(BaseModel):
    label: str
    score: float
    model_id: str
    features: List[FeatureReading]
    hints: List[str]


@dataclass
class ModelRegistry:
    models: dict
    default_id: str
    lexicons: Lexicons

    @classmethod
    def from_files(cls, paths, lexicons: Optional[Lexicons] = None) -> "ModelRegistry":
        from pathlib import Path

        from .learning import load_model

        models = {}
        default_id = None
        for path in paths:
            model = load_model(path)
            model_id = model.metadata.get("model_id") or Path(path).stem
            models[model_id] = model
            if default_id is None:
                default_id = model_id
        if not models:
            raise ContractError("at least one model file is required")
        return cls(models=models, default_id=default_id, lexicons=lexicons or default_lexicons())


def request_feature_values(
    body: str,
    changed_lines,
    stats: Optional[dict],
    model: TrainedModel,
    lexicons: Lexicons,
) -> dict:
    """All fifteen feature values for an ad-hoc prediction request."""
    tok = tokenize(body)
    feature_stats = model.metadata.get("feature_stats", {})
    feature_means = model.metadata.get("feature_means", {})

    def fallback(name):
        if name in feature_stats:
            return float(feature_stats[name]["pooled_median"])
        return float(feature_means.get(name, 0.0))

    re_full = reading_ease(tok, prose_only=False)
    re_prose = reading_ease(tok, prose_only=True)
    values = {
        "RE_full": re_full if re_full is not None else float(feature_means.get("RE_full", 0.0)),
        "RE_prose": re_prose if re_prose is not None else float(feature_means.get("RE_prose", 0.0)),
        "SWR": stop_word_ratio(tok, False, lexicons),
        "SKWR": stop_word_ratio(tok, True, lexicons),
        "QR": question_ratio(tok),
        "CEP": 1.0 if tok.code_elements else 0.0,
        "STR": source_token_ratio(tok),
        "CS": max_line_similarity(body, changed_lines, lexicons),
    }

    stats = stats or {}
    overrides = {
        "CA_file": stats.get("ca_file"),
        "CA_sys": stats.get("ca_sys"),
        "CR_file": stats.get("cr_file"),
        "CR_commits": stats.get("cr_commits"),
        "CR_prs": stats.get("cr_prs"),
        "ELE": stats.get("ele"),
    }
    for name, override in overrides.items():
        values[name] = float(override) if override is not None else fallback(name)
    ca_file = stats.get("ca_file")
    if ca_file is not None:
        values["CA_presence"] = 1.0 if ca_file > 0 else 0.0
    else:
        values["CA_presence"] = fallback("CA_presence")
    return values


def generate_hints(values: dict, changed_lines, model: TrainedModel) -> list:
    """Deterministic threshold rules derived from how useful and non-useful
    comments differ; documented in the README."""
    feature_stats = model.metadata.get("feature_stats", {})
    hints = []
    if values["CEP"] == 0.0 and changed_lines:
        hints.append(
            "No code element found: reference a concrete identifier or call "
            "from the changed lines."
        )
    if values["CS"] == 0.0 and changed_lines:
        hints.append(
            "The comment shares no vocabulary with the changed code: name the "
            "concepts the change touches."
        )
    swr_stats = feature_stats.get("SWR")
    if swr_stats is not None and values["SWR"] > swr_stats["useful_q3"]:
        hints.append(
            "High stop-word share compared with typical useful comments: "
            "tighten the wording."
        )
    if values["QR"] >= 1.0:
        hints.append(
            "Every sentence is a question: clarification alone rarely triggers "
            "a change, so suggest a concrete action too."
        )
    return hints


def handle_predict(
    req: PredictRequest, model: TrainedModel, model_id: str, lexicons: Lexicons
) -> PredictResponse:
    if not req.comment_body.strip():
        raise HTTPException(status_code=400, detail="comment_body must not be blank")
    stats = req.reviewer_stats.model_dump() if req.reviewer_stats else None
    values = request_feature_values(
        req.comment_body, req.changed_lines, stats, model, lexicons
    )
    row = [values[name] for name in model.feature_names]
    label, score = predict(model, row)

    feature_stats = model.metadata.get("feature_stats", {})
    importance = {
        name: rank + 1
        for rank, (name, _value) in enumerate(model.metadata.get("importance", []))
    }
    readings = []
    for name in model.feature_names:
        stats_entry = feature_stats.get(name, {})
        readings.append(
            FeatureReading(
                name=name,
                value=values[name],
                useful_median=float(stats_entry.get("useful_median", 0.0)),
                non_useful_median=float(stats_entry.get("non_useful_median", 0.0)),
                importance_rank=importance.get(name),
            )
        )
    return PredictResponse(
        label=label,
        score=score,
        model_id=model_id,
        features=readings,
        hints=generate_hints(values, req.changed_lines, model),
    )


def create_app(registry: ModelRegistry, cors: bool = True) -> FastAPI:
    app = FastAPI(title="revhelper", version="0.1.0")
    if cors:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=["*"],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "model_id": registry.default_id}

    @app.post("/predict", response_model=PredictResponse)
    def predict_endpoint(req: PredictRequest):
        model_id = req.model_id or registry.default_id
        model = registry.models.get(model_id)
        if model is None:
            raise HTTPException(status_code=404, detail=f"unknown model_id {model_id!r}")
        return handle_predict(req, model, model_id, registry.lexicons)

    return app
