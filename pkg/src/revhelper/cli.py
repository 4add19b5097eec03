"""Command-line interface: the full pipeline from mining to serving.

Subcommands: fetch, synth, label, features, study, train, evaluate,
predict, serve. Stages communicate through files (corpus-JSON, dataset
CSV/JSONL, model JSON); `predict` also reads from stdin and can act as a
thin client against a running service via --url. Exit codes: 0 success,
1 contract or validation error, 2 I/O or transport error.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys

from . import __version__
from .corpus import load_corpus, save_corpus, serialize_corpus, validate_corpus
from .errors import (
    AuthError,
    ConfigError,
    ContractError,
    CorpusParseError,
    CorpusValidationError,
    DegenerateDataError,
    DiffParseError,
    ImputationError,
    RateLimitError,
    RevHelperError,
    TransportError,
)

KIND_ALIASES = {
    "nb": "gaussian_nb",
    "gaussian_nb": "gaussian_nb",
    "lr": "logistic_regression",
    "logistic_regression": "logistic_regression",
    "rf": "random_forest",
    "random_forest": "random_forest",
    "cart": "cart",
}

_CONTRACT_ERRORS = (
    ContractError,
    ConfigError,
    CorpusParseError,
    CorpusValidationError,
    DiffParseError,
    ImputationError,
    DegenerateDataError,
)
_TRANSPORT_ERRORS = (AuthError, RateLimitError, TransportError)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage by default; we reserve 2 for I/O."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def main(argv=None) -> int:
    try:
        return _run(argv if argv is not None else sys.argv[1:])
    except _CONTRACT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _TRANSPORT_ERRORS as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except RevHelperError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _resolve_seed(args) -> int:
    """Randomized commands must run under a known seed; print one if the
    caller did not choose."""
    if getattr(args, "seed", None) is not None:
        return args.seed
    seed = secrets.randbits(32)
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _add_lexicon_flags(parser):
    parser.add_argument("--stop-words", help="override the bundled stop word list")
    parser.add_argument("--prog-keywords", help="override the programming keyword list")
    parser.add_argument("--sentiment-positive", help="override the positive sentiment list")
    parser.add_argument("--sentiment-negative", help="override the negative sentiment list")
    parser.add_argument("--baseline-keywords", help="override the baseline keyword list")


def _lexicons_from_args(args):
    from .text_features import lexicons_from_files

    return lexicons_from_files(
        stop_words=args.stop_words,
        prog_keywords=args.prog_keywords,
        sentiment_positive=args.sentiment_positive,
        sentiment_negative=args.sentiment_negative,
        baseline_keywords=args.baseline_keywords,
    )


def _add_dataset_source_flags(parser):
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--corpus", help="labeled corpus-JSON to build features from")
    source.add_argument("--dataset", help="previously exported dataset (.csv or .jsonl)")
    parser.add_argument("--ele-window-days", type=int, default=None)
    parser.add_argument("--sidecar", help="pre-corpus developer history JSON")
    _add_lexicon_flags(parser)


def _load_dataset_from_args(args):
    from .features import build_dataset, load_dataset

    if args.dataset:
        return load_dataset(args.dataset)
    corpus = load_corpus(args.corpus)
    sidecar = None
    if args.sidecar:
        from .experience import load_history_sidecar

        sidecar = load_history_sidecar(args.sidecar)
    return build_dataset(
        corpus,
        lexicons=_lexicons_from_args(args),
        ele_window_days=args.ele_window_days,
        sidecar=sidecar,
        corpus_path=args.corpus,
    )


def _write_output(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _build_parser() -> _Parser:
    parser = _Parser(prog="revhelper", description=__doc__)
    parser.add_argument("--version", action="version", version=f"revhelper {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="pull review history from a forge API")
    p.add_argument("--repo", required=True, help="owner/name")
    p.add_argument("--base-url", default="https://api.github.com")
    p.add_argument("--token", default="", help="defaults to $REVHELPER_TOKEN")
    p.add_argument("--page-size", type=int, default=50)
    p.add_argument("--max-prs", type=int, default=100)
    p.add_argument("--tape", help="replay HTTP exchanges from this tape file")
    p.add_argument("--record-tape", help="record HTTP exchanges to this tape file")
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--n-prs", type=int, required=True)
    p.add_argument("--comments-per-pr", type=int, nargs=2, default=[2, 5], metavar=("LO", "HI"))
    p.add_argument("--useful-fraction", type=float, default=0.5)
    p.add_argument("--signal-strength", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("label", help="apply the change-triggering heuristic")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vicinity", type=int, default=10)
    p.add_argument("--any-file", action="store_true", help="count changes in any file")

    p = sub.add_parser("features", help="export the feature dataset")
    _add_dataset_source_flags(p)
    p.add_argument("--impute", choices=["none", "mean", "drop"], default="none")
    p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    p.add_argument("--out", required=True)

    p = sub.add_parser("study", help="useful vs non-useful comparative study")
    _add_dataset_source_flags(p)
    p.add_argument("--format", choices=["csv", "json", "table"], default="table")
    p.add_argument("--out", default=None)

    p = sub.add_parser("train", help="train a classifier and save it")
    _add_dataset_source_flags(p)
    p.add_argument("--kind", default="rf", choices=sorted(KIND_ALIASES))
    p.add_argument("--feature-set", default="all")
    p.add_argument("--impute", choices=["mean", "drop"], default="mean")
    p.add_argument("--n-trees", type=int, default=None)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--l2", type=float, default=None)
    p.add_argument("--pca", type=float, default=None, help="PCA variance target")
    p.add_argument("--bootstrap", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="cross-validation, repeated RF runs, or baselines")
    _add_dataset_source_flags(p)
    p.add_argument("--mode", choices=["cv", "rf-runs", "baselines"], default="cv")
    p.add_argument("--kind", default="rf", choices=sorted(KIND_ALIASES))
    p.add_argument("--feature-set", default="all")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--n-trees", type=int, default=None)
    p.add_argument("--pca", type=float, default=None)
    p.add_argument("--validation-corpus", default=None)
    p.add_argument("--validation-dataset", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=["csv", "json", "table"], default="table")
    p.add_argument("--out", default=None)

    p = sub.add_parser("predict", help="score one draft comment")
    p.add_argument("--model", help="model JSON (local mode)")
    p.add_argument("--url", help="service base URL (thin-client mode)")
    p.add_argument("--input", default="-", help="request JSON file, '-' for stdin")
    p.add_argument("--format", choices=["json", "table"], default="table")
    _add_lexicon_flags(p)

    p = sub.add_parser("serve", help="start the prediction service")
    p.add_argument("--model", action="append", required=True, help="model JSON (repeatable)")
    p.add_argument("--addr", default="127.0.0.1:8000")
    p.add_argument("--no-cors", action="store_true")
    _add_lexicon_flags(p)

    return parser


def _run(argv) -> int:
    args = _build_parser().parse_args(argv)
    handler = {
        "fetch": _cmd_fetch,
        "synth": _cmd_synth,
        "label": _cmd_label,
        "features": _cmd_features,
        "study": _cmd_study,
        "train": _cmd_train,
        "evaluate": _cmd_evaluate,
        "predict": _cmd_predict,
        "serve": _cmd_serve,
    }[args.command]
    return handler(args)


def _cmd_fetch(args) -> int:
    from .ingestion import (
        ForgeConfig,
        RecordingTransport,
        RequestsTransport,
        TapeTransport,
        fetch_remote_reviews,
    )

    config = ForgeConfig(
        base_url=args.base_url,
        repo=args.repo,
        auth_token=args.token,
        page_size=args.page_size,
        max_prs=args.max_prs,
    )
    if args.tape:
        transport = TapeTransport(args.tape)
    else:
        transport = RequestsTransport()
    recorder = None
    if args.record_tape:
        recorder = transport = RecordingTransport(transport, args.record_tape)
    corpus = fetch_remote_reviews(config, transport=transport)
    if recorder is not None:
        recorder.save()
    save_corpus(corpus, args.out)
    n_comments = sum(1 for _ in corpus.iter_comments())
    print(f"fetched {len(corpus.systems[0].pull_requests)} PRs, {n_comments} inline comments")
    return 0


def _cmd_synth(args) -> int:
    from .ingestion import SynthSpec, generate_synthetic_corpus

    seed = _resolve_seed(args)
    spec = SynthSpec(
        n_prs=args.n_prs,
        comments_per_pr=tuple(args.comments_per_pr),
        useful_fraction=args.useful_fraction,
        signal_strength=args.signal_strength,
        seed=seed,
    )
    corpus = generate_synthetic_corpus(spec)
    save_corpus(corpus, args.out)
    n_comments = sum(1 for _ in corpus.iter_comments())
    print(f"wrote {args.out}: {args.n_prs} PRs, {n_comments} comments, seed {seed}")
    return 0


def _cmd_label(args) -> int:
    from .labeling import LabelPolicy, label_corpus

    corpus = load_corpus(args.corpus)
    policy = LabelPolicy(vicinity=args.vicinity, require_same_file=not args.any_file)
    labeled = label_corpus(corpus, policy)
    save_corpus(labeled, args.out)
    useful = sum(
        1 for _, _, c in labeled.iter_comments() if c.label and c.label.value == "useful"
    )
    total = sum(1 for _ in labeled.iter_comments())
    pct = 100.0 * useful / total if total else 0.0
    print(f"labeled {total} comments: {useful} useful ({pct:.2f}%)")
    return 0


def _cmd_features(args) -> int:
    from .features import dataset_to_csv, dataset_to_jsonl, impute_missing, missing_fraction

    ds = _load_dataset_from_args(args)
    print(
        f"{ds.n_rows} rows; {missing_fraction(ds) * 100:.2f}% have a missing value",
        file=sys.stderr,
    )
    if args.impute != "none":
        ds = impute_missing(ds, strategy=args.impute)
    text = dataset_to_jsonl(ds) if args.format == "jsonl" else dataset_to_csv(ds)
    _write_output(text, args.out)
    return 0


def _cmd_study(args) -> int:
    from .study import (
        render_study_csv,
        render_study_json,
        render_study_table,
        run_comparative_study,
    )

    ds = _load_dataset_from_args(args)
    report = run_comparative_study(ds)
    renderer = {
        "csv": render_study_csv,
        "json": render_study_json,
        "table": render_study_table,
    }[args.format]
    _write_output(renderer(report), args.out)
    return 0


def _gather_hyper(args, kind: str) -> dict:
    hyper = {}
    if getattr(args, "n_trees", None) is not None:
        hyper["n_trees"] = args.n_trees
    if getattr(args, "max_depth", None) is not None:
        hyper["max_depth"] = args.max_depth
    if getattr(args, "l2", None) is not None:
        hyper["l2"] = args.l2
    if getattr(args, "pca", None) is not None:
        hyper["pca_variance"] = args.pca
    if getattr(args, "bootstrap", False):
        hyper["bootstrap"] = True
    return hyper


def _cmd_train(args) -> int:
    from pathlib import Path

    from .features import FEATURE_SETS, impute_missing
    from .learning import feature_importance, save_model, train_classifier

    kind = KIND_ALIASES[args.kind]
    seed = _resolve_seed(args)
    ds = _load_dataset_from_args(args)
    if args.feature_set not in FEATURE_SETS:
        raise ContractError(
            f"unknown feature set {args.feature_set!r}; choose from {sorted(FEATURE_SETS)}"
        )
    ds = ds.select_features(FEATURE_SETS[args.feature_set])
    ds = impute_missing(ds, strategy=args.impute)
    model = train_classifier(ds, kind, hyper=_gather_hyper(args, kind), seed=seed, jobs=args.jobs)
    model.metadata["model_id"] = Path(args.out).stem
    model.metadata["feature_set"] = args.feature_set
    if kind == "random_forest":
        model.metadata["importance"] = [
            [name, value] for name, value in feature_importance(model, ds)
        ]
    save_model(model, args.out)
    print(f"trained {kind} on {ds.n_rows} rows -> {args.out} (seed {seed})")
    return 0


def _cmd_evaluate(args) -> int:
    from .evaluation import (
        cross_validate,
        evaluate_random_forest_runs,
        render_comparison_csv,
        render_comparison_json,
        render_comparison_table,
        render_eval_csv,
        render_eval_json,
        render_eval_table,
        run_baseline_comparison,
    )
    from .features import FEATURE_SETS

    seed = _resolve_seed(args)
    ds = _load_dataset_from_args(args)
    hyper = _gather_hyper(args, KIND_ALIASES[args.kind])

    if args.mode == "baselines":
        if args.validation_corpus:
            validation = _load_validation_corpus(args)
        elif args.validation_dataset:
            from .features import load_dataset

            validation = load_dataset(args.validation_dataset)
        else:
            raise ContractError(
                "baseline comparison needs --validation-corpus or --validation-dataset"
            )
        rf_hyper = {k: v for k, v in hyper.items() if k in ("n_trees", "bootstrap")}
        report = run_baseline_comparison(
            ds, validation, seed=seed, k=args.k, runs=args.runs,
            rf_hyper=rf_hyper or None, jobs=args.jobs,
        )
        renderer = {
            "csv": render_comparison_csv,
            "json": render_comparison_json,
            "table": render_comparison_table,
        }[args.format]
        _write_output(renderer(report), args.out)
        return 0

    if args.feature_set not in FEATURE_SETS:
        raise ContractError(
            f"unknown feature set {args.feature_set!r}; choose from {sorted(FEATURE_SETS)}"
        )
    ds = ds.select_features(FEATURE_SETS[args.feature_set])
    if args.mode == "rf-runs":
        report = evaluate_random_forest_runs(
            ds, hyper or None, runs=args.runs, seed=seed,
            feature_set=args.feature_set, jobs=args.jobs,
        )
    else:
        report = cross_validate(
            ds, KIND_ALIASES[args.kind], hyper or None, k=args.k, seed=seed,
            feature_set=args.feature_set, jobs=args.jobs,
        )
    renderer = {
        "csv": render_eval_csv,
        "json": render_eval_json,
        "table": render_eval_table,
    }[args.format]
    _write_output(renderer(report), args.out)
    return 0


def _load_validation_corpus(args):
    from .features import build_dataset

    corpus = load_corpus(args.validation_corpus)
    return build_dataset(
        corpus, lexicons=_lexicons_from_args(args), ele_window_days=args.ele_window_days,
        corpus_path=args.validation_corpus,
    )


def _read_predict_request(args) -> dict:
    if args.input == "-":
        text = sys.stdin.read()
    else:
        with open(args.input, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ContractError(f"request is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "comment_body" not in doc:
        raise ContractError('request must be an object with a "comment_body" field')
    return doc


def _cmd_predict(args) -> int:
    doc = _read_predict_request(args)

    if args.url:
        import requests

        try:
            resp = requests.post(args.url.rstrip("/") + "/predict", json=doc, timeout=30)
        except requests.RequestException as exc:
            raise TransportError(f"service unreachable: {exc}") from exc
        if resp.status_code >= 400:
            raise ContractError(f"service rejected the request: {resp.text}")
        payload = resp.json()
    else:
        if not args.model:
            raise ContractError("predict needs --model (local) or --url (service)")
        from fastapi import HTTPException

        from .learning import load_model
        from .service import PredictRequest, handle_predict

        model = load_model(args.model)
        model_id = model.metadata.get("model_id", "model")
        try:
            response = handle_predict(
                PredictRequest(**doc), model, model_id, _lexicons_from_args(args)
            )
        except HTTPException as exc:
            raise ContractError(exc.detail) from exc
        payload = response.model_dump()

    if args.format == "json":
        print(json.dumps(payload, indent=2, ensure_ascii=False))
        return 0

    print(f"label: {payload['label']}")
    print(f"score: {payload['score']:.4f}")
    print(f"model: {payload['model_id']}")
    print(f"{'feature':<12}  {'value':>10}  {'useful-med':>10}  {'non-useful-med':>14}  rank")
    for row in payload["features"]:
        rank = row.get("importance_rank")
        print(
            f"{row['name']:<12}  {row['value']:>10.4f}  {row['useful_median']:>10.4f}  "
            f"{row['non_useful_median']:>14.4f}  {rank if rank is not None else '-'}"
        )
    if payload["hints"]:
        print("hints:")
        for hint in payload["hints"]:
            print(f"  - {hint}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import ModelRegistry, create_app

    registry = ModelRegistry.from_files(args.model, lexicons=_lexicons_from_args(args))
    app = create_app(registry, cors=not args.no_cors)
    host, _, port = args.addr.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


if __name__ == "__main__":
    sys.exit(main())
