"""Canonical in-memory and on-disk representation of code review history.

A corpus is a tree: systems hold pull requests, pull requests hold commits
and inline comments, commits hold file diffs, diffs hold hunks. All types
are frozen dataclasses; a loaded corpus is immutable and safe to share
across workers. Relabeling or editing produces a new corpus.

The on-disk format is corpus-JSON, documented with a normative example in
``docs/corpus-schema.md``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

from .errors import CorpusParseError, CorpusValidationError

SCHEMA_VERSION = 1

USEFUL = "useful"
NON_USEFUL = "non_useful"
LABEL_VALUES = (USEFUL, NON_USEFUL)

CHANGE_KINDS = ("added", "modified", "deleted", "renamed")

#: Largest comment-to-change distance a stored label may carry.
MAX_TRIGGER_DISTANCE = 10


@dataclass(frozen=True)
class DiffHunk:
    """One contiguous region of change.

    ``changed_lines`` holds post-image line numbers for added/modified lines
    and pre-image line numbers for deleted lines. ``line_texts`` maps
    post-image line numbers to their source text (only lines that exist in
    the post-image have text).
    """

    changed_lines: frozenset
    line_texts: Mapping[int, str] = field(default_factory=dict)


@dataclass(frozen=True)
class FileDiff:
    path: str
    change_kind: str
    hunks: tuple = ()
    old_path: Optional[str] = None
    post_image_imports: Optional[tuple] = None


@dataclass(frozen=True)
class Commit:
    id: str
    author: str
    timestamp: int
    file_diffs: tuple = ()


@dataclass(frozen=True)
class UsefulnessLabel:
    value: str
    trigger_commit: Optional[str] = None
    trigger_line: Optional[int] = None
    distance: Optional[int] = None


@dataclass(frozen=True)
class InlineComment:
    """A review remark anchored to a file and line of a submitted patch.

    ``anchor_line`` refers to the post-image of ``anchor_commit``.
    """

    id: str
    pr_id: str
    anchor_path: str
    anchor_line: int
    anchor_commit: str
    reviewer: str
    timestamp: int
    body: str
    label: Optional[UsefulnessLabel] = None


@dataclass(frozen=True)
class PullRequest:
    id: str
    submitter: str
    commits: tuple = ()
    comments: tuple = ()
    scaffolding: bool = False


@dataclass(frozen=True)
class SystemRecord:
    name: str
    pull_requests: tuple = ()


@dataclass(frozen=True)
class ReviewCorpus:
    systems: tuple = ()
    schema_version: int = SCHEMA_VERSION

    def iter_comments(self):
        """Yield (system, pull_request, comment) triples."""
        for system in self.systems:
            for pr in system.pull_requests:
                for comment in pr.comments:
                    yield system, pr, comment


def validate_corpus(corpus: ReviewCorpus) -> list:
    """Check every invariant; return one message per violation.

    Total function: never raises, an empty list means the corpus is valid.
    Each message names the offending entity id and the rule it breaks.
    """
    out = []
    if corpus.schema_version != SCHEMA_VERSION:
        out.append(
            f"corpus: schema_version {corpus.schema_version} is not {SCHEMA_VERSION}"
        )
    seen_systems = set()
    for system in corpus.systems:
        if system.name in seen_systems:
            out.append(f"system {system.name}: duplicate system name")
        seen_systems.add(system.name)
        _validate_system(system, out)
    return out


def _validate_system(system: SystemRecord, out: list) -> None:
    seen_prs = set()
    for pr in system.pull_requests:
        if pr.id in seen_prs:
            out.append(f"pull request {pr.id}: duplicate id in system {system.name}")
        seen_prs.add(pr.id)
        _validate_pr(pr, out)


def _validate_pr(pr: PullRequest, out: list) -> None:
    seen_commits = set()
    prev_key = None
    for commit in pr.commits:
        if commit.id in seen_commits:
            out.append(f"commit {commit.id}: duplicate id in pull request {pr.id}")
        seen_commits.add(commit.id)
        if commit.timestamp <= 0:
            out.append(f"commit {commit.id}: timestamp must be positive")
        key = (commit.timestamp, commit.id)
        if prev_key is not None and key <= prev_key:
            out.append(
                f"commit {commit.id}: commits of pull request {pr.id} not ordered "
                "by (timestamp, id)"
            )
        prev_key = key
        _validate_commit(commit, out)

    seen_comments = set()
    for comment in pr.comments:
        if comment.id in seen_comments:
            out.append(f"comment {comment.id}: duplicate id in pull request {pr.id}")
        seen_comments.add(comment.id)
        if comment.pr_id != pr.id:
            out.append(
                f"comment {comment.id}: pr_id {comment.pr_id!r} does not resolve to "
                f"its pull request {pr.id!r}"
            )
        if comment.anchor_line < 1:
            out.append(f"comment {comment.id}: anchor_line must be >= 1")
        if not comment.body.strip():
            out.append(f"comment {comment.id}: body is blank")
        if not comment.reviewer:
            out.append(f"comment {comment.id}: reviewer is empty")
        if comment.label is not None:
            _validate_label(comment, out)


def _validate_commit(commit: Commit, out: list) -> None:
    seen_paths = set()
    for diff in commit.file_diffs:
        if diff.path in seen_paths:
            out.append(
                f"commit {commit.id}: duplicate file path {diff.path!r} in one commit"
            )
        seen_paths.add(diff.path)
        if diff.change_kind not in CHANGE_KINDS:
            out.append(
                f"commit {commit.id}: diff {diff.path!r} has unknown change_kind "
                f"{diff.change_kind!r}"
            )
        if diff.change_kind == "renamed" and not diff.old_path:
            out.append(
                f"commit {commit.id}: renamed diff {diff.path!r} is missing old_path"
            )
        prev_max = None
        for index, hunk in enumerate(diff.hunks):
            for line in hunk.changed_lines:
                if line < 1:
                    out.append(
                        f"commit {commit.id}: diff {diff.path!r} hunk {index} has "
                        f"line number {line} < 1"
                    )
            for line in hunk.line_texts:
                if line not in hunk.changed_lines:
                    out.append(
                        f"commit {commit.id}: diff {diff.path!r} hunk {index} has "
                        f"text for line {line} outside changed_lines"
                    )
            if not hunk.changed_lines:
                continue
            lo, hi = min(hunk.changed_lines), max(hunk.changed_lines)
            if prev_max is not None and lo <= prev_max:
                out.append(
                    f"commit {commit.id}: diff {diff.path!r} hunk {index} overlaps "
                    "or precedes an earlier hunk"
                )
            prev_max = hi if prev_max is None else max(prev_max, hi)


def _validate_label(comment: InlineComment, out: list) -> None:
    label = comment.label
    if label.value not in LABEL_VALUES:
        out.append(f"comment {comment.id}: unknown label value {label.value!r}")
        return
    if label.value == USEFUL:
        if label.trigger_commit is None or label.trigger_line is None or label.distance is None:
            out.append(
                f"comment {comment.id}: useful label must carry trigger_commit, "
                "trigger_line and distance"
            )
        elif not (0 <= label.distance <= MAX_TRIGGER_DISTANCE):
            out.append(
                f"comment {comment.id}: label distance {label.distance} outside "
                f"[0, {MAX_TRIGGER_DISTANCE}]"
            )


# ---------------------------------------------------------------------------
# corpus-JSON


def load_corpus(path) -> ReviewCorpus:
    """Read and fully validate a corpus-JSON file.

    Raises CorpusParseError (with the byte offset for bad JSON) or
    CorpusValidationError naming the offending entity.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return loads_corpus(text)


def loads_corpus(text: str) -> ReviewCorpus:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorpusParseError(
            f"malformed corpus-JSON at byte offset {exc.pos}: {exc.msg}"
        ) from exc
    corpus = corpus_from_dict(doc)
    violations = validate_corpus(corpus)
    if violations:
        raise CorpusValidationError(violations)
    return corpus


def save_corpus(corpus: ReviewCorpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_corpus(corpus))


def serialize_corpus(corpus: ReviewCorpus) -> str:
    """Render corpus-JSON with a stable field order (byte-reproducible)."""
    return json.dumps(corpus_to_dict(corpus), indent=2, ensure_ascii=False) + "\n"


def corpus_to_dict(corpus: ReviewCorpus) -> dict:
    return {
        "schema_version": corpus.schema_version,
        "systems": [_system_to_dict(s) for s in corpus.systems],
    }


def _system_to_dict(system: SystemRecord) -> dict:
    return {
        "name": system.name,
        "pull_requests": [_pr_to_dict(pr) for pr in system.pull_requests],
    }


def _pr_to_dict(pr: PullRequest) -> dict:
    return {
        "id": pr.id,
        "submitter": pr.submitter,
        "scaffolding": pr.scaffolding,
        "commits": [_commit_to_dict(c) for c in pr.commits],
        "comments": [_comment_to_dict(c) for c in pr.comments],
    }


def _commit_to_dict(commit: Commit) -> dict:
    return {
        "id": commit.id,
        "author": commit.author,
        "timestamp": commit.timestamp,
        "file_diffs": [_diff_to_dict(d) for d in commit.file_diffs],
    }


def _diff_to_dict(diff: FileDiff) -> dict:
    out = {
        "path": diff.path,
        "change_kind": diff.change_kind,
        "hunks": [
            {
                "changed_lines": sorted(h.changed_lines),
                "line_texts": {str(k): v for k, v in sorted(h.line_texts.items())},
            }
            for h in diff.hunks
        ],
    }
    if diff.old_path is not None:
        out["old_path"] = diff.old_path
    if diff.post_image_imports is not None:
        out["post_image_imports"] = list(diff.post_image_imports)
    return out


def _comment_to_dict(comment: InlineComment) -> dict:
    out = {
        "id": comment.id,
        "pr_id": comment.pr_id,
        "anchor_path": comment.anchor_path,
        "anchor_line": comment.anchor_line,
        "anchor_commit": comment.anchor_commit,
        "reviewer": comment.reviewer,
        "timestamp": comment.timestamp,
        "body": comment.body,
    }
    if comment.label is not None:
        label = {"value": comment.label.value}
        if comment.label.value == USEFUL:
            label["trigger_commit"] = comment.label.trigger_commit
            label["trigger_line"] = comment.label.trigger_line
            label["distance"] = comment.label.distance
        out["label"] = label
    return out


def corpus_from_dict(doc) -> ReviewCorpus:
    """Build a corpus from parsed JSON; structural problems raise CorpusParseError."""
    if not isinstance(doc, dict):
        raise CorpusParseError("corpus document must be a JSON object")
    version = _require(doc, "schema_version", int, "corpus")
    systems = _require(doc, "systems", list, "corpus")
    return ReviewCorpus(
        systems=tuple(_system_from_dict(s, i) for i, s in enumerate(systems)),
        schema_version=version,
    )


def _system_from_dict(doc, index) -> SystemRecord:
    where = f"systems[{index}]"
    if not isinstance(doc, dict):
        raise CorpusParseError(f"{where} must be an object")
    name = _require(doc, "name", str, where)
    prs = _require(doc, "pull_requests", list, where)
    return SystemRecord(
        name=name,
        pull_requests=tuple(_pr_from_dict(p, f"{where}.pull_requests[{i}]") for i, p in enumerate(prs)),
    )


def _pr_from_dict(doc, where) -> PullRequest:
    if not isinstance(doc, dict):
        raise CorpusParseError(f"{where} must be an object")
    return PullRequest(
        id=_require(doc, "id", str, where),
        submitter=_require(doc, "submitter", str, where),
        scaffolding=bool(doc.get("scaffolding", False)),
        commits=tuple(
            _commit_from_dict(c, f"{where}.commits[{i}]")
            for i, c in enumerate(_require(doc, "commits", list, where))
        ),
        comments=tuple(
            _comment_from_dict(c, f"{where}.comments[{i}]")
            for i, c in enumerate(_require(doc, "comments", list, where))
        ),
    )


def _commit_from_dict(doc, where) -> Commit:
    if not isinstance(doc, dict):
        raise CorpusParseError(f"{where} must be an object")
    return Commit(
        id=_require(doc, "id", str, where),
        author=_require(doc, "author", str, where),
        timestamp=_require(doc, "timestamp", int, where),
        file_diffs=tuple(
            _diff_from_dict(d, f"{where}.file_diffs[{i}]")
            for i, d in enumerate(_require(doc, "file_diffs", list, where))
        ),
    )


def _diff_from_dict(doc, where) -> FileDiff:
    if not isinstance(doc, dict):
        raise CorpusParseError(f"{where} must be an object")
    hunks = []
    for i, h in enumerate(_require(doc, "hunks", list, where)):
        hwhere = f"{where}.hunks[{i}]"
        if not isinstance(h, dict):
            raise CorpusParseError(f"{hwhere} must be an object")
        lines = _require(h, "changed_lines", list, hwhere)
        texts = h.get("line_texts", {})
        if not isinstance(texts, dict):
            raise CorpusParseError(f"{hwhere}.line_texts must be an object")
        try:
            line_texts = {int(k): str(v) for k, v in texts.items()}
        except ValueError as exc:
            raise CorpusParseError(f"{hwhere}.line_texts has a non-integer key") from exc
        hunks.append(
            DiffHunk(changed_lines=frozenset(int(x) for x in lines), line_texts=line_texts)
        )
    imports = doc.get("post_image_imports")
    return FileDiff(
        path=_require(doc, "path", str, where),
        change_kind=_require(doc, "change_kind", str, where),
        hunks=tuple(hunks),
        old_path=doc.get("old_path"),
        post_image_imports=None if imports is None else tuple(imports),
    )


def _comment_from_dict(doc, where) -> InlineComment:
    if not isinstance(doc, dict):
        raise CorpusParseError(f"{where} must be an object")
    label = None
    if "label" in doc and doc["label"] is not None:
        ldoc = doc["label"]
        if not isinstance(ldoc, dict):
            raise CorpusParseError(f"{where}.label must be an object")
        label = UsefulnessLabel(
            value=_require(ldoc, "value", str, f"{where}.label"),
            trigger_commit=ldoc.get("trigger_commit"),
            trigger_line=ldoc.get("trigger_line"),
            distance=ldoc.get("distance"),
        )
    return InlineComment(
        id=_require(doc, "id", str, where),
        pr_id=_require(doc, "pr_id", str, where),
        anchor_path=_require(doc, "anchor_path", str, where),
        anchor_line=_require(doc, "anchor_line", int, where),
        anchor_commit=_require(doc, "anchor_commit", str, where),
        reviewer=_require(doc, "reviewer", str, where),
        timestamp=_require(doc, "timestamp", int, where),
        body=_require(doc, "body", str, where),
        label=label,
    )


def _require(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise CorpusParseError(f"{where} is missing required field {key!r}")
    value = doc[key]
    if kind is int and isinstance(value, bool):
        raise CorpusParseError(f"{where}.{key} must be {kind.__name__}")
    if not isinstance(value, kind):
        raise CorpusParseError(f"{where}.{key} must be {kind.__name__}")
    return value


def with_labels(corpus: ReviewCorpus, labels: Mapping) -> ReviewCorpus:
    """Return a new corpus with ``labels`` ({comment id: UsefulnessLabel}) applied."""
    systems = []
    for system in corpus.systems:
        prs = []
        for pr in system.pull_requests:
            comments = tuple(
                replace(c, label=labels.get(c.id, c.label)) for c in pr.comments
            )
            prs.append(replace(pr, comments=comments))
        systems.append(replace(system, pull_requests=tuple(prs)))
    return replace(corpus, systems=tuple(systems))
