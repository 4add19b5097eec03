"""Reviewer-experience features mined from version-control and review history.

Histories are derived from a corpus: a developer authored a commit when they
are its recorded author, and reviewed a commit when they wrote at least one
inline comment in that commit's pull request at or before the commit. An
optional sidecar JSON can inject history from before the corpus window.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Optional

from .corpus import SystemRecord
from .errors import ContractError


@dataclass(frozen=True)
class AuthoredCommit:
    id: str
    timestamp: int
    paths: tuple
    imports: Mapping[str, tuple]  # path -> top-level imported names


@dataclass(frozen=True)
class ReviewedCommit:
    id: str
    timestamp: int
    paths: tuple


@dataclass(frozen=True)
class ReviewedPullRequest:
    id: str
    timestamp: int


@dataclass(frozen=True)
class DeveloperHistory:
    developer: str
    authored_commits: tuple = ()
    reviewed_commits: tuple = ()
    reviewed_prs: tuple = ()


def empty_history(developer: str) -> DeveloperHistory:
    return DeveloperHistory(developer=developer)


# ---------------------------------------------------------------------------
# import extraction (pluggable per file extension)


def _python_imports(lines) -> set:
    out = set()
    for line in lines:
        stripped = line.strip()
        if stripped.startswith("import "):
            for piece in stripped[len("import ") :].split(","):
                name = piece.strip().split(" as ")[0].split(".")[0].strip()
                if name.isidentifier():
                    out.add(name)
        elif stripped.startswith("from "):
            head = stripped[len("from ") :].split(" import ")[0].strip()
            name = head.split(".")[0]
            if name.isidentifier():
                out.add(name)
    return out


_IMPORT_EXTRACTORS = {".py": _python_imports}


def register_import_extractor(suffix: str, fn) -> None:
    _IMPORT_EXTRACTORS[suffix] = fn


def extract_imports(lines, path: str) -> set:
    """Top-level imported package names found in source lines, selected by
    file extension; unknown extensions yield an empty set."""
    for suffix, fn in _IMPORT_EXTRACTORS.items():
        if path.endswith(suffix):
            return fn(lines)
    return set()


# ---------------------------------------------------------------------------
# history construction


def build_histories(system: SystemRecord, sidecar: Optional[dict] = None) -> dict:
    """Per-developer histories for one system, keyed by developer id."""
    authored = defaultdict(list)
    reviewed_commits = defaultdict(list)
    reviewed_prs = defaultdict(list)

    for pr in system.pull_requests:
        first_comment = {}
        for comment in pr.comments:
            t = first_comment.get(comment.reviewer)
            if t is None or comment.timestamp < t:
                first_comment[comment.reviewer] = comment.timestamp
        for dev, t in first_comment.items():
            reviewed_prs[dev].append(ReviewedPullRequest(id=pr.id, timestamp=t))

        for commit in pr.commits:
            paths = tuple(d.path for d in commit.file_diffs)
            imports = {}
            for diff in commit.file_diffs:
                if diff.post_image_imports is not None:
                    imports[diff.path] = tuple(diff.post_image_imports)
                else:
                    added = [t for h in diff.hunks for t in h.line_texts.values()]
                    names = extract_imports(added, diff.path)
                    if names:
                        imports[diff.path] = tuple(sorted(names))
            authored[commit.author].append(
                AuthoredCommit(
                    id=commit.id,
                    timestamp=commit.timestamp,
                    paths=paths,
                    imports=imports,
                )
            )
            for dev, t in first_comment.items():
                if t <= commit.timestamp:
                    reviewed_commits[dev].append(
                        ReviewedCommit(id=commit.id, timestamp=commit.timestamp, paths=paths)
                    )

    developers = set(authored) | set(reviewed_commits) | set(reviewed_prs)
    if sidecar:
        developers |= set(sidecar)
    histories = {}
    for dev in developers:
        extra = (sidecar or {}).get(dev, {})
        histories[dev] = DeveloperHistory(
            developer=dev,
            authored_commits=_dedupe(
                list(extra.get("authored_commits", [])) + authored.get(dev, [])
            ),
            reviewed_commits=_dedupe(
                list(extra.get("reviewed_commits", [])) + reviewed_commits.get(dev, [])
            ),
            reviewed_prs=_dedupe(
                list(extra.get("reviewed_prs", [])) + reviewed_prs.get(dev, [])
            ),
        )
    return histories


def _dedupe(records) -> tuple:
    seen = set()
    out = []
    for record in sorted(records, key=lambda r: (r.timestamp, r.id)):
        if record.id in seen:
            continue
        seen.add(record.id)
        out.append(record)
    return tuple(out)


def load_history_sidecar(path) -> dict:
    """Pre-corpus history: {developer: {authored_commits: [...], ...}}."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    out = {}
    for dev, record in doc.items():
        out[dev] = {
            "authored_commits": [
                AuthoredCommit(
                    id=e["id"],
                    timestamp=e["timestamp"],
                    paths=tuple(e.get("paths", [])),
                    imports={k: tuple(v) for k, v in e.get("imports", {}).items()},
                )
                for e in record.get("authored_commits", [])
            ],
            "reviewed_commits": [
                ReviewedCommit(
                    id=e["id"], timestamp=e["timestamp"], paths=tuple(e.get("paths", []))
                )
                for e in record.get("reviewed_commits", [])
            ],
            "reviewed_prs": [
                ReviewedPullRequest(id=e["id"], timestamp=e["timestamp"])
                for e in record.get("reviewed_prs", [])
            ],
        }
    return out


# ---------------------------------------------------------------------------
# the three experience variables


def authorship_counts(reviewer: str, path: str, at: int, hist: DeveloperHistory):
    """(commits on the file, commits anywhere, changed-the-file-before flag),
    counting authored commits strictly before ``at``."""
    if hist.developer != reviewer:
        raise ContractError(
            f"history belongs to {hist.developer!r}, not reviewer {reviewer!r}"
        )
    file_commits = 0
    system_commits = 0
    for commit in hist.authored_commits:
        if commit.timestamp >= at:
            continue
        system_commits += 1
        if path in commit.paths:
            file_commits += 1
    return file_commits, system_commits, 1 if file_commits >= 1 else 0


def reviewership_counts(reviewer: str, path: str, at: int, hist: DeveloperHistory):
    """(commits reviewed on the file, commits reviewed anywhere, pull requests
    reviewed, reviewed-the-file-before flag), strictly before ``at``."""
    if hist.developer != reviewer:
        raise ContractError(
            f"history belongs to {hist.developer!r}, not reviewer {reviewer!r}"
        )
    file_reviewed = 0
    commits_reviewed = 0
    for commit in hist.reviewed_commits:
        if commit.timestamp >= at:
            continue
        commits_reviewed += 1
        if path in commit.paths:
            file_reviewed += 1
    prs_reviewed = sum(1 for pr in hist.reviewed_prs if pr.timestamp < at)
    return file_reviewed, commits_reviewed, prs_reviewed, 1 if file_reviewed >= 1 else 0


def external_library_experience(
    reviewer: str,
    target_imports,
    at: int,
    hist: DeveloperHistory,
    window_days: Optional[int] = None,
) -> Optional[float]:
    """Fraction of the target file's imports the reviewer has touched in
    files they authored before ``at``; None when the target imports nothing."""
    if hist.developer != reviewer:
        raise ContractError(
            f"history belongs to {hist.developer!r}, not reviewer {reviewer!r}"
        )
    targets = set(target_imports)
    if not targets:
        return None
    cutoff = None if window_days is None else at - window_days * 86400
    known = set()
    for commit in hist.authored_commits:
        if commit.timestamp >= at:
            continue
        if cutoff is not None and commit.timestamp < cutoff:
            continue
        for names in commit.imports.values():
            known.update(names)
    return len(targets & known) / len(targets)
