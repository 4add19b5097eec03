"""Produce corpus-JSON from a forge REST API, raw unified diffs, or synthetically.

The forge client speaks the generic GitHub-style REST shape (list pull
requests, list commits of a pull request, list inline review comments of a
pull request). Every HTTP exchange goes through a Transport so that real
traffic can be recorded to a tape file and replayed in tests.
"""

from __future__ import annotations

import json
import os
import random
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

from .corpus import (
    Commit,
    DiffHunk,
    FileDiff,
    InlineComment,
    PullRequest,
    ReviewCorpus,
    SystemRecord,
    validate_corpus,
)
from .errors import (
    AuthError,
    ConfigError,
    ContractError,
    CorpusValidationError,
    DiffParseError,
    RateLimitError,
    TransportError,
)
from .experience import extract_imports

TOKEN_ENV_VAR = "REVHELPER_TOKEN"

# Endpoint path templates, overridable per deployment.
DEFAULT_PATHS = {
    "pulls": "/repos/{repo}/pulls",
    "pull_commits": "/repos/{repo}/pulls/{number}/commits",
    "pull_comments": "/repos/{repo}/pulls/{number}/comments",
}


@dataclass(frozen=True)
class ForgeConfig:
    base_url: str
    repo: str
    auth_token: str = ""
    page_size: int = 50
    max_prs: int = 100
    paths: dict = field(default_factory=lambda: dict(DEFAULT_PATHS))

    def validate(self):
        if not (1 <= self.page_size <= 100):
            raise ConfigError(f"page_size must be in [1, 100], got {self.page_size}")
        if self.max_prs < 1:
            raise ConfigError(f"max_prs must be >= 1, got {self.max_prs}")
        if "/" not in self.repo:
            raise ConfigError(f"repo must look like owner/name, got {self.repo!r}")


@dataclass
class TransportResponse:
    status: int
    headers: dict
    body: object


class RequestsTransport:
    """Live HTTP transport backed by requests."""

    def __init__(self, session=None):
        import requests

        self._requests = requests
        self._session = session or requests.Session()

    def get(self, url, params, headers) -> TransportResponse:
        try:
            resp = self._session.get(url, params=params, headers=headers, timeout=30)
        except self._requests.RequestException as exc:
            raise TransportError(f"request to {url} failed: {exc}") from exc
        try:
            body = resp.json()
        except ValueError:
            body = resp.text
        return TransportResponse(
            status=resp.status_code,
            headers={k.lower(): v for k, v in resp.headers.items()},
            body=body,
        )


class TapeTransport:
    """Replays exchanges from a tape file; never touches the network."""

    def __init__(self, path):
        with open(path, "r", encoding="utf-8") as fh:
            self._records = json.load(fh)
        self._consumed = [False] * len(self._records)

    def get(self, url, params, headers) -> TransportResponse:
        wanted = (url, _normalize_params(params))
        for i, record in enumerate(self._records):
            if self._consumed[i]:
                continue
            req = record["request"]
            if (req["url"], _normalize_params(req.get("params", {}))) == wanted:
                self._consumed[i] = True
                resp = record["response"]
                return TransportResponse(
                    status=resp["status"],
                    headers={k.lower(): v for k, v in resp.get("headers", {}).items()},
                    body=resp.get("body"),
                )
        raise TransportError(f"no tape record for GET {url} {params}")


class RecordingTransport:
    """Wraps a live transport and records every exchange for later replay."""

    def __init__(self, inner, path):
        self._inner = inner
        self._path = path
        self._records = []

    def get(self, url, params, headers) -> TransportResponse:
        resp = self._inner.get(url, params, headers)
        self._records.append(
            {
                "request": {"method": "GET", "url": url, "params": dict(params)},
                "response": {
                    "status": resp.status,
                    "headers": dict(resp.headers),
                    "body": resp.body,
                },
            }
        )
        return resp

    def save(self):
        with open(self._path, "w", encoding="utf-8") as fh:
            json.dump(self._records, fh, indent=2, ensure_ascii=False)
            fh.write("\n")


def _normalize_params(params) -> tuple:
    return tuple(sorted((str(k), str(v)) for k, v in (params or {}).items()))


def _check_response(resp: TransportResponse, url) -> object:
    if resp.status in (401, 403):
        if resp.status == 403 and resp.headers.get("x-ratelimit-remaining") == "0":
            raise RateLimitError(
                f"rate limited on {url}",
                retry_after=_retry_after_hint(resp.headers),
            )
        raise AuthError(f"HTTP {resp.status} from {url}: check the access token")
    if resp.status == 429:
        raise RateLimitError(
            f"rate limited on {url}", retry_after=_retry_after_hint(resp.headers)
        )
    if resp.status >= 400:
        raise TransportError(f"HTTP {resp.status} from {url}")
    return resp.body


def _retry_after_hint(headers) -> Optional[float]:
    value = headers.get("retry-after")
    if value is not None:
        try:
            return float(value)
        except ValueError:
            return None
    return None


def _parse_forge_timestamp(value: str) -> int:
    stamp = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return int(stamp.timestamp())


def fetch_remote_reviews(config: ForgeConfig, transport=None) -> ReviewCorpus:
    """Fetch the most recent pull requests with commits, diffs, and inline
    review comments; pull-request-level comments are excluded."""
    config.validate()
    transport = transport or RequestsTransport()
    token = config.auth_token or os.environ.get(TOKEN_ENV_VAR, "")
    headers = {"Accept": "application/vnd.github+json"}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    base = config.base_url.rstrip("/")

    raw_prs = []
    page = 1
    while len(raw_prs) < config.max_prs:
        url = base + config.paths["pulls"].format(repo=config.repo)
        body = _check_response(
            transport.get(
                url,
                {
                    "state": "all",
                    "sort": "created",
                    "direction": "desc",
                    "per_page": str(config.page_size),
                    "page": str(page),
                },
                headers,
            ),
            url,
        )
        if not body:
            break
        raw_prs.extend(body)
        if len(body) < config.page_size:
            break
        page += 1

    raw_prs.sort(key=lambda p: (-_parse_forge_timestamp(p["created_at"]), str(p["number"])))
    raw_prs = raw_prs[: config.max_prs]

    prs = []
    for raw in raw_prs:
        number = raw["number"]
        commits_url = base + config.paths["pull_commits"].format(
            repo=config.repo, number=number
        )
        comments_url = base + config.paths["pull_comments"].format(
            repo=config.repo, number=number
        )
        raw_commits = _check_response(
            transport.get(commits_url, {"per_page": "100"}, headers), commits_url
        )
        raw_comments = _check_response(
            transport.get(comments_url, {"per_page": "100"}, headers), comments_url
        )
        prs.append(_pr_from_forge(raw, raw_commits, raw_comments))

    corpus = ReviewCorpus(systems=(SystemRecord(name=config.repo, pull_requests=tuple(prs)),))
    violations = validate_corpus(corpus)
    if violations:
        raise CorpusValidationError(violations)
    return corpus


def _pr_from_forge(raw, raw_commits, raw_comments) -> PullRequest:
    pr_id = str(raw["number"])
    title = (raw.get("title") or "").lower()
    labels = {str(l.get("name", "")).lower() for l in raw.get("labels", [])}
    scaffolding = "scaffolding" in labels or "[scaffolding]" in title

    commits = []
    for rc in raw_commits:
        author = (rc.get("author") or {}).get("login") or rc["commit"]["author"].get(
            "name", "unknown"
        )
        timestamp = _parse_forge_timestamp(rc["commit"]["author"]["date"])
        diffs = []
        for entry in rc.get("files", []):
            diffs.append(_diff_from_forge_file(entry))
        commits.append(
            Commit(
                id=rc["sha"],
                author=author,
                timestamp=timestamp,
                file_diffs=tuple(diffs),
            )
        )
    commits.sort(key=lambda c: (c.timestamp, c.id))

    comments = []
    for rc in raw_comments:
        path = rc.get("path")
        line = rc.get("line") if rc.get("line") is not None else rc.get("original_line")
        if not path or line is None:
            continue  # pull-request-level or detached comment
        comments.append(
            InlineComment(
                id=str(rc["id"]),
                pr_id=pr_id,
                anchor_path=path,
                anchor_line=int(line),
                anchor_commit=rc.get("commit_id", ""),
                reviewer=(rc.get("user") or {}).get("login", "unknown"),
                timestamp=_parse_forge_timestamp(rc["created_at"]),
                body=rc.get("body", ""),
            )
        )
    comments.sort(key=lambda c: (c.timestamp, c.id))

    return PullRequest(
        id=pr_id,
        submitter=(raw.get("user") or {}).get("login", "unknown"),
        commits=tuple(commits),
        comments=tuple(comments),
        scaffolding=scaffolding,
    )


_FORGE_STATUS_TO_KIND = {
    "added": "added",
    "modified": "modified",
    "removed": "deleted",
    "renamed": "renamed",
    "changed": "modified",
}


def _diff_from_forge_file(entry) -> FileDiff:
    path = entry["filename"]
    kind = _FORGE_STATUS_TO_KIND.get(entry.get("status", "modified"), "modified")
    patch = entry.get("patch") or ""
    hunks = parse_patch_hunks(patch) if patch else ()
    imports = None
    if path.endswith(".py") and hunks:
        added_lines = [text for h in hunks for text in h.line_texts.values()]
        imports = tuple(sorted(extract_imports(added_lines, path))) or None
    return FileDiff(
        path=path,
        change_kind=kind,
        hunks=hunks,
        old_path=entry.get("previous_filename") if kind == "renamed" else None,
        post_image_imports=imports,
    )


# ---------------------------------------------------------------------------
# unified diff parsing

_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


def parse_patch_hunks(patch: str) -> tuple:
    """Hunks of a single-file patch (hunk headers only, no ---/+++ lines)."""
    diffs = parse_unified_diff(patch)
    if not diffs:
        return ()
    return diffs[0].hunks


def parse_unified_diff(text: str):
    """Parse a (possibly multi-file) unified diff into FileDiff records.

    Added and modified lines are keyed to post-image numbering, deletions to
    pre-image numbering; text is kept for '+' lines only. A bare hunk
    sequence without file headers is treated as one anonymous file.
    """
    lines = text.splitlines()
    diffs = []
    state = None  # per-file accumulator
    i = 0
    n = len(lines)

    def flush():
        nonlocal state
        if state is not None and (state["hunks"] or state["seen_header"]):
            diffs.append(_finalize_file(state))
        state = None

    while i < n:
        line = lines[i]
        if line.startswith("diff --git"):
            flush()
            state = _new_file_state()
            state["seen_header"] = True
            i += 1
        elif line.startswith("--- "):
            if state is None or state["old"] is not None:
                flush()
                state = _new_file_state()
            state["seen_header"] = True
            state["old"] = line[4:].split("\t")[0].strip()
            i += 1
        elif line.startswith("+++ "):
            if state is None:
                state = _new_file_state()
            state["seen_header"] = True
            state["new"] = line[4:].split("\t")[0].strip()
            i += 1
        elif line.startswith("rename from "):
            if state is None:
                state = _new_file_state()
            state["rename_from"] = line[len("rename from ") :].strip()
            i += 1
        elif line.startswith("rename to "):
            if state is None:
                state = _new_file_state()
            state["rename_to"] = line[len("rename to ") :].strip()
            i += 1
        elif line.startswith("@@"):
            if state is None:
                state = _new_file_state()
            i = _parse_hunk(lines, i, state)
        else:
            # extended git headers, index lines, or prologue text
            i += 1
    flush()
    return diffs


def _new_file_state() -> dict:
    return {
        "old": None,
        "new": None,
        "rename_from": None,
        "rename_to": None,
        "hunks": [],
        "seen_header": False,
    }


def _parse_hunk(lines, i, state) -> int:
    header = lines[i]
    match = _HUNK_RE.match(header)
    if not match:
        raise DiffParseError(f"malformed hunk header {header!r}", line_number=i + 1)
    old_start = int(match.group(1))
    old_count = int(match.group(2)) if match.group(2) is not None else 1
    new_start = int(match.group(3))
    new_count = int(match.group(4)) if match.group(4) is not None else 1

    changed = set()
    texts = {}
    old_ln, new_ln = old_start, new_start
    remaining_old, remaining_new = old_count, new_count
    i += 1
    while (remaining_old > 0 or remaining_new > 0) and i < len(lines):
        body = lines[i]
        if body.startswith("\\"):
            i += 1
            continue
        if body.startswith("-"):
            changed.add(old_ln)
            old_ln += 1
            remaining_old -= 1
        elif body.startswith("+"):
            changed.add(new_ln)
            texts[new_ln] = body[1:]
            new_ln += 1
            remaining_new -= 1
        elif body.startswith(" ") or body == "":
            old_ln += 1
            new_ln += 1
            remaining_old -= 1
            remaining_new -= 1
        else:
            raise DiffParseError(
                f"unexpected line inside hunk: {body!r}", line_number=i + 1
            )
        i += 1
    if remaining_old > 0 or remaining_new > 0:
        raise DiffParseError("truncated hunk body", line_number=i)
    state["hunks"].append(DiffHunk(changed_lines=frozenset(changed), line_texts=texts))
    return i


def _strip_diff_prefix(path: Optional[str]) -> Optional[str]:
    if path is None:
        return None
    if path == "/dev/null":
        return path
    for prefix in ("a/", "b/"):
        if path.startswith(prefix):
            return path[len(prefix) :]
    return path


def _finalize_file(state) -> FileDiff:
    old = _strip_diff_prefix(state["old"])
    new = _strip_diff_prefix(state["new"])
    rename_from = state["rename_from"]
    rename_to = state["rename_to"]

    if rename_from and rename_to:
        kind = "renamed"
        path, old_path = rename_to, rename_from
    elif old == "/dev/null":
        kind, path, old_path = "added", new or "", None
    elif new == "/dev/null":
        kind, path, old_path = "deleted", old or "", None
    elif old is not None and new is not None and old != new:
        kind, path, old_path = "renamed", new, old
    else:
        kind, path, old_path = "modified", new or old or "", None
    return FileDiff(
        path=path,
        change_kind=kind,
        hunks=tuple(state["hunks"]),
        old_path=old_path,
    )


# ---------------------------------------------------------------------------
# synthetic corpora

_PROSE_WORDS = (
    "consider", "rename", "variable", "loop", "branch", "logic", "handler",
    "cache", "buffer", "helper", "cleanup", "module", "wrapper", "timeout",
    "retry", "queue", "batch", "result", "index", "guard", "input", "output",
    "parse", "merge", "filter", "update", "check", "value", "state", "config",
    "token", "limit", "error", "simplify", "extract", "inline", "request",
    "response", "session", "client", "server", "schema", "record", "field",
    "column", "mapping", "lookup", "stream", "worker", "signal", "thread",
    "format", "encode", "decode", "verify", "compare", "compute", "measure",
)

_STOP_FILLER = ("the", "a", "of", "to", "in", "for", "this", "is", "and", "we")

_IDENTIFIERS = (
    "parse_config", "load_state", "merge_records", "fetch_batch",
    "update_index", "check_limits", "encode_token", "retry_request",
    "flush_cache", "split_chunks", "validate_input", "format_output",
    "read_stream", "write_buffer", "scan_queue", "map_fields",
    "lookup_entry", "build_schema", "trim_path", "hash_value",
    "emit_signal", "spawn_worker", "close_session", "open_channel",
)

_IMPORT_POOL = (
    "os", "sys", "json", "math", "time", "random", "logging", "collections",
    "itertools", "functools", "pathlib", "re", "socket", "hashlib",
    "datetime", "subprocess",
)

_BASE_FILE_LINES = 30


@dataclass(frozen=True)
class SynthSpec:
    n_prs: int
    comments_per_pr: tuple = (2, 5)
    useful_fraction: float = 0.5
    signal_strength: float = 1.0
    seed: int = 0

    def validate(self):
        if self.n_prs < 0:
            raise ContractError(f"n_prs must be >= 0, got {self.n_prs}")
        lo, hi = self.comments_per_pr
        if lo < 0 or hi < lo:
            raise ContractError(f"bad comments_per_pr range {self.comments_per_pr}")
        if not (0.0 <= self.useful_fraction <= 1.0):
            raise ContractError(
                f"useful_fraction must be in [0, 1], got {self.useful_fraction}"
            )
        if self.signal_strength < 0:
            raise ContractError(
                f"signal_strength must be >= 0, got {self.signal_strength}"
            )


class _Clock:
    def __init__(self, start=1_600_000_000):
        self.now = start

    def tick(self, step=60) -> int:
        self.now += step
        return self.now


def _clip(x, lo=0.0, hi=1.0):
    return max(lo, min(hi, x))


def _source_line(rng: random.Random) -> str:
    ident = rng.choice(_IDENTIFIERS)
    callee = rng.choice(_IDENTIFIERS)
    w1, w2 = rng.choice(_PROSE_WORDS), rng.choice(_PROSE_WORDS)
    return f"{w1} = {ident}({callee}, {w2})"


def _comment_body(rng, useful, strength, target_line, lex_rate=0.4) -> str:
    """Compose a comment body. All label-conditioned knobs collapse to the
    same distribution at strength zero."""
    words = []
    for _ in range(rng.randint(5, 10)):
        if rng.random() < lex_rate:
            words.append(rng.choice(_STOP_FILLER))
        else:
            words.append(rng.choice(_PROSE_WORDS))

    overlap = round(min(5.0, 2.5 * strength)) if useful else 0
    if overlap:
        line_tokens = [t for t in re.findall(r"[A-Za-z_][A-Za-z0-9_]*", target_line)]
        rng.shuffle(line_tokens)
        words.extend(line_tokens[:overlap])

    p_code = _clip(0.3 + 0.3 * strength) if useful else _clip(0.3 - 0.14 * strength, 0.02)
    if rng.random() < p_code:
        words.append(rng.choice(_IDENTIFIERS))

    terminal = "?" if rng.random() < 0.3 else "."
    return " ".join(words) + terminal


def generate_synthetic_corpus(spec: SynthSpec) -> ReviewCorpus:
    """Deterministic synthetic review history with planted ground truth.

    Every useful comment gets a strictly later commit changing its file
    within ten lines of the anchor; non-useful comments get either no
    follow-up on their file or a change at least twenty lines away, so
    the labeling heuristic reproduces the planted labels exactly. With
    positive signal strength, useful comments share more vocabulary with
    the changed code, embed more code elements, and are written by
    reviewers with longer authoring histories; at strength zero every
    feature is label-independent.
    """
    spec.validate()
    rng = random.Random(spec.seed)
    strength = spec.signal_strength
    clock = _Clock()

    counts = [rng.randint(*spec.comments_per_pr) for _ in range(spec.n_prs)]
    total = sum(counts)
    n_useful = round(total * spec.useful_fraction)
    flags = [True] * n_useful + [False] * (total - n_useful)
    rng.shuffle(flags)

    submitters = [f"dev_{c}" for c in "abcdef"]
    experienced = [f"rev_exp_{i}" for i in range(6)]
    novices = [f"rev_new_{i}" for i in range(6)]

    prs = [_history_pr(rng, clock, i, experienced, total) for i in range(3)]

    flag_index = 0
    file_index = 0
    for p in range(spec.n_prs):
        n_comments = counts[p]
        paths = [f"src/mod_{file_index + j}.py" for j in range(n_comments)]
        file_index += n_comments

        base_diffs = []
        file_lines = {}
        for path in paths:
            texts = {ln: _source_line(rng) for ln in range(1, _BASE_FILE_LINES + 1)}
            file_lines[path] = texts
            base_diffs.append(
                FileDiff(
                    path=path,
                    change_kind="added",
                    hunks=(
                        DiffHunk(
                            changed_lines=frozenset(texts),
                            line_texts=texts,
                        ),
                    ),
                    post_image_imports=tuple(sorted(rng.sample(_IMPORT_POOL, 3))),
                )
            )
        base_commit = Commit(
            id=f"c{p}_base",
            author=rng.choice(submitters),
            timestamp=clock.tick(),
            file_diffs=tuple(base_diffs),
        )

        comments = []
        planted = []
        for j, path in enumerate(paths):
            useful = flags[flag_index]
            flag_index += 1
            anchor_line = rng.randint(11, _BASE_FILE_LINES - 5)
            p_exp = (
                _clip(0.5 + 0.25 * strength) if useful else _clip(0.5 - 0.25 * strength)
            )
            reviewer = (
                rng.choice(experienced)
                if rng.random() < p_exp
                else rng.choice(novices)
            )
            body = _comment_body(
                rng, useful, strength, file_lines[path][anchor_line]
            )
            comments.append(
                InlineComment(
                    id=f"m{p}_{j}",
                    pr_id=f"pr_{p}",
                    anchor_path=path,
                    anchor_line=anchor_line,
                    anchor_commit=base_commit.id,
                    reviewer=reviewer,
                    timestamp=clock.tick(),
                    body=body,
                )
            )
            planted.append((path, anchor_line, useful))

        followups = []
        for j, (path, anchor_line, useful) in enumerate(planted):
            if useful:
                delta = rng.randint(-min(10, anchor_line - 1), 10)
                target = anchor_line + delta
            elif rng.random() < 0.5:
                continue
            else:
                target = anchor_line + rng.randint(21, 35)
            followups.append(
                Commit(
                    id=f"c{p}_follow_{j}",
                    author=rng.choice(submitters),
                    timestamp=clock.tick(),
                    file_diffs=(
                        FileDiff(
                            path=path,
                            change_kind="modified",
                            hunks=(
                                DiffHunk(
                                    changed_lines=frozenset({target}),
                                    line_texts={target: _source_line(rng)},
                                ),
                            ),
                        ),
                    ),
                )
            )

        prs.append(
            PullRequest(
                id=f"pr_{p}",
                submitter=base_commit.author,
                commits=(base_commit, *followups),
                comments=tuple(comments),
            )
        )

    return ReviewCorpus(systems=(SystemRecord(name="synth", pull_requests=tuple(prs)),))


def _history_pr(rng, clock, index, experienced, total_comments) -> PullRequest:
    """Early pull request that gives the experienced reviewer pool an
    authoring history (system-level commits, file touches, imports)."""
    per_reviewer = max(10, total_comments // 20)
    commits = []
    serial = 0
    for reviewer in experienced:
        for _ in range(per_reviewer // 3 + (1 if index < per_reviewer % 3 else 0)):
            lib_path = f"lib/util_{serial % 40}.py"
            diffs = [
                FileDiff(
                    path=lib_path,
                    change_kind="modified",
                    hunks=(
                        DiffHunk(
                            changed_lines=frozenset({1}),
                            line_texts={1: _source_line(rng)},
                        ),
                    ),
                    post_image_imports=tuple(sorted(rng.sample(_IMPORT_POOL, 4))),
                )
            ]
            if total_comments:
                mod_path = f"src/mod_{rng.randrange(total_comments)}.py"
                if mod_path != lib_path:
                    diffs.append(
                        FileDiff(
                            path=mod_path,
                            change_kind="modified",
                            hunks=(
                                DiffHunk(
                                    changed_lines=frozenset({1}),
                                    line_texts={1: _source_line(rng)},
                                ),
                            ),
                            post_image_imports=tuple(
                                sorted(rng.sample(_IMPORT_POOL, 3))
                            ),
                        )
                    )
            commits.append(
                Commit(
                    id=f"h{index}_{serial}",
                    author=reviewer,
                    timestamp=clock.tick(),
                    file_diffs=tuple(diffs),
                )
            )
            serial += 1
    return PullRequest(
        id=f"hist_{index}",
        submitter=experienced[0],
        commits=tuple(commits),
        comments=(),
    )
