"""Ground-truth labeling of review comments by change-triggering.

A comment is useful when a strictly later commit of the same pull request
changes the commented file within the configured vicinity of the comment's
anchor line; otherwise it is non-useful. Changes in unrelated files or
beyond the vicinity never make a comment useful.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import (
    NON_USEFUL,
    USEFUL,
    InlineComment,
    PullRequest,
    ReviewCorpus,
    UsefulnessLabel,
    with_labels,
)
from .errors import ContractError


@dataclass(frozen=True)
class LabelPolicy:
    """``vicinity`` is the largest |changed line - anchor line| that counts
    as a trigger (inclusive). With ``require_same_file`` unset, changes in
    any file of a later commit are considered."""

    vicinity: int = 10
    require_same_file: bool = True

    def validate(self):
        if self.vicinity < 1:
            raise ContractError(f"vicinity must be >= 1, got {self.vicinity}")


DEFAULT_POLICY = LabelPolicy()


def label_comment(
    comment: InlineComment, pr: PullRequest, policy: LabelPolicy = DEFAULT_POLICY
) -> UsefulnessLabel:
    """Label one comment against its pull request's later commits.

    Commits are scanned in (timestamp, id) order; the earliest commit with a
    qualifying change wins, with smaller distance and then smaller line
    number breaking ties inside that commit. Renames are followed: once a
    diff renames the tracked file, later diffs match on the new path.
    """
    policy.validate()
    if all(c.id != comment.id for c in pr.comments):
        raise ContractError(
            f"comment {comment.id} does not belong to pull request {pr.id}"
        )
    current_path = comment.anchor_path
    for commit in sorted(pr.commits, key=lambda c: (c.timestamp, c.id)):
        renamed_to = None
        if commit.timestamp <= comment.timestamp:
            # Keep the rename chain current even before the comment's time.
            for diff in commit.file_diffs:
                if diff.change_kind == "renamed" and diff.old_path == current_path:
                    current_path = diff.path
            continue
        best = None
        for diff in commit.file_diffs:
            on_file = diff.path == current_path or (
                diff.change_kind == "renamed" and diff.old_path == current_path
            )
            if policy.require_same_file and not on_file:
                continue
            if diff.change_kind == "renamed" and diff.old_path == current_path:
                renamed_to = diff.path
            for hunk in diff.hunks:
                for line in hunk.changed_lines:
                    distance = abs(line - comment.anchor_line)
                    if distance <= policy.vicinity:
                        candidate = (distance, line)
                        if best is None or candidate < best:
                            best = candidate
        if best is not None:
            distance, line = best
            return UsefulnessLabel(
                value=USEFUL,
                trigger_commit=commit.id,
                trigger_line=line,
                distance=distance,
            )
        if renamed_to is not None:
            current_path = renamed_to
    return UsefulnessLabel(value=NON_USEFUL)


def label_corpus(
    corpus: ReviewCorpus, policy: LabelPolicy = DEFAULT_POLICY
) -> ReviewCorpus:
    """Return a new corpus with every comment labeled by the heuristic."""
    labels = {}
    for _system, pr, comment in corpus.iter_comments():
        labels[comment.id] = label_comment(comment, pr, policy)
    return with_labels(corpus, labels)
