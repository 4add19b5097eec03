import json

import pytest

from revhelper.corpus import (
    Commit,
    DiffHunk,
    FileDiff,
    InlineComment,
    PullRequest,
    ReviewCorpus,
    SystemRecord,
    UsefulnessLabel,
    corpus_from_dict,
    load_corpus,
    loads_corpus,
    serialize_corpus,
    validate_corpus,
)
from revhelper.errors import CorpusParseError, CorpusValidationError


def test_minicorpus_counts(minicorpus):
    assert len(minicorpus.systems) == 1
    prs = minicorpus.systems[0].pull_requests
    assert len(prs) == 2
    assert sum(len(pr.comments) for pr in prs) == 6


def test_empty_systems_is_valid():
    corpus = loads_corpus('{"schema_version": 1, "systems": []}')
    assert corpus.systems == ()
    assert validate_corpus(corpus) == []


def test_round_trip_field_by_field(minicorpus):
    text = serialize_corpus(minicorpus)
    assert loads_corpus(text) == minicorpus


def test_load_rejects_what_validate_flags(minicorpus):
    assert validate_corpus(minicorpus) == []


def test_malformed_json_reports_byte_offset(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"schema_version": 1, "systems": [}')
    with pytest.raises(CorpusParseError, match="byte offset 35"):
        load_corpus(path)


def test_missing_field_is_parse_error():
    with pytest.raises(CorpusParseError, match="missing required field 'systems'"):
        loads_corpus('{"schema_version": 1}')


def _pr(commits=(), comments=(), pr_id="p", submitter="s"):
    return PullRequest(id=pr_id, submitter=submitter, commits=tuple(commits), comments=tuple(comments))


def _corpus(prs):
    return ReviewCorpus(systems=(SystemRecord(name="sys", pull_requests=tuple(prs)),))


def _comment(**kw):
    base = dict(
        id="m1",
        pr_id="p",
        anchor_path="a.py",
        anchor_line=1,
        anchor_commit="c1",
        reviewer="r",
        timestamp=10,
        body="text",
    )
    base.update(kw)
    return InlineComment(**base)


def test_comment_with_unresolved_pr_id_names_comment():
    corpus = _corpus([_pr(comments=[_comment(pr_id="other")])])
    violations = validate_corpus(corpus)
    assert len(violations) == 1
    assert "m1" in violations[0] and "other" in violations[0]


def test_zero_timestamp_commit_flagged():
    commit = Commit(id="c1", author="a", timestamp=0)
    violations = validate_corpus(_corpus([_pr(commits=[commit])]))
    assert len(violations) == 1
    assert "c1" in violations[0]


def test_overlapping_hunks_flagged_once():
    diff = FileDiff(
        path="a.py",
        change_kind="modified",
        hunks=(
            DiffHunk(changed_lines=frozenset({1, 5})),
            DiffHunk(changed_lines=frozenset({4, 9})),
        ),
    )
    commit = Commit(id="c1", author="a", timestamp=5, file_diffs=(diff,))
    violations = validate_corpus(_corpus([_pr(commits=[commit])]))
    assert len(violations) == 1
    assert "hunk 1" in violations[0]


def test_commit_order_enforced():
    commits = [
        Commit(id="c2", author="a", timestamp=20),
        Commit(id="c1", author="a", timestamp=10),
    ]
    violations = validate_corpus(_corpus([_pr(commits=commits)]))
    assert any("not ordered" in v for v in violations)


def test_duplicate_paths_in_commit_flagged():
    diffs = (
        FileDiff(path="a.py", change_kind="modified"),
        FileDiff(path="a.py", change_kind="deleted"),
    )
    commit = Commit(id="c1", author="a", timestamp=5, file_diffs=diffs)
    violations = validate_corpus(_corpus([_pr(commits=[commit])]))
    assert any("duplicate file path" in v for v in violations)


def test_rename_requires_old_path():
    diff = FileDiff(path="b.py", change_kind="renamed")
    commit = Commit(id="c1", author="a", timestamp=5, file_diffs=(diff,))
    violations = validate_corpus(_corpus([_pr(commits=[commit])]))
    assert any("old_path" in v for v in violations)


def test_blank_body_flagged():
    violations = validate_corpus(_corpus([_pr(comments=[_comment(body="  \n")])]))
    assert any("blank" in v for v in violations)


def test_useful_label_needs_trigger_fields():
    comment = _comment(label=UsefulnessLabel(value="useful"))
    violations = validate_corpus(_corpus([_pr(comments=[comment])]))
    assert any("trigger" in v for v in violations)


def test_useful_label_distance_bounded():
    label = UsefulnessLabel(value="useful", trigger_commit="c", trigger_line=30, distance=11)
    violations = validate_corpus(_corpus([_pr(comments=[_comment(label=label)])]))
    assert any("distance" in v for v in violations)


def test_loads_corpus_raises_on_invariant_violation():
    doc = {
        "schema_version": 1,
        "systems": [
            {
                "name": "sys",
                "pull_requests": [
                    {
                        "id": "p",
                        "submitter": "s",
                        "commits": [],
                        "comments": [
                            {
                                "id": "m9",
                                "pr_id": "nope",
                                "anchor_path": "a.py",
                                "anchor_line": 1,
                                "anchor_commit": "c",
                                "reviewer": "r",
                                "timestamp": 1,
                                "body": "x",
                            }
                        ],
                    }
                ],
            }
        ],
    }
    with pytest.raises(CorpusValidationError, match="m9"):
        loads_corpus(json.dumps(doc))


def test_label_round_trip(minicorpus):
    from revhelper.labeling import label_corpus

    labeled = label_corpus(minicorpus)
    again = loads_corpus(serialize_corpus(labeled))
    assert again == labeled


def test_corpus_from_dict_type_errors():
    with pytest.raises(CorpusParseError, match="timestamp"):
        corpus_from_dict(
            {
                "schema_version": 1,
                "systems": [
                    {
                        "name": "s",
                        "pull_requests": [
                            {
                                "id": "p",
                                "submitter": "x",
                                "commits": [
                                    {
                                        "id": "c",
                                        "author": "a",
                                        "timestamp": "soon",
                                        "file_diffs": [],
                                    }
                                ],
                                "comments": [],
                            }
                        ],
                    }
                ],
            }
        )
