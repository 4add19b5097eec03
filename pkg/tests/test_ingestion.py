import pytest

from revhelper.corpus import serialize_corpus, validate_corpus
from revhelper.errors import (
    AuthError,
    ConfigError,
    ContractError,
    DiffParseError,
    RateLimitError,
    TransportError,
)
from revhelper.ingestion import (
    ForgeConfig,
    SynthSpec,
    TapeTransport,
    fetch_remote_reviews,
    generate_synthetic_corpus,
    parse_unified_diff,
)
from revhelper.labeling import label_corpus

from conftest import DATA


# --- unified diff parsing ---


def test_bare_hunk_single_added_line():
    text = "@@ -1,2 +1,3 @@\n line one\n+added line\n line two"
    diffs = parse_unified_diff(text)
    assert len(diffs) == 1
    hunk = diffs[0].hunks[0]
    assert hunk.changed_lines == frozenset({2})
    assert hunk.line_texts == {2: "added line"}


def test_empty_string_gives_empty_list():
    assert parse_unified_diff("") == []


def test_garbage_hunk_header_raises_with_line_number():
    with pytest.raises(DiffParseError, match="line 1"):
        parse_unified_diff("@@ garbage @@")


def test_deletions_use_pre_image_numbers():
    text = "@@ -10,3 +10,2 @@\n keep\n-gone\n keep2"
    (diff,) = parse_unified_diff(text)
    assert diff.hunks[0].changed_lines == frozenset({11})
    assert diff.hunks[0].line_texts == {}


def test_multi_file_diff_with_headers():
    text = (
        "diff --git a/one.py b/one.py\n"
        "--- a/one.py\n"
        "+++ b/one.py\n"
        "@@ -1 +1 @@\n"
        "-old\n"
        "+new\n"
        "diff --git a/two.py b/two.py\n"
        "new file mode 100644\n"
        "--- /dev/null\n"
        "+++ b/two.py\n"
        "@@ -0,0 +1,2 @@\n"
        "+a = 1\n"
        "+b = 2\n"
    )
    diffs = parse_unified_diff(text)
    assert [d.path for d in diffs] == ["one.py", "two.py"]
    assert diffs[0].change_kind == "modified"
    assert diffs[0].hunks[0].changed_lines == frozenset({1})
    assert diffs[1].change_kind == "added"
    assert diffs[1].hunks[0].line_texts == {1: "a = 1", 2: "b = 2"}


def test_rename_headers_detected():
    text = (
        "diff --git a/old.py b/new.py\n"
        "similarity index 90%\n"
        "rename from old.py\n"
        "rename to new.py\n"
        "--- a/old.py\n"
        "+++ b/new.py\n"
        "@@ -3 +3 @@\n"
        "-x\n"
        "+y\n"
    )
    (diff,) = parse_unified_diff(text)
    assert diff.change_kind == "renamed"
    assert diff.old_path == "old.py"
    assert diff.path == "new.py"


def test_deleted_file_kind():
    text = "--- a/dead.py\n+++ /dev/null\n@@ -1,2 +0,0 @@\n-a\n-b\n"
    (diff,) = parse_unified_diff(text)
    assert diff.change_kind == "deleted"
    assert diff.path == "dead.py"
    assert diff.hunks[0].changed_lines == frozenset({1, 2})


def test_truncated_hunk_raises():
    with pytest.raises(DiffParseError, match="truncated"):
        parse_unified_diff("@@ -1,2 +1,2 @@\n line\n")


# --- forge fetch with tapes ---


def _config(**kw):
    base = dict(base_url="https://forge.test", repo="acme/widgets", max_prs=5)
    base.update(kw)
    return ForgeConfig(**base)


def test_fetch_from_tape_excludes_pr_level_comments():
    corpus = fetch_remote_reviews(_config(), transport=TapeTransport(DATA / "fetch_tape.json"))
    assert validate_corpus(corpus) == []
    (system,) = corpus.systems
    assert system.name == "acme/widgets"
    (pr,) = system.pull_requests
    assert pr.id == "101"
    assert len(pr.comments) == 2  # the PR-level comment is dropped
    assert {c.reviewer for c in pr.comments} == {"reviewer1", "reviewer2"}
    assert [c.id for c in pr.commits] == ["sha-a", "sha-b"]
    first = pr.commits[0].file_diffs[0]
    assert first.change_kind == "added"
    assert first.post_image_imports == ("requests",)
    assert pr.commits[1].file_diffs[0].hunks[0].changed_lines == frozenset({4})


def test_fetched_comment_labels_by_heuristic():
    corpus = fetch_remote_reviews(_config(), transport=TapeTransport(DATA / "fetch_tape.json"))
    labeled = label_corpus(corpus)
    by_id = {c.id: c for _, _, c in labeled.iter_comments()}
    # sha-b changes line 4; the comment at line 4 precedes it, the one at
    # line 1 is within the default vicinity too
    assert by_id["9001"].label.value == "useful"
    assert by_id["9001"].label.distance == 0
    assert by_id["9002"].label.value == "useful"


def test_expired_token_tape_raises_auth_error():
    with pytest.raises(AuthError):
        fetch_remote_reviews(
            _config(), transport=TapeTransport(DATA / "expired_token_tape.json")
        )


def test_rate_limit_tape_carries_wait_hint():
    with pytest.raises(RateLimitError) as info:
        fetch_remote_reviews(
            _config(), transport=TapeTransport(DATA / "rate_limit_tape.json")
        )
    assert info.value.retry_after == 30.0


def test_missing_tape_record_is_transport_error():
    with pytest.raises(TransportError, match="no tape record"):
        fetch_remote_reviews(
            _config(max_prs=99, page_size=10),
            transport=TapeTransport(DATA / "fetch_tape.json"),
        )


def test_config_rejects_bad_bounds():
    with pytest.raises(ConfigError):
        _config(max_prs=0).validate()
    with pytest.raises(ConfigError):
        _config(page_size=0).validate()
    with pytest.raises(ConfigError):
        _config(page_size=101).validate()


# --- synthetic corpora ---


def test_synth_deterministic_bytes():
    spec = SynthSpec(n_prs=20, comments_per_pr=(2, 5), useful_fraction=0.5, seed=7)
    a = serialize_corpus(generate_synthetic_corpus(spec))
    b = serialize_corpus(generate_synthetic_corpus(spec))
    assert a == b


def test_synth_passes_validation():
    corpus = generate_synthetic_corpus(SynthSpec(n_prs=15, seed=3))
    assert validate_corpus(corpus) == []


def test_useful_fraction_one_labels_everything_useful():
    spec = SynthSpec(n_prs=10, comments_per_pr=(2, 3), useful_fraction=1.0, seed=1)
    labeled = label_corpus(generate_synthetic_corpus(spec))
    values = [c.label.value for _, _, c in labeled.iter_comments()]
    assert values and all(v == "useful" for v in values)


def test_fraction_tracks_spec_within_two_points():
    spec = SynthSpec(n_prs=160, comments_per_pr=(2, 5), useful_fraction=0.5553, seed=11)
    labeled = label_corpus(generate_synthetic_corpus(spec))
    values = [c.label.value for _, _, c in labeled.iter_comments()]
    assert len(values) >= 500
    useful = sum(1 for v in values if v == "useful") / len(values)
    assert abs(useful - 0.5553) <= 0.02


def test_comment_counts_respect_range():
    spec = SynthSpec(n_prs=25, comments_per_pr=(1, 3), seed=2)
    corpus = generate_synthetic_corpus(spec)
    mains = [pr for pr in corpus.systems[0].pull_requests if pr.id.startswith("pr_")]
    assert len(mains) == 25
    assert all(1 <= len(pr.comments) <= 3 for pr in mains)


def test_spec_validation():
    with pytest.raises(ContractError):
        SynthSpec(n_prs=-1).validate()
    with pytest.raises(ContractError):
        SynthSpec(n_prs=1, useful_fraction=1.5).validate()
    with pytest.raises(ContractError):
        SynthSpec(n_prs=1, signal_strength=-0.1).validate()
    with pytest.raises(ContractError):
        SynthSpec(n_prs=1, comments_per_pr=(3, 2)).validate()
