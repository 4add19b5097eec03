"""Textual features of review comments.

Covers the five comment-text variables (reading ease, stop word ratio,
question ratio, code element presence, source token ratio, conceptual
similarity with the changed code) plus the lexicon sentiment score used by
the baseline classifiers. All functions are pure; lexicons are immutable
shared data.
"""

from __future__ import annotations

import keyword
import math
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .corpus import InlineComment, PullRequest
from .errors import ContractError

_WORD_RE = re.compile(r"[a-z0-9_]+(?:'[a-z0-9_]+)*")
_RAW_TOKEN_RE = re.compile(r"[A-Za-z0-9_]+")
_VOWEL_RUN_RE = re.compile(r"[aeiouy]+")
_CAMEL_PIECE_RE = re.compile(r"[A-Z]+(?![a-z])|[A-Z][a-z0-9]*|[a-z0-9]+")

# Code-like element detection. Alternatives are tried in order at each
# position: backtick span, call expression, dotted path, snake_case,
# camelCase, PascalCase (two humps or more), language literals.
_CODE_ELEMENT_RE = re.compile(
    r"`(?P<tick>[^`\n]+)`"
    r"|\b[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*\([^()\n]*\)"
    r"|\b[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)+\b"
    r"|\b[A-Za-z][A-Za-z0-9]*(?:_[A-Za-z0-9]+)+\b"
    r"|\b[a-z][a-z0-9]*(?:[A-Z][A-Za-z0-9]*)+\b"
    r"|\b[A-Z][a-z0-9]+(?:[A-Z][A-Za-z0-9]*)+\b"
    r"|\b(?:None|True|False)\b"
)

# Prose abbreviations that would otherwise match the dotted-path rule.
_DOTTED_FALSE_POSITIVES = frozenset({"e.g", "i.e", "et.al"})


@dataclass(frozen=True)
class TokenizedComment:
    """A comment body split into the views the feature functions need."""

    body: str
    sentences: tuple
    word_tokens: tuple
    code_elements: tuple
    prose_text: str


@dataclass(frozen=True)
class Lexicons:
    """Immutable word lists; all sets hold lowercase tokens."""

    stop_words: frozenset
    prog_keywords: frozenset
    sentiment_positive: frozenset
    sentiment_negative: frozenset
    baseline_keywords: frozenset


_DEFAULT_LEXICONS = None


def load_lexicon_file(path) -> frozenset:
    """Read a lexicon file: one lowercase token per line, '#' comments allowed."""
    tokens = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            word = line.split("#", 1)[0].strip().lower()
            if word:
                tokens.add(word)
    return frozenset(tokens)


def _bundled(name: str) -> frozenset:
    text = resources.files("revhelper.lexicons").joinpath(name).read_text("utf-8")
    return frozenset(
        w
        for w in (line.split("#", 1)[0].strip().lower() for line in text.splitlines())
        if w
    )


def default_lexicons() -> Lexicons:
    """Bundled stop words and sentiment lists; Python keywords for code."""
    global _DEFAULT_LEXICONS
    if _DEFAULT_LEXICONS is None:
        _DEFAULT_LEXICONS = Lexicons(
            stop_words=_bundled("stopwords.txt"),
            prog_keywords=frozenset(k.lower() for k in keyword.kwlist),
            sentiment_positive=_bundled("sentiment_positive.txt"),
            sentiment_negative=_bundled("sentiment_negative.txt"),
            baseline_keywords=_bundled("baseline_keywords.txt"),
        )
    return _DEFAULT_LEXICONS


def lexicons_from_files(
    stop_words=None,
    prog_keywords=None,
    sentiment_positive=None,
    sentiment_negative=None,
    baseline_keywords=None,
) -> Lexicons:
    """Default lexicons with any subset overridden from files."""
    base = default_lexicons()
    return Lexicons(
        stop_words=load_lexicon_file(stop_words) if stop_words else base.stop_words,
        prog_keywords=load_lexicon_file(prog_keywords) if prog_keywords else base.prog_keywords,
        sentiment_positive=load_lexicon_file(sentiment_positive)
        if sentiment_positive
        else base.sentiment_positive,
        sentiment_negative=load_lexicon_file(sentiment_negative)
        if sentiment_negative
        else base.sentiment_negative,
        baseline_keywords=load_lexicon_file(baseline_keywords)
        if baseline_keywords
        else base.baseline_keywords,
    )


def split_sentences(body: str) -> list:
    """Split on '.', '!' or '?' followed by whitespace or end of text.

    A trailing fragment without terminal punctuation counts as one sentence,
    so non-blank input always yields at least one sentence.
    """
    text = body.strip()
    if not text:
        return []
    sentences = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] in ".!?":
            j = i
            while j + 1 < n and text[j + 1] in ".!?":
                j += 1
            if j + 1 >= n or text[j + 1].isspace():
                piece = text[start : j + 1].strip()
                if piece:
                    sentences.append(piece)
                i = j + 1
                while i < n and text[i].isspace():
                    i += 1
                start = i
                continue
            i = j + 1
        else:
            i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def extract_code_elements(body: str) -> list:
    """All code-like strings in order of appearance, duplicates preserved.

    Backtick spans are returned without the backticks; every returned
    element is a substring of the original body.
    """
    elements = []
    for match in _CODE_ELEMENT_RE.finditer(body):
        tick = match.group("tick")
        if tick is not None:
            elements.append(tick)
            continue
        text = match.group(0)
        if "." in text and "(" not in text and text.lower() in _DOTTED_FALSE_POSITIVES:
            continue
        elements.append(text)
    return elements


def _strip_code_elements(body: str) -> str:
    spans = []
    for match in _CODE_ELEMENT_RE.finditer(body):
        text = match.group(0)
        if (
            match.group("tick") is None
            and "." in text
            and "(" not in text
            and text.lower() in _DOTTED_FALSE_POSITIVES
        ):
            continue
        spans.append((match.start(), match.end()))
    if not spans:
        return body
    out = []
    pos = 0
    for start, end in spans:
        out.append(body[pos:start])
        pos = end
    out.append(body[pos:])
    return " ".join(out)


def tokenize(body: str) -> TokenizedComment:
    return TokenizedComment(
        body=body,
        sentences=tuple(split_sentences(body)),
        word_tokens=tuple(_WORD_RE.findall(body.lower())),
        code_elements=tuple(extract_code_elements(body)),
        prose_text=_strip_code_elements(body),
    )


def count_syllables(word: str) -> int:
    """Vowel-group heuristic: maximal [aeiouy]+ runs, minus a trailing
    silent 'e' (unless the word ends in 'le'), floored at one."""
    w = word.lower()
    n = len(_VOWEL_RUN_RE.findall(w))
    if w.endswith("e") and not w.endswith("le"):
        n -= 1
    return max(1, n)


def reading_ease(tok: TokenizedComment, prose_only: bool = False) -> Optional[float]:
    """Flesch reading ease; None when there are no words to score.

    With ``prose_only`` the score is computed over the body with code
    elements removed.
    """
    if prose_only:
        words = _WORD_RE.findall(tok.prose_text.lower())
        sentences = split_sentences(tok.prose_text)
    else:
        words = list(tok.word_tokens)
        sentences = list(tok.sentences)
    if not words:
        return None
    syllables = sum(count_syllables(w) for w in words)
    n_sentences = max(1, len(sentences))
    return (
        206.835
        - 1.015 * (len(words) / n_sentences)
        - 84.6 * (syllables / len(words))
    )


def stop_word_ratio(
    tok: TokenizedComment, include_keywords: bool, lex: Lexicons
) -> float:
    if not tok.word_tokens:
        return 0.0
    vocab = lex.stop_words | lex.prog_keywords if include_keywords else lex.stop_words
    hits = sum(1 for t in tok.word_tokens if t in vocab)
    return hits / len(tok.word_tokens)


def question_ratio(tok: TokenizedComment) -> float:
    if not tok.sentences:
        return 0.0
    questions = 0
    for sentence in tok.sentences:
        terminal = sentence.rstrip()
        run = ""
        while terminal and terminal[-1] in ".!?":
            run = terminal[-1] + run
            terminal = terminal[:-1]
        if "?" in run:
            questions += 1
    return questions / len(tok.sentences)


def split_code_element(element: str) -> list:
    """Sub-tokens of a code element: split on punctuation, underscores,
    dots, parentheses, and camel humps; lowercase; punctuation dropped."""
    out = []
    for part in re.split(r"[^A-Za-z0-9]+", element):
        if not part:
            continue
        out.extend(piece.lower() for piece in _CAMEL_PIECE_RE.findall(part))
    return out


def source_token_ratio(tok: TokenizedComment) -> float:
    sub_tokens = []
    for element in tok.code_elements:
        sub_tokens.extend(split_code_element(element))
    prose_words = _WORD_RE.findall(tok.prose_text.lower())
    total = len(prose_words) + len(sub_tokens)
    if total == 0:
        return 0.0
    return len(sub_tokens) / total


def concept_tokens(text: str, stop_words: frozenset) -> list:
    """Preprocess text for similarity: tokenize, split identifiers on
    underscores and camel humps, lowercase, drop stop words."""
    out = []
    for raw in _RAW_TOKEN_RE.findall(text):
        for piece in split_code_element(raw):
            if piece not in stop_words:
                out.append(piece)
    return out


def _cosine(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    dot = sum(count * b[token] for token, count in a.items())
    if dot == 0:
        return 0.0
    norm_a = math.sqrt(sum(c * c for c in a.values()))
    norm_b = math.sqrt(sum(c * c for c in b.values()))
    return dot / (norm_a * norm_b)


def max_line_similarity(text: str, lines, lex: Lexicons) -> float:
    """Maximum cosine similarity between the term-frequency vector of
    ``text`` and that of any candidate source line."""
    vec = Counter(concept_tokens(text, lex.stop_words))
    best = 0.0
    for line in lines:
        best = max(best, _cosine(vec, Counter(concept_tokens(line, lex.stop_words))))
    return best


def conceptual_similarity(
    comment: InlineComment, pr: PullRequest, lex: Lexicons
) -> float:
    """Vocabulary overlap between a comment and the changed code it reviews.

    Candidates are the changed source lines of the comment's file from
    commits of the same pull request at or before the comment; the maximum
    per-line cosine is returned, 0.0 when there is nothing to compare.
    """
    if all(c.id != comment.id for c in pr.comments):
        raise ContractError(f"comment {comment.id} does not belong to pull request {pr.id}")
    lines = []
    for commit in pr.commits:
        if commit.timestamp > comment.timestamp:
            continue
        for diff in commit.file_diffs:
            if diff.path != comment.anchor_path:
                continue
            for hunk in diff.hunks:
                lines.extend(hunk.line_texts.values())
    return max_line_similarity(comment.body, lines, lex)


def sentiment_score(body: str, lex: Lexicons):
    """Lexicon sentiment: (positive hits - negative hits) / word count.

    Returns (score, group) with group in {negative, neutral, positive};
    |score| < 0.05 counts as neutral.
    """
    tokens = _WORD_RE.findall(body.lower())
    if not tokens:
        return 0.0, "neutral"
    positive = sum(1 for t in tokens if t in lex.sentiment_positive)
    negative = sum(1 for t in tokens if t in lex.sentiment_negative)
    score = (positive - negative) / len(tokens)
    if score >= 0.05:
        group = "positive"
    elif score <= -0.05:
        group = "negative"
    else:
        group = "neutral"
    return score, group


def baseline_keyword_count(tok: TokenizedComment, lex: Lexicons) -> int:
    """Number of word tokens found in the baseline keyword lexicon."""
    return sum(1 for t in tok.word_tokens if t in lex.baseline_keywords)
