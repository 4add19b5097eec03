"""Independent reference implementations used to freeze expected values.

Everything here is deliberately written differently from the package code
(different algorithms, no shared helpers) so fixture values and permutation
p-values come from a second route.
"""

from __future__ import annotations

import math
import re
from itertools import combinations

VOWELS = set("aeiouy")


def oracle_words(text):
    return re.findall(r"[a-z0-9_]+(?:'[a-z0-9_]+)*", text.lower())


def oracle_sentences(text):
    """Explicit scan: a [.!?] run followed by whitespace or end closes a
    sentence; a leftover fragment is a sentence of its own."""
    text = text.strip()
    if not text:
        return []
    out = []
    current = []
    i = 0
    while i < len(text):
        current.append(text[i])
        if text[i] in ".!?":
            j = i
            while j + 1 < len(text) and text[j + 1] in ".!?":
                j += 1
                current.append(text[j])
            if j + 1 >= len(text) or text[j + 1].isspace():
                out.append("".join(current).strip())
                current = []
                i = j + 1
                continue
            i = j + 1
            continue
        i += 1
    tail = "".join(current).strip()
    if tail:
        out.append(tail)
    return [s for s in out if s]


def oracle_syllables(word):
    """State-machine count of vowel groups, trailing-e rule, floor one."""
    w = word.lower()
    count = 0
    in_group = False
    for ch in w:
        if ch in VOWELS:
            if not in_group:
                count += 1
            in_group = True
        else:
            in_group = False
    if w.endswith("e") and not w.endswith("le"):
        count -= 1
    return count if count >= 1 else 1


def oracle_flesch(text):
    words = oracle_words(text)
    if not words:
        return None
    sentences = oracle_sentences(text) or [text]
    syllables = sum(oracle_syllables(w) for w in words)
    return 206.835 - 1.015 * len(words) / len(sentences) - 84.6 * syllables / len(words)


def oracle_swr(text, stop_words, extra=frozenset()):
    words = oracle_words(text)
    if not words:
        return 0.0
    hits = [w for w in words if w in stop_words or w in extra]
    return len(hits) / len(words)


def oracle_qr(text):
    sentences = oracle_sentences(text)
    if not sentences:
        return 0.0
    questions = [s for s in sentences if "?" in re.search(r"[.!?]*$", s).group(0)]
    return len(questions) / len(sentences)


def oracle_remove_elements(body, elements):
    """Left-to-right removal of each declared element occurrence (backtick
    spans are removed with their backticks)."""
    out = body
    for element in elements:
        ticked = f"`{element}`"
        target = ticked if ticked in out else element
        pos = out.find(target)
        if pos < 0:
            raise AssertionError(f"declared element {element!r} not found in body")
        out = out[:pos] + " " + out[pos + len(target) :]
    return out


def oracle_subtokens(element):
    parts = re.split(r"[^0-9A-Za-z]+", element)
    out = []
    for part in parts:
        if not part:
            continue
        # insert breaks at lower->upper boundaries, then split
        broken = re.sub(r"([a-z0-9])([A-Z])", r"\1 \2", part)
        out.extend(p.lower() for p in broken.split())
    return out


def oracle_str(body, elements):
    subs = []
    for element in elements:
        subs.extend(oracle_subtokens(element))
    prose = oracle_remove_elements(body, elements)
    prose_words = oracle_words(prose)
    total = len(prose_words) + len(subs)
    return len(subs) / total if total else 0.0


def oracle_concept_vector(text, stop_words):
    counts = {}
    for raw in re.findall(r"[0-9A-Za-z_]+", text):
        for token in oracle_subtokens(raw):
            if token in stop_words:
                continue
            counts[token] = counts.get(token, 0) + 1
    return counts


def oracle_cosine(va, vb):
    shared = set(va) & set(vb)
    dot = sum(va[t] * vb[t] for t in shared)
    if dot == 0:
        return 0.0
    na = math.sqrt(sum(v * v for v in va.values()))
    nb = math.sqrt(sum(v * v for v in vb.values()))
    return dot / (na * nb)


def oracle_cs(body, lines, stop_words):
    vc = oracle_concept_vector(body, stop_words)
    return max(
        (oracle_cosine(vc, oracle_concept_vector(line, stop_words)) for line in lines),
        default=0.0,
    )


# ---------------------------------------------------------------------------
# permutation oracles for the rank tests


def oracle_ranks(values):
    pairs = sorted(enumerate(values), key=lambda p: p[1])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(pairs):
        j = i
        while j + 1 < len(pairs) and pairs[j + 1][1] == pairs[i][1]:
            j += 1
        for k in range(i, j + 1):
            ranks[pairs[k][0]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def oracle_u_statistic(a, b):
    """Direct pair counting: wins plus half-ties of sample a over b."""
    u = 0.0
    for x in a:
        for y in b:
            if x > y:
                u += 1.0
            elif x == y:
                u += 0.5
    return u


def oracle_mw_exact_p(a, b):
    """Two-sided exact p by enumerating every split of the pooled values."""
    pooled = list(a) + list(b)
    n1 = len(a)
    mu = n1 * len(b) / 2.0
    observed = abs(oracle_u_statistic(a, b) - mu)
    hits = total = 0
    indices = range(len(pooled))
    for combo in combinations(indices, n1):
        chosen = set(combo)
        group_a = [pooled[i] for i in combo]
        group_b = [pooled[i] for i in indices if i not in chosen]
        total += 1
        if abs(oracle_u_statistic(group_a, group_b) - mu) >= observed - 1e-12:
            hits += 1
    return hits / total


def oracle_kw_h(groups):
    pooled = [v for g in groups for v in g]
    n = len(pooled)
    ranks = oracle_ranks(pooled)
    h = 0.0
    offset = 0
    for g in groups:
        rank_sum = sum(ranks[offset : offset + len(g)])
        h += rank_sum * rank_sum / len(g)
        offset += len(g)
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    ties = {}
    for v in pooled:
        ties[v] = ties.get(v, 0) + 1
    tie_term = sum(c**3 - c for c in ties.values() if c > 1)
    denom = 1.0 - tie_term / (n**3 - n)
    return h / denom if denom > 0 else 0.0


def oracle_kw_exact_p(groups):
    """Upper-tail exact p over all multinomial assignments of pooled values."""
    pooled = [v for g in groups for v in g]
    sizes = [len(g) for g in groups]
    h_obs = oracle_kw_h(groups)
    hits = total = 0

    def assignments(remaining, size_list):
        if len(size_list) == 1:
            yield [list(remaining)]
            return
        for combo in combinations(range(len(remaining)), size_list[0]):
            chosen = set(combo)
            head = [remaining[i] for i in combo]
            rest = [remaining[i] for i in range(len(remaining)) if i not in chosen]
            for tail in assignments(rest, size_list[1:]):
                yield [head] + tail

    for grouping in assignments(pooled, sizes):
        total += 1
        if oracle_kw_h(grouping) >= h_obs - 1e-12:
            hits += 1
    return hits / total


def oracle_auc(truth, scores):
    """Probability a positive outscores a negative (ties count half)."""
    pos = [s for t, s in zip(truth, scores) if t == 1]
    neg = [s for t, s in zip(truth, scores) if t == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))
