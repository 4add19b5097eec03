"""Regenerate comment_fixtures.json from the independent oracles.

Run from the repository root:

    python3 tests/data/make_comment_fixtures.py

Bodies and code-element declarations are authored by hand (elements follow
the documented extraction rules); every expected number is computed by the
reference implementations in tests/oracles.py, never by the package.
"""

import json
import keyword
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1]))

from oracles import (  # noqa: E402
    oracle_cs,
    oracle_flesch,
    oracle_qr,
    oracle_remove_elements,
    oracle_str,
    oracle_swr,
)

HERE = pathlib.Path(__file__).resolve().parent

# (id, body, declared code elements, context lines)
CASES = [
    ("fig1a", "Only check postable services?", [], ["if service.postable:"]),
    (
        "fig1b",
        "I don't think we need 2 ways to call get_partner_whitelabel_config "
        "as market_id is None by default",
        ["get_partner_whitelabel_config", "market_id", "None"],
        ["partner_config = get_partner_whitelabel_config(market_id)"],
    ),
    ("two-sent", "Looks fine. Why this cast?", [], ["result = int(raw_total)"]),
    ("praise", "looks good to me", [], ["return merged"]),
    ("rename", "rename market_id", ["market_id"], ["market_id = None"]),
    ("backtick", "`x+1` is wrong", ["x+1"], ["offset = x+1"]),
    (
        "camel-question",
        "What does getPartnerConfig return here?",
        ["getPartnerConfig"],
        ["partner = getPartnerConfig()"],
    ),
    (
        "dotted",
        "Use os.path.join instead of string concat",
        ["os.path.join"],
        ["full = base + '/' + name"],
    ),
    ("all-stop-3", "This is it", [], ["pass"]),
    ("all-stop-4", "is it in the", [], ["pass"]),
    (
        "call-q",
        "parse_config(path) can raise ValueError. Wrap it in try/except?",
        ["parse_config(path)", "ValueError"],
        ["config = parse_config(path)"],
    ),
    ("positive", "great clean fix", [], ["return 0"]),
    (
        "long-method",
        "This method is way too long, split it into helpers.",
        [],
        ["def process_batch(records):"],
    ),
    ("none-q", "Shouldn't this be None?", ["None"], ["default = 0"]),
    ("changelog", "update the changelog", [], ["version = '2.0'"]),
    (
        "meta-snake",
        "Prefer snake_case for variable names",
        ["snake_case"],
        ["userName = input()"],
    ),
    ("missing-test", "Missing test for the empty list case", [], ["if not items:"]),
    (
        "twice",
        "Why is load_state called twice? Remove the second call.",
        ["load_state"],
        ["state = load_state(session)", "backup = load_state(session)"],
    ),
    ("typo", "typo: recieve -> receive", [], ["def receive_packet(data):"]),
    (
        "exceptions",
        "The TimeoutError here is misleading; use ConnectionError",
        ["TimeoutError", "ConnectionError"],
        ["raise TimeoutError('no route')"],
    ),
    ("nit", "nit: trailing whitespace", [], ["x = 1 "]),
    (
        "memoize",
        "Can we memoize fetch_batch? It is called in a loop.",
        ["fetch_batch"],
        ["rows = fetch_batch(cursor)", "for page in pages:"],
    ),
    (
        "true-return",
        "True should be returned when the cache hits",
        ["True"],
        ["return False"],
    ),
    ("dead-code", "The second branch is dead code", [], ["else:"]),
    (
        "registry",
        "Check the registry.lookup_entry call before merging",
        ["registry.lookup_entry"],
        ["entry = registry.lookup_entry(key)"],
    ),
    ("negative", "bad naming, very confusing, please fix", [], ["def f(a, b):"]),
    (
        "docstring-q",
        "Could you add a docstring explaining the retry logic?",
        [],
        ["def retry_request(attempts):"],
    ),
    ("lgtm", "LGTM", [], ["return result"]),
    (
        "debug",
        "Remove debugPrint before merging",
        ["debugPrint"],
        ["debugPrint(response)"],
    ),
    (
        "reraise",
        "Empty except swallows KeyboardInterrupt; re-raise it",
        ["KeyboardInterrupt"],
        ["except Exception:"],
    ),
]


def load_stop_words():
    lines = (HERE.parent.parent / "src/revhelper/lexicons/stopwords.txt").read_text().splitlines()
    return frozenset(
        w for w in (line.split("#", 1)[0].strip().lower() for line in lines) if w
    )


def main():
    stop = load_stop_words()
    keywords = frozenset(k.lower() for k in keyword.kwlist)
    fixtures = []
    for case_id, body, elements, lines in CASES:
        prose = oracle_remove_elements(body, elements)
        fixtures.append(
            {
                "id": case_id,
                "body": body,
                "elements": elements,
                "context_lines": lines,
                "expected": {
                    "SWR": oracle_swr(body, stop),
                    "SKWR": oracle_swr(body, stop, keywords),
                    "QR": oracle_qr(body),
                    "CEP": 1.0 if elements else 0.0,
                    "STR": oracle_str(body, elements),
                    "CS": oracle_cs(body, lines, stop),
                    "RE_full": oracle_flesch(body),
                    "RE_prose": oracle_flesch(prose),
                },
            }
        )
    out = HERE / "comment_fixtures.json"
    out.write_text(json.dumps(fixtures, indent=2, ensure_ascii=False) + "\n")
    print(f"wrote {out} ({len(fixtures)} fixtures)")


if __name__ == "__main__":
    main()
