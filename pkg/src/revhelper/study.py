"""Comparative study between useful and non-useful comments.

For every feature: a Mann-Whitney test with Cohen's d between the classes,
a Kruskal-Wallis test across the class grouping, and per-quartile
Mann-Whitney tests (quartiles computed within each class, Q1 against Q1 and
so on). The report also summarizes class proportions per system and how
often comments of each class embed code elements.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractError, DegenerateDataError
from .features import Dataset
from .stats import (
    TestResult,
    cohens_d,
    effect_band,
    kruskal_wallis,
    mann_whitney_u,
    median,
    quartile_partition,
)

QUARTILE_NAMES = ("Q1", "Q2", "Q3", "Q4")


@dataclass(frozen=True)
class QuartileComparison:
    quartile: str
    n_useful: int
    n_non_useful: int
    result: Optional[TestResult]


@dataclass(frozen=True)
class FeatureComparison:
    feature: str
    n_useful: int
    n_non_useful: int
    median_useful: Optional[float]
    median_non_useful: Optional[float]
    mann_whitney: Optional[TestResult]
    kruskal: Optional[TestResult]
    cohens_d: Optional[float]
    quartiles: tuple


@dataclass(frozen=True)
class SystemClassCounts:
    system: str
    n_prs: int
    n_useful: int
    n_non_useful: int

    @property
    def total(self) -> int:
        return self.n_useful + self.n_non_useful


@dataclass(frozen=True)
class CodeElementCounts:
    system: str
    useful_with: int
    useful_without: int
    non_useful_with: int
    non_useful_without: int

    @property
    def total(self) -> int:
        return (
            self.useful_with
            + self.useful_without
            + self.non_useful_with
            + self.non_useful_without
        )


@dataclass(frozen=True)
class StudyReport:
    rows: tuple
    class_counts: tuple
    code_elements: tuple
    n_rows: int


def run_comparative_study(ds: Dataset) -> StudyReport:
    """Compare both classes on every feature of the dataset.

    Requires at least eight rows of each class. Missing values are dropped
    per feature; tests that become infeasible (an empty quartile, zero
    variance) are reported as absent rather than failing the study.
    """
    useful_rows = int(ds.y.sum())
    non_useful_rows = int(len(ds.y) - useful_rows)
    if useful_rows < 8 or non_useful_rows < 8:
        raise ContractError(
            "comparative study needs at least 8 rows per class, got "
            f"{useful_rows} useful / {non_useful_rows} non-useful"
        )

    rows = []
    for j, name in enumerate(ds.feature_names):
        col = ds.X[:, j]
        useful = [float(v) for v in col[(ds.y == 1) & ~np.isnan(col)]]
        non_useful = [float(v) for v in col[(ds.y == 0) & ~np.isnan(col)]]
        rows.append(_compare_feature(name, useful, non_useful))

    return StudyReport(
        rows=tuple(rows),
        class_counts=_class_counts(ds),
        code_elements=_code_element_counts(ds),
        n_rows=ds.n_rows,
    )


def _compare_feature(name, useful, non_useful) -> FeatureComparison:
    mw = kw = None
    d = None
    if useful and non_useful:
        mw = mann_whitney_u(useful, non_useful)
        kw = kruskal_wallis([useful, non_useful])
        try:
            d = cohens_d(useful, non_useful)
        except (ContractError, DegenerateDataError):
            d = None

    quartiles = []
    parts_useful = parts_non = None
    if len(useful) >= 4 and len(non_useful) >= 4:
        parts_useful = quartile_partition(useful)
        parts_non = quartile_partition(non_useful)
    for q in range(4):
        pu = parts_useful[q] if parts_useful else []
        pn = parts_non[q] if parts_non else []
        result = mann_whitney_u(pu, pn) if pu and pn else None
        quartiles.append(
            QuartileComparison(
                quartile=QUARTILE_NAMES[q],
                n_useful=len(pu),
                n_non_useful=len(pn),
                result=result,
            )
        )

    return FeatureComparison(
        feature=name,
        n_useful=len(useful),
        n_non_useful=len(non_useful),
        median_useful=median(useful) if useful else None,
        median_non_useful=median(non_useful) if non_useful else None,
        mann_whitney=mw,
        kruskal=kw,
        cohens_d=d,
        quartiles=tuple(quartiles),
    )


def _class_counts(ds: Dataset) -> tuple:
    if not ds.meta:
        return (
            SystemClassCounts(
                system="all",
                n_prs=0,
                n_useful=int(ds.y.sum()),
                n_non_useful=int(len(ds.y) - ds.y.sum()),
            ),
        )
    per_system = {}
    for i, (system, pr_id, _comment_id) in enumerate(ds.meta):
        entry = per_system.setdefault(system, {"prs": set(), "useful": 0, "non": 0})
        entry["prs"].add(pr_id)
        if ds.y[i] == 1:
            entry["useful"] += 1
        else:
            entry["non"] += 1
    counts = [
        SystemClassCounts(
            system=system,
            n_prs=len(entry["prs"]),
            n_useful=entry["useful"],
            n_non_useful=entry["non"],
        )
        for system, entry in sorted(per_system.items())
    ]
    counts.append(
        SystemClassCounts(
            system="total",
            n_prs=sum(c.n_prs for c in counts),
            n_useful=sum(c.n_useful for c in counts),
            n_non_useful=sum(c.n_non_useful for c in counts),
        )
    )
    return tuple(counts)


def _code_element_counts(ds: Dataset) -> tuple:
    if "CEP" not in ds.feature_names:
        return ()
    j = ds.feature_names.index("CEP")
    systems = {}
    for i in range(ds.n_rows):
        system = ds.meta[i][0] if ds.meta else "all"
        entry = systems.setdefault(system, [0, 0, 0, 0])
        with_code = not np.isnan(ds.X[i, j]) and ds.X[i, j] >= 0.5
        if ds.y[i] == 1:
            entry[0 if with_code else 1] += 1
        else:
            entry[2 if with_code else 3] += 1
    counts = [
        CodeElementCounts(system, *entry) for system, entry in sorted(systems.items())
    ]
    if len(counts) > 1:
        counts.append(
            CodeElementCounts(
                "total",
                sum(c.useful_with for c in counts),
                sum(c.useful_without for c in counts),
                sum(c.non_useful_with for c in counts),
                sum(c.non_useful_without for c in counts),
            )
        )
    return tuple(counts)


# ---------------------------------------------------------------------------
# rendering


def _fmt(value, digits=4) -> str:
    if value is None:
        return ""
    return f"{value:.{digits}f}"


def _row_record(row: FeatureComparison) -> dict:
    record = {
        "feature": row.feature,
        "n_useful": row.n_useful,
        "n_non_useful": row.n_non_useful,
        "median_useful": row.median_useful,
        "median_non_useful": row.median_non_useful,
        "mw_statistic": row.mann_whitney.statistic if row.mann_whitney else None,
        "mw_p": row.mann_whitney.p_value if row.mann_whitney else None,
        "cohens_d": row.cohens_d,
        "effect_band": effect_band(row.cohens_d),
        "kw_statistic": row.kruskal.statistic if row.kruskal else None,
        "kw_p": row.kruskal.p_value if row.kruskal else None,
        "significant": bool(row.mann_whitney and row.mann_whitney.significant),
    }
    for q in row.quartiles:
        key = q.quartile.lower()
        record[f"{key}_p"] = q.result.p_value if q.result else None
        record[f"{key}_d"] = q.result.effect_size if q.result else None
    return record


def render_study_csv(report: StudyReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = [
        "feature",
        "n_useful",
        "n_non_useful",
        "median_useful",
        "median_non_useful",
        "mw_statistic",
        "mw_p",
        "cohens_d",
        "effect_band",
        "kw_statistic",
        "kw_p",
        "q1_p",
        "q1_d",
        "q2_p",
        "q2_d",
        "q3_p",
        "q3_d",
        "q4_p",
        "q4_d",
        "significant",
    ]
    writer.writerow(header)
    for row in report.rows:
        record = _row_record(row)
        writer.writerow(
            [
                record["feature"],
                record["n_useful"],
                record["n_non_useful"],
                _fmt(record["median_useful"]),
                _fmt(record["median_non_useful"]),
                _fmt(record["mw_statistic"]),
                _fmt(record["mw_p"], 6),
                _fmt(record["cohens_d"]),
                record["effect_band"],
                _fmt(record["kw_statistic"]),
                _fmt(record["kw_p"], 6),
                _fmt(record["q1_p"], 6),
                _fmt(record["q1_d"]),
                _fmt(record["q2_p"], 6),
                _fmt(record["q2_d"]),
                _fmt(record["q3_p"], 6),
                _fmt(record["q3_d"]),
                _fmt(record["q4_p"], 6),
                _fmt(record["q4_d"]),
                "*" if record["significant"] else "",
            ]
        )

    writer.writerow([])
    writer.writerow(["system", "pull_requests", "useful", "useful_pct", "non_useful", "non_useful_pct", "total"])
    for counts in report.class_counts:
        total = counts.total or 1
        writer.writerow(
            [
                counts.system,
                counts.n_prs,
                counts.n_useful,
                f"{100.0 * counts.n_useful / total:.2f}",
                counts.n_non_useful,
                f"{100.0 * counts.n_non_useful / total:.2f}",
                counts.total,
            ]
        )

    if report.code_elements:
        writer.writerow([])
        writer.writerow(
            [
                "system",
                "useful_with_code",
                "useful_without_code",
                "non_useful_with_code",
                "non_useful_without_code",
                "with_code_pct",
            ]
        )
        for ce in report.code_elements:
            total = ce.total or 1
            writer.writerow(
                [
                    ce.system,
                    ce.useful_with,
                    ce.useful_without,
                    ce.non_useful_with,
                    ce.non_useful_without,
                    f"{100.0 * (ce.useful_with + ce.non_useful_with) / total:.2f}",
                ]
            )
    return buf.getvalue()


def render_study_json(report: StudyReport) -> str:
    doc = {
        "n_rows": report.n_rows,
        "features": [_row_record(r) for r in report.rows],
        "class_counts": [
            {
                "system": c.system,
                "pull_requests": c.n_prs,
                "useful": c.n_useful,
                "non_useful": c.n_non_useful,
                "total": c.total,
            }
            for c in report.class_counts
        ],
        "code_elements": [
            {
                "system": ce.system,
                "useful_with_code": ce.useful_with,
                "useful_without_code": ce.useful_without,
                "non_useful_with_code": ce.non_useful_with,
                "non_useful_without_code": ce.non_useful_without,
            }
            for ce in report.code_elements
        ],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def render_study_table(report: StudyReport) -> str:
    headers = ["feature", "med(U)", "med(N)", "U stat", "p", "d", "band",
               "Q1 p", "Q2 p", "Q3 p", "Q4 p", "sig"]
    table = [headers]
    for row in report.rows:
        record = _row_record(row)
        table.append(
            [
                record["feature"],
                _fmt(record["median_useful"], 3),
                _fmt(record["median_non_useful"], 3),
                _fmt(record["mw_statistic"], 1),
                _fmt(record["mw_p"], 4),
                _fmt(record["cohens_d"], 3),
                record["effect_band"],
                _fmt(record["q1_p"], 4),
                _fmt(record["q2_p"], 4),
                _fmt(record["q3_p"], 4),
                _fmt(record["q4_p"], 4),
                "*" if record["significant"] else "",
            ]
        )
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    lines = []
    for i, row in enumerate(table):
        lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    lines.append("")
    for counts in report.class_counts:
        total = counts.total or 1
        lines.append(
            f"{counts.system}: {counts.n_prs} PRs, "
            f"{counts.n_useful} useful ({100.0 * counts.n_useful / total:.2f}%), "
            f"{counts.n_non_useful} non-useful ({100.0 * counts.n_non_useful / total:.2f}%)"
        )
    return "\n".join(lines) + "\n"
