"""Adapted lesson-plan analysis rubric scoring and inter-rater statistics.

The rubric is data-driven: 22 items of up to 2 points each (44 points total)
split into presence items, satisfied by the mere existence of a mandatory
section, and quality items graded by human raters. Besides per-plan scoring
and quality banding this module implements the rater-agreement statistics
(percent agreement, Spearman's rho with tie correction, Cohen's kappa) and a
two-sided Wilcoxon signed-rank test with exact enumeration p-values.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import statistics
from dataclasses import dataclass
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Callable, Sequence

from .planformat import PHASES, LessonPlan

ITEM_KINDS = ("presence", "quality")

BAND_INADEQUATE = "inadequate"
BAND_FAIR = "fair"
BAND_GOOD = "good"
BAND_VERY_GOOD = "very_good"
BAND_EXCELLENT = "excellent"

# Ordered (band, upper_bound, upper_inclusive); a percentage belongs to the
# first band whose bound it does not exceed. 80 is inside "good": only scores
# exceeding 80 are "very good", and only scores above 90 are "excellent".
DEFAULT_BANDS: tuple[tuple[str, float, bool], ...] = (
    (BAND_INADEQUATE, 50.0, False),
    (BAND_FAIR, 65.0, False),
    (BAND_GOOD, 80.0, True),
    (BAND_VERY_GOOD, 90.0, True),
    (BAND_EXCELLENT, 100.0, True),
)

_EXACT_WILCOXON_MAX_N = 20


class EvaluationError(ValueError):
    """Raised for invalid rubric, rating, or scoring inputs."""


class UndefinedStatisticError(EvaluationError):
    """The requested statistic is undefined for the given data (degenerate input)."""


@dataclass(frozen=True)
class RubricItem:
    item_id: str
    text: str
    kind: str
    max_points: int = 2

    def __post_init__(self) -> None:
        if not self.item_id:
            raise EvaluationError("rubric item_id must be non-empty")
        if self.kind not in ITEM_KINDS:
            raise EvaluationError(f"unknown rubric item kind {self.kind!r}")
        if self.max_points < 1:
            raise EvaluationError(f"item {self.item_id}: max_points must be >= 1")


@dataclass(frozen=True)
class Rubric:
    items: tuple[RubricItem, ...]

    def __post_init__(self) -> None:
        if not self.items:
            raise EvaluationError("rubric has no items")
        ids = [item.item_id for item in self.items]
        if len(set(ids)) != len(ids):
            raise EvaluationError("rubric item ids are not unique")

    @property
    def max_total(self) -> int:
        return sum(item.max_points for item in self.items)

    @property
    def item_ids(self) -> tuple[str, ...]:
        return tuple(item.item_id for item in self.items)

    def item(self, item_id: str) -> RubricItem:
        for item in self.items:
            if item.item_id == item_id:
                return item
        raise EvaluationError(f"unknown rubric item {item_id!r}")


@dataclass(frozen=True)
class RaterScore:
    plan_id: str
    rater_id: str
    scores: dict[str, int]


@dataclass(frozen=True)
class EvaluationRecord:
    plan_id: str
    averaged_scores: dict[str, float]
    total_points: float
    percentage: float
    quality_only_percentage: float
    band: str


@dataclass(frozen=True)
class WilcoxonResult:
    w: float
    p_value: float
    n_effective: int


def load_rubric(path: str | Path) -> Rubric:
    """Load a rubric from its JSON file (array of item objects)."""
    path = Path(path)
    if not path.is_file():
        raise EvaluationError(f"rubric file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise EvaluationError(f"{path}: invalid JSON: {exc}") from exc
    return _rubric_from_obj(data, str(path))


def _rubric_from_obj(data: object, source: str) -> Rubric:
    if not isinstance(data, list):
        raise EvaluationError(f"{source}: rubric must be a JSON array")
    items = []
    for i, obj in enumerate(data):
        if not isinstance(obj, dict):
            raise EvaluationError(f"{source}: rubric entry {i} is not an object")
        try:
            items.append(
                RubricItem(
                    item_id=str(obj["item_id"]),
                    text=str(obj["text"]),
                    kind=str(obj["kind"]),
                    max_points=int(obj.get("max_points", 2)),
                )
            )
        except KeyError as exc:
            raise EvaluationError(f"{source}: rubric entry {i} missing key {exc}") from None
    return Rubric(items=tuple(items))


def default_rubric() -> Rubric:
    """The shipped 22-item rubric (8 presence, 14 quality, 44 points)."""
    text = (resources.files("lessongen") / "data" / "lpap_rubric.json").read_text("utf-8")
    return _rubric_from_obj(json.loads(text), "packaged rubric")


def validate_rater_score(score: RaterScore, rubric: Rubric) -> None:
    expected = set(rubric.item_ids)
    got = set(score.scores)
    if got != expected:
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        raise EvaluationError(
            f"rater {score.rater_id} on plan {score.plan_id}: "
            f"missing items {missing}, unknown items {extra}"
        )
    for item in rubric.items:
        value = score.scores[item.item_id]
        if not isinstance(value, int) or not 0 <= value <= item.max_points:
            raise EvaluationError(
                f"rater {score.rater_id} on plan {score.plan_id}: "
                f"score {value!r} out of range for item {item.item_id}"
            )


def score_percentage(total_points: float, rubric: Rubric) -> float:
    if not 0 <= total_points <= rubric.max_total:
        raise EvaluationError(
            f"total_points {total_points} outside [0, {rubric.max_total}]"
        )
    return 100.0 * total_points / rubric.max_total


def classify_band(
    percentage: float, bands: tuple[tuple[str, float, bool], ...] = DEFAULT_BANDS
) -> str:
    if not 0 <= percentage <= 100:
        raise EvaluationError(f"percentage {percentage} outside [0, 100]")
    for band, upper, inclusive in bands:
        if percentage < upper or (inclusive and percentage == upper):
            return band
    return bands[-1][0]


def quality_only_percentage(scores: dict[str, float], rubric: Rubric) -> float:
    """Percentage over quality-kind items only, ignoring presence items."""
    quality_items = [item for item in rubric.items if item.kind == "quality"]
    if not quality_items:
        raise EvaluationError("rubric has no quality items")
    total = 0.0
    maximum = 0
    for item in quality_items:
        if item.item_id not in scores:
            raise EvaluationError(f"scores missing quality item {item.item_id}")
        total += scores[item.item_id]
        maximum += item.max_points
    return 100.0 * total / maximum


def average_raters(scores: Sequence[RaterScore], rubric: Rubric) -> EvaluationRecord:
    """Value-based average of independent ratings for one plan."""
    if not scores:
        raise EvaluationError("need at least one rater")
    plan_ids = {s.plan_id for s in scores}
    if len(plan_ids) != 1:
        raise EvaluationError(f"ratings span multiple plans: {sorted(plan_ids)}")
    for score in scores:
        validate_rater_score(score, rubric)

    averaged = {
        item_id: sum(s.scores[item_id] for s in scores) / len(scores)
        for item_id in rubric.item_ids
    }
    total = sum(averaged.values())
    percentage = score_percentage(total, rubric)
    return EvaluationRecord(
        plan_id=scores[0].plan_id,
        averaged_scores=averaged,
        total_points=total,
        percentage=percentage,
        quality_only_percentage=quality_only_percentage(averaged, rubric),
        band=classify_band(percentage),
    )


def _aligned(a: RaterScore, b: RaterScore) -> tuple[list[int], list[int]]:
    if set(a.scores) != set(b.scores):
        raise EvaluationError(
            f"raters {a.rater_id} and {b.rater_id} cover different items"
        )
    keys = sorted(a.scores)
    return [a.scores[k] for k in keys], [b.scores[k] for k in keys]


def percent_agreement(a: RaterScore, b: RaterScore) -> float:
    """Share of items on which the two raters gave the identical integer score."""
    xs, ys = _aligned(a, b)
    if not xs:
        raise EvaluationError("no items to compare")
    return 100.0 * sum(1 for x, y in zip(xs, ys) if x == y) / len(xs)


def rank_with_ties(values: Sequence[float]) -> list[float]:
    """1-based ranks; tied values receive the average of their rank positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        average = (i + j + 2) / 2  # positions are 0-based, ranks 1-based
        for pos in range(i, j + 1):
            ranks[order[pos]] = average
        i = j + 1
    return ranks


def _pearson(x: Sequence[float], y: Sequence[float]) -> float:
    n = len(x)
    mean_x = sum(x) / n
    mean_y = sum(y) / n
    cov = sum((a - mean_x) * (b - mean_y) for a, b in zip(x, y))
    var_x = sum((a - mean_x) ** 2 for a in x)
    var_y = sum((b - mean_y) ** 2 for b in y)
    if var_x == 0.0 or var_y == 0.0:
        raise UndefinedStatisticError("correlation undefined for constant input")
    return cov / math.sqrt(var_x * var_y)


def spearman_correlation(a: RaterScore, b: RaterScore) -> float:
    """Spearman's rho: Pearson correlation of tie-adjusted (average) ranks."""
    xs, ys = _aligned(a, b)
    if len(xs) < 3:
        raise EvaluationError("need at least 3 items for a rank correlation")
    rho = _pearson(rank_with_ties(xs), rank_with_ties(ys))
    return max(-1.0, min(1.0, rho))


def cohen_kappa(a: RaterScore, b: RaterScore) -> float:
    """Cohen's kappa: (p_o - p_e) / (1 - p_e) with marginal chance agreement.

    Undefined when the chance agreement p_e equals 1 (both raters constant
    on the same category).
    """
    xs, ys = _aligned(a, b)
    if not xs:
        raise EvaluationError("no items to compare")
    n = len(xs)
    p_o = sum(1 for x, y in zip(xs, ys) if x == y) / n
    categories = set(xs) | set(ys)
    p_e = sum(
        (xs.count(c) / n) * (ys.count(c) / n)
        for c in categories
    )
    if p_e == 1.0:
        raise UndefinedStatisticError("kappa undefined: chance agreement is 1")
    return (p_o - p_e) / (1.0 - p_e)


def _doubled_midranks(magnitudes: Sequence[float]) -> list[int]:
    """Average ranks of the magnitudes, doubled so ties stay exact integers."""
    order = sorted(range(len(magnitudes)), key=lambda i: magnitudes[i])
    doubled = [0] * len(magnitudes)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and magnitudes[order[j + 1]] == magnitudes[order[i]]:
            j += 1
        rank2 = i + j + 2  # == 2 * average 1-based rank of the tie group
        for pos in range(i, j + 1):
            doubled[order[pos]] = rank2
        i = j + 1
    return doubled


def _exact_min_tail_probability(doubled_ranks: Sequence[int], w2_min: int) -> float:
    """P(min(W+, W-) <= observed) over all equiprobable sign assignments.

    Counts subsets of the doubled ranks via subset-sum DP, which enumerates
    the same distribution as iterating all 2^n assignments.
    """
    n = len(doubled_ranks)
    total2 = sum(doubled_ranks)
    ways = [0] * (total2 + 1)
    ways[0] = 1
    for rank2 in doubled_ranks:
        for s in range(total2, rank2 - 1, -1):
            ways[s] += ways[s - rank2]
    if total2 - w2_min <= w2_min:
        return 1.0
    count = sum(ways[: w2_min + 1]) + sum(ways[total2 - w2_min :])
    return count / 2**n


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float]) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped. W is the smaller of the signed-rank sums.
    For up to 20 effective pairs the p-value is exact, defined by enumeration
    of all 2^n equiprobable sign assignments; above that a normal
    approximation with tie correction is used. All-zero differences yield the
    degenerate result (W=0, p=1, n_effective=0).
    """
    if len(x) != len(y):
        raise EvaluationError(f"paired samples differ in length: {len(x)} vs {len(y)}")
    if not x:
        raise EvaluationError("need at least one pair")
    diffs = [float(a) - float(b) for a, b in zip(x, y) if float(a) != float(b)]
    n = len(diffs)
    if n == 0:
        return WilcoxonResult(w=0.0, p_value=1.0, n_effective=0)

    magnitudes = [abs(d) for d in diffs]
    doubled = _doubled_midranks(magnitudes)
    w_plus2 = sum(r2 for r2, d in zip(doubled, diffs) if d > 0)
    total2 = n * (n + 1)
    w_minus2 = total2 - w_plus2
    w2 = min(w_plus2, w_minus2)

    if n <= _EXACT_WILCOXON_MAX_N:
        p = _exact_min_tail_probability(doubled, w2)
    else:
        mean = n * (n + 1) / 4.0
        tie_term = 0.0
        for magnitude in set(magnitudes):
            t = magnitudes.count(magnitude)
            tie_term += t**3 - t
        variance = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
        z = (mean - w2 / 2.0) / math.sqrt(variance)
        p = min(1.0, math.erfc(z / math.sqrt(2.0)))
    return WilcoxonResult(w=w2 / 2.0, p_value=p, n_effective=n)


# Presence items are auto-scorable from plan structure; each maps to a
# predicate over the parsed plan.
_PRESENCE_PREDICATES: dict[str, Callable[[LessonPlan], bool]] = {
    "pres_topic": lambda p: bool(p.general_information.get("topic", "").strip()),
    "pres_subject_level": lambda p: bool(p.general_information.get("subject", "").strip())
    and bool(p.general_information.get("level", "").strip()),
    "pres_class_size": lambda p: bool(p.general_information.get("class_size", "").strip()),
    "pres_periods_date": lambda p: bool(p.general_information.get("periods", "").strip())
    and bool(p.general_information.get("date_placeholder", "").strip()),
    "pres_learning_objective": lambda p: bool(p.preparation.get("learning_objective", "").strip()),
    "pres_materials": lambda p: bool(p.preparation.get("materials", "").strip()),
    "pres_references": lambda p: bool(p.preparation.get("references", "").strip()),
    "pres_procedure_phases": lambda p: all(
        any(step.phase == phase for step in p.procedure) for phase in PHASES
    ),
}


def score_presence_items(plan: LessonPlan, rubric: Rubric) -> dict[str, int]:
    """Auto-score presence items from plan structure: full credit when present."""
    result: dict[str, int] = {}
    for item in rubric.items:
        if item.kind != "presence":
            continue
        predicate = _PRESENCE_PREDICATES.get(item.item_id)
        if predicate is None:
            raise EvaluationError(f"no presence predicate for item {item.item_id!r}")
        result[item.item_id] = item.max_points if predicate(plan) else 0
    return result


def load_ratings_csv(path: str | Path, rubric: Rubric) -> list[RaterScore]:
    """Load the `plan_id,rater_id,item_id,score` ratings file.

    Every (plan, rater) pair must cover the full rubric; malformed rows are
    reported with their line number.
    """
    path = Path(path)
    if not path.is_file():
        raise EvaluationError(f"ratings file not found: {path}")
    grouped: dict[tuple[str, str], dict[str, int]] = {}
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["plan_id", "rater_id", "item_id", "score"]:
            raise EvaluationError(f"{path}:1: expected header plan_id,rater_id,item_id,score")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise EvaluationError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            plan_id, rater_id, item_id, raw_score = (cell.strip() for cell in row)
            try:
                item = rubric.item(item_id)
            except EvaluationError:
                raise EvaluationError(f"{path}:{lineno}: unknown item_id {item_id!r}") from None
            try:
                score = int(raw_score)
            except ValueError:
                raise EvaluationError(f"{path}:{lineno}: score {raw_score!r} is not an integer") from None
            if not 0 <= score <= item.max_points:
                raise EvaluationError(
                    f"{path}:{lineno}: score {score} outside [0, {item.max_points}] for {item_id}"
                )
            cell_scores = grouped.setdefault((plan_id, rater_id), {})
            if item_id in cell_scores:
                raise EvaluationError(f"{path}:{lineno}: duplicate rating for {plan_id}/{rater_id}/{item_id}")
            cell_scores[item_id] = score

    if not grouped:
        raise EvaluationError(f"{path}: no ratings found")
    ratings = [
        RaterScore(plan_id=plan_id, rater_id=rater_id, scores=scores)
        for (plan_id, rater_id), scores in sorted(grouped.items())
    ]
    for rating in ratings:
        validate_rater_score(rating, rubric)
    return ratings


def subject_of_plan(plan_id: str) -> str:
    """Subject inferred from the `{Subject}{NN}` plan naming convention."""
    match = re.match(r"^(.*?)\d+$", plan_id)
    return match.group(1) if match else plan_id


@dataclass(frozen=True)
class AgreementEntry:
    plan_id: str
    rater_a: str
    rater_b: str
    percent_agreement: float
    spearman: float | None
    kappa: float | None


@dataclass(frozen=True)
class SubjectSummary:
    subject: str
    plan_count: int
    mean_percentage: float
    min_percentage: float
    max_percentage: float
    mean_quality_only: float


@dataclass(frozen=True)
class SubjectComparison:
    subject_a: str
    subject_b: str
    n_effective: int
    w: float
    p_value: float
    significant_at_5pct: bool


@dataclass(frozen=True)
class ReportDocument:
    records: tuple[EvaluationRecord, ...]
    rater_counts: dict[str, int]
    agreement: tuple[AgreementEntry, ...]
    subject_summaries: tuple[SubjectSummary, ...]
    subject_comparisons: tuple[SubjectComparison, ...]
    band_counts: dict[str, int]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(
            [
                "plan_id",
                "subject",
                "percentage",
                "quality_only_percentage",
                "band",
                "raters",
                "mean_percent_agreement",
                "mean_spearman",
                "mean_kappa",
            ]
        )
        by_plan: dict[str, list[AgreementEntry]] = {}
        for entry in self.agreement:
            by_plan.setdefault(entry.plan_id, []).append(entry)

        def mean_or_na(values: list[float]) -> str:
            return f"{statistics.fmean(values):.4f}" if values else "n/a"

        for record in self.records:
            entries = by_plan.get(record.plan_id, [])
            writer.writerow(
                [
                    record.plan_id,
                    subject_of_plan(record.plan_id),
                    f"{record.percentage:.2f}",
                    f"{record.quality_only_percentage:.2f}",
                    record.band,
                    self.rater_counts.get(record.plan_id, 0),
                    mean_or_na([e.percent_agreement for e in entries]),
                    mean_or_na([e.spearman for e in entries if e.spearman is not None]),
                    mean_or_na([e.kappa for e in entries if e.kappa is not None]),
                ]
            )
        return buffer.getvalue()

    def to_text(self) -> str:
        lines = ["LESSON PLAN EVALUATION REPORT", ""]
        lines.append(f"Plans evaluated: {len(self.records)}")
        lines.append("")
        lines.append("Quality bands:")
        for band, _, _ in DEFAULT_BANDS:
            lines.append(f"  {band:<12} {self.band_counts.get(band, 0)}")
        lines.append("")
        lines.append("Per-subject scores:")
        for summary in self.subject_summaries:
            lines.append(
                f"  {summary.subject:<16} n={summary.plan_count}  "
                f"mean={summary.mean_percentage:.1f}%  "
                f"min={summary.min_percentage:.1f}%  max={summary.max_percentage:.1f}%  "
                f"quality-only mean={summary.mean_quality_only:.1f}%"
            )
        lines.append("")
        lines.append("Inter-rater agreement (pairwise, per plan):")
        if not self.agreement:
            lines.append("  n/a (fewer than two raters)")
        else:
            for label, values in (
                ("percent agreement", [e.percent_agreement for e in self.agreement]),
                ("spearman rho", [e.spearman for e in self.agreement if e.spearman is not None]),
                ("cohen kappa", [e.kappa for e in self.agreement if e.kappa is not None]),
            ):
                if len(values) >= 2:
                    q1, q2, q3 = statistics.quantiles(values, n=4)
                    lines.append(f"  {label:<18} Q1={q1:.3f}  median={q2:.3f}  Q3={q3:.3f}")
                elif values:
                    lines.append(f"  {label:<18} single value {values[0]:.3f}")
                else:
                    lines.append(f"  {label:<18} n/a")
        lines.append("")
        lines.append("Subject comparisons (Wilcoxon signed-rank, two-sided,")
        lines.append("plans paired by lesson index within subject):")
        if not self.subject_comparisons:
            lines.append("  n/a (needs two subjects with equal plan counts)")
        else:
            for cmp_entry in self.subject_comparisons:
                marker = "significant at 5%" if cmp_entry.significant_at_5pct else "not significant"
                lines.append(
                    f"  {cmp_entry.subject_a} vs {cmp_entry.subject_b}: "
                    f"W={cmp_entry.w:.1f}  p={cmp_entry.p_value:.5f}  "
                    f"n={cmp_entry.n_effective}  ({marker})"
                )
        lines.append("")
        return "\n".join(lines)

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "report.csv"
        txt_path = out_dir / "report.txt"
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        txt_path.write_text(self.to_text(), encoding="utf-8")
        return csv_path, txt_path


def evaluation_report(
    records: Sequence[EvaluationRecord],
    ratings: Sequence[RaterScore],
    rubric: Rubric,
) -> ReportDocument:
    """Aggregate per-plan records and ratings into the report document.

    Pairwise agreement is computed for every rater pair per plan; undefined
    statistics (degenerate inputs) are reported as n/a rather than failing
    the report.
    """
    if not records:
        raise EvaluationError("no evaluation records")
    ordered = tuple(sorted(records, key=lambda r: r.plan_id))

    by_plan: dict[str, list[RaterScore]] = {}
    for rating in ratings:
        by_plan.setdefault(rating.plan_id, []).append(rating)

    agreement: list[AgreementEntry] = []
    rater_counts: dict[str, int] = {}
    for record in ordered:
        plan_ratings = sorted(by_plan.get(record.plan_id, []), key=lambda r: r.rater_id)
        rater_counts[record.plan_id] = len(plan_ratings)
        for a, b in combinations(plan_ratings, 2):
            try:
                rho = spearman_correlation(a, b)
            except EvaluationError:
                rho = None
            try:
                kappa = cohen_kappa(a, b)
            except EvaluationError:
                kappa = None
            agreement.append(
                AgreementEntry(
                    plan_id=record.plan_id,
                    rater_a=a.rater_id,
                    rater_b=b.rater_id,
                    percent_agreement=percent_agreement(a, b),
                    spearman=rho,
                    kappa=kappa,
                )
            )

    by_subject: dict[str, list[EvaluationRecord]] = {}
    for record in ordered:
        by_subject.setdefault(subject_of_plan(record.plan_id), []).append(record)
    summaries = tuple(
        SubjectSummary(
            subject=subject,
            plan_count=len(group),
            mean_percentage=statistics.fmean(r.percentage for r in group),
            min_percentage=min(r.percentage for r in group),
            max_percentage=max(r.percentage for r in group),
            mean_quality_only=statistics.fmean(r.quality_only_percentage for r in group),
        )
        for subject, group in sorted(by_subject.items())
    )

    comparisons: list[SubjectComparison] = []
    subjects = sorted(by_subject)
    for sub_a, sub_b in combinations(subjects, 2):
        group_a = by_subject[sub_a]
        group_b = by_subject[sub_b]
        if len(group_a) != len(group_b) or len(group_a) < 2:
            continue
        result = wilcoxon_signed_rank(
            [r.percentage for r in group_a], [r.percentage for r in group_b]
        )
        comparisons.append(
            SubjectComparison(
                subject_a=sub_a,
                subject_b=sub_b,
                n_effective=result.n_effective,
                w=result.w,
                p_value=result.p_value,
                significant_at_5pct=result.p_value < 0.05,
            )
        )

    band_counts: dict[str, int] = {}
    for record in ordered:
        band_counts[record.band] = band_counts.get(record.band, 0) + 1

    return ReportDocument(
        records=ordered,
        rater_counts=rater_counts,
        agreement=tuple(agreement),
        subject_summaries=summaries,
        subject_comparisons=tuple(comparisons),
        band_counts=band_counts,
    )
