"""Structured lesson plan documents in the Ugandan three-section format.

Raw model output uses a line-oriented markup:

    ## GENERAL INFORMATION
    Topic: Soil erosion
    Subject: Geography
    ...
    ## PREPARATION
    Learning Objective: ...
    ## PROCEDURE
    - [introduction|5] teacher: ... | learners: ...

A second ``## PREPARATION`` (or an explicit ``## PERIOD n`` heading) after a
completed procedure starts an extra period block. Unknown keys are preserved;
unknown lines are ignored. The archival representation is JSON and
round-trips exactly through :func:`plan_from_json`.
"""

from __future__ import annotations

import html
import json
import re
from dataclasses import dataclass, replace

PHASES = ("introduction", "development", "wrap_up_and_assessment")

GENERAL_REQUIRED_KEYS = ("topic", "subject", "level", "class_size", "periods", "date_placeholder")
PREPARATION_REQUIRED_KEYS = ("learning_objective", "materials", "references")

RENDER_MODES = ("display_markup", "plain_text", "archival_json")

_HEADING = re.compile(r"^\s*#{1,6}\s*(?P<title>[^#].*?)\s*$")
_KEY_VALUE = re.compile(r"^(?P<key>[A-Za-z][A-Za-z0-9 /&'()_-]{0,60})\s*:\s*(?P<value>.*)$")
_PROCEDURE_ROW = re.compile(
    r"^\s*[-*]\s*\[\s*(?P<phase>[^|\]]+?)\s*\|\s*(?P<minutes>\d+)\s*(?:min(?:ute)?s?)?\s*\]"
    r"\s*teacher\s*:\s*(?P<teacher>.*?)\s*\|\s*learners?\s*:\s*(?P<learners>.*?)\s*$",
    re.IGNORECASE,
)
_PERIOD_HEADING = re.compile(r"^PERIOD\s+\d+$")

_KEY_ALIASES = {
    "date": "date_placeholder",
    "class": "level",
    "class_level": "level",
    "number_of_periods": "periods",
    "key_unit_competence": "learning_objective",
}

_PHASE_ALIASES = {
    "introduction": "introduction",
    "intro": "introduction",
    "development": "development",
    "wrap up and assessment": "wrap_up_and_assessment",
    "wrapup and assessment": "wrap_up_and_assessment",
    "wrap up": "wrap_up_and_assessment",
    "conclusion": "wrap_up_and_assessment",
}

_DISPLAY_KEYS = {
    "topic": "Topic",
    "subject": "Subject",
    "level": "Level",
    "class_size": "Class Size",
    "periods": "Periods",
    "date_placeholder": "Date",
    "learning_objective": "Learning Objective",
    "materials": "Materials",
    "references": "References",
}

_PHASE_LABELS = {
    "introduction": "introduction",
    "development": "development",
    "wrap_up_and_assessment": "wrap-up and assessment",
}


class ParseError(ValueError):
    """Structural parse failure; the trigger for generation retry."""


@dataclass(frozen=True)
class ProcedureStep:
    phase: str
    minutes: int
    teacher_activity: str
    learner_activity: str

    def __post_init__(self) -> None:
        if self.phase not in PHASES:
            raise ParseError(f"unknown procedure phase {self.phase!r}")
        if self.minutes <= 0:
            raise ParseError("procedure step minutes must be positive")


@dataclass(frozen=True)
class PeriodPlan:
    """Preparation and procedure of one period beyond the first."""

    preparation: dict[str, str]
    procedure: tuple[ProcedureStep, ...]


@dataclass(frozen=True)
class LessonPlan:
    general_information: dict[str, str]
    preparation: dict[str, str]
    procedure: tuple[ProcedureStep, ...]
    extra_periods: tuple[PeriodPlan, ...] = ()


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    missing_sections: tuple[str, ...]
    missing_keys: tuple[str, ...]
    structural_errors: tuple[str, ...]


def _normalize_key(raw: str) -> str:
    key = re.sub(r"[^a-z0-9]+", "_", raw.strip().lower()).strip("_")
    return _KEY_ALIASES.get(key, key)


def _normalize_phase(raw: str) -> str | None:
    token = re.sub(r"[^a-z0-9]+", " ", raw.strip().lower()).strip()
    return _PHASE_ALIASES.get(token)


def _heading_kind(line: str) -> str | None:
    match = _HEADING.match(line)
    if not match:
        return None
    title = re.sub(r"\s+", " ", match.group("title").rstrip(":").strip()).upper()
    if title == "GENERAL INFORMATION":
        return "general"
    if title == "PREPARATION":
        return "preparation"
    if title == "PROCEDURE":
        return "procedure"
    if _PERIOD_HEADING.match(title):
        return "period"
    return "unknown"


def parse_lesson_plan(raw: str) -> LessonPlan:
    """Parse raw headed-section markup into a LessonPlan.

    Raises :class:`ParseError` when any of the three mandatory section
    headings is absent; missing keys and empty procedures are left to
    :func:`validate_format`.
    """
    if not raw or not raw.strip():
        raise ParseError("empty output")

    general: dict[str, str] = {}
    periods: list[dict] = [{"preparation": {}, "procedure": []}]
    seen = {"general": False, "preparation": False, "procedure": False}
    section: str | None = None
    last_key: str | None = None

    def current() -> dict:
        return periods[-1]

    def start_new_period() -> None:
        periods.append({"preparation": {}, "procedure": []})

    for line in raw.splitlines():
        kind = _heading_kind(line)
        if kind == "unknown":
            continue
        if kind is not None:
            last_key = None
            if kind == "general":
                section = "general"
                seen["general"] = True
            elif kind == "period":
                if current()["procedure"] or current()["preparation"]:
                    start_new_period()
                section = None
            elif kind == "preparation":
                if current()["procedure"]:
                    start_new_period()
                section = "preparation"
                seen["preparation"] = True
            elif kind == "procedure":
                if current()["procedure"]:
                    start_new_period()
                section = "procedure"
                seen["procedure"] = True
            continue

        if section is None:
            continue
        stripped = line.strip()
        if not stripped:
            last_key = None
            continue

        if section == "procedure":
            row = _PROCEDURE_ROW.match(line)
            if not row:
                continue
            phase = _normalize_phase(row.group("phase"))
            minutes = int(row.group("minutes"))
            if phase is None or minutes <= 0:
                continue
            current()["procedure"].append(
                ProcedureStep(
                    phase=phase,
                    minutes=minutes,
                    teacher_activity=row.group("teacher").strip(),
                    learner_activity=row.group("learners").strip(),
                )
            )
            continue

        target = general if section == "general" else current()["preparation"]
        kv = _KEY_VALUE.match(stripped)
        if kv:
            key = _normalize_key(kv.group("key"))
            if key:
                # First occurrence wins so a stray repeated section cannot
                # overwrite period-one information.
                target.setdefault(key, kv.group("value").strip())
                last_key = key
                continue
        if last_key is not None:
            target[last_key] = (target[last_key] + " " + stripped).strip()

    missing = [name for name, ok in (("GENERAL INFORMATION", seen["general"]),
                                     ("PREPARATION", seen["preparation"]),
                                     ("PROCEDURE", seen["procedure"])) if not ok]
    if missing:
        raise ParseError(f"no recognizable sections: missing heading(s) {', '.join(missing)}")

    first = periods[0]
    extras = tuple(
        PeriodPlan(preparation=dict(p["preparation"]), procedure=tuple(p["procedure"]))
        for p in periods[1:]
        if p["preparation"] or p["procedure"]
    )
    return LessonPlan(
        general_information=general,
        preparation=dict(first["preparation"]),
        procedure=tuple(first["procedure"]),
        extra_periods=extras,
    )


def validate_format(plan: LessonPlan) -> ValidationReport:
    """Enumerate every missing mandatory section, key, and structural defect."""
    missing_sections: list[str] = []
    missing_keys: list[str] = []
    structural: list[str] = []

    if not plan.general_information:
        missing_sections.append("general_information")
    if not plan.preparation:
        missing_sections.append("preparation")

    for key in GENERAL_REQUIRED_KEYS:
        if not plan.general_information.get(key, "").strip():
            missing_keys.append(key)
    for key in PREPARATION_REQUIRED_KEYS:
        if not plan.preparation.get(key, "").strip():
            missing_keys.append(key)

    if not plan.procedure:
        structural.append("procedure has no steps")
    else:
        present = {step.phase for step in plan.procedure}
        for phase in PHASES:
            if phase not in present:
                structural.append(f"procedure lacks a {_PHASE_LABELS[phase]} step")
        for i, step in enumerate(plan.procedure):
            if not step.teacher_activity.strip():
                structural.append(f"procedure step {i + 1} has no teacher activity")
            if not step.learner_activity.strip():
                structural.append(f"procedure step {i + 1} has no learner activity")

    return ValidationReport(
        valid=not (missing_sections or missing_keys or structural),
        missing_sections=tuple(missing_sections),
        missing_keys=tuple(missing_keys),
        structural_errors=tuple(structural),
    )


def truncate_to_first_period(plan: LessonPlan) -> LessonPlan:
    """Drop any periods beyond the first; idempotent, period one untouched."""
    if not plan.extra_periods:
        return plan
    return replace(plan, extra_periods=())


def _display_key(key: str) -> str:
    return _DISPLAY_KEYS.get(key, key.replace("_", " ").title())


def _render_plain(plan: LessonPlan) -> str:
    lines: list[str] = ["## GENERAL INFORMATION"]
    lines.extend(f"{_display_key(k)}: {v}" for k, v in plan.general_information.items())

    def emit_period(preparation: dict[str, str], procedure: tuple[ProcedureStep, ...]) -> None:
        lines.append("")
        lines.append("## PREPARATION")
        lines.extend(f"{_display_key(k)}: {v}" for k, v in preparation.items())
        lines.append("")
        lines.append("## PROCEDURE")
        for step in procedure:
            lines.append(
                f"- [{_PHASE_LABELS[step.phase]}|{step.minutes}] "
                f"teacher: {step.teacher_activity} | learners: {step.learner_activity}"
            )

    emit_period(plan.preparation, plan.procedure)
    for i, period in enumerate(plan.extra_periods, start=2):
        lines.append("")
        lines.append(f"## PERIOD {i}")
        emit_period(period.preparation, period.procedure)
    return "\n".join(lines) + "\n"


def _render_display(plan: LessonPlan) -> str:
    esc = html.escape

    def kv_section(title: str, mapping: dict[str, str]) -> list[str]:
        out = [f'<section class="plan-section"><h2>{title}</h2><dl>']
        for key, value in mapping.items():
            out.append(f"<dt>{esc(_display_key(key))}</dt><dd>{esc(value)}</dd>")
        out.append("</dl></section>")
        return out

    def procedure_section(procedure: tuple[ProcedureStep, ...]) -> list[str]:
        out = ['<section class="plan-section"><h2>Procedure</h2>']
        out.append("<table><thead><tr><th>Phase</th><th>Min</th>"
                   "<th>Teacher activity</th><th>Learner activity</th></tr></thead><tbody>")
        for step in procedure:
            out.append(
                f"<tr><td>{esc(_PHASE_LABELS[step.phase].capitalize())}</td>"
                f"<td>{step.minutes}</td>"
                f"<td>{esc(step.teacher_activity)}</td>"
                f"<td>{esc(step.learner_activity)}</td></tr>"
            )
        out.append("</tbody></table></section>")
        return out

    parts = ['<article class="lesson-plan">']
    parts += kv_section("General Information", plan.general_information)
    parts += kv_section("Preparation", plan.preparation)
    parts += procedure_section(plan.procedure)
    for i, period in enumerate(plan.extra_periods, start=2):
        parts.append(f'<section class="plan-section"><h2>Period {i}</h2></section>')
        parts += kv_section(f"Preparation (period {i})", period.preparation)
        parts += procedure_section(period.procedure)
    parts.append("</article>")
    return "".join(parts)


def plan_to_dict(plan: LessonPlan) -> dict:
    def steps(procedure: tuple[ProcedureStep, ...]) -> list[dict]:
        return [
            {
                "phase": s.phase,
                "minutes": s.minutes,
                "teacher_activity": s.teacher_activity,
                "learner_activity": s.learner_activity,
            }
            for s in procedure
        ]

    return {
        "general_information": dict(plan.general_information),
        "preparation": dict(plan.preparation),
        "procedure": steps(plan.procedure),
        "extra_periods": [
            {"preparation": dict(p.preparation), "procedure": steps(p.procedure)}
            for p in plan.extra_periods
        ],
    }


def plan_from_dict(obj: dict) -> LessonPlan:
    try:
        def steps(rows: list) -> tuple[ProcedureStep, ...]:
            return tuple(
                ProcedureStep(
                    phase=row["phase"],
                    minutes=int(row["minutes"]),
                    teacher_activity=str(row["teacher_activity"]),
                    learner_activity=str(row["learner_activity"]),
                )
                for row in rows
            )

        return LessonPlan(
            general_information={str(k): str(v) for k, v in obj["general_information"].items()},
            preparation={str(k): str(v) for k, v in obj["preparation"].items()},
            procedure=steps(obj["procedure"]),
            extra_periods=tuple(
                PeriodPlan(
                    preparation={str(k): str(v) for k, v in p["preparation"].items()},
                    procedure=steps(p["procedure"]),
                )
                for p in obj.get("extra_periods", [])
            ),
        )
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed archival plan: {exc}") from exc


def plan_from_json(text: str) -> LessonPlan:
    """Reader for the archival JSON produced by ``render_plan(..., "archival_json")``."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed archival plan: {exc}") from exc
    return plan_from_dict(obj)


def render_plan(plan: LessonPlan, mode: str) -> str:
    """Render a plan as sanitized display markup, plain text, or archival JSON."""
    if mode == "display_markup":
        return _render_display(plan)
    if mode == "plain_text":
        return _render_plain(plan)
    if mode == "archival_json":
        return json.dumps(plan_to_dict(plan), ensure_ascii=False, indent=2) + "\n"
    raise ValueError(f"unknown render mode {mode!r}; expected one of {RENDER_MODES}")
