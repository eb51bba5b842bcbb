"""Lesson-plan generation pipeline: retrieve, prompt, generate, check.

The pipeline turns a teacher's request into retrieval evidence from the
subject's vector store, assembles a format-constrained prompt, calls the text
provider with retry-on-malformed-output, and attaches two hallucination
guards: an evidence-volume confidence report (page-equivalents of retrieved
source text) and a lexical topic-plausibility verdict.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Protocol

import numpy as np

from .planformat import LessonPlan, ParseError, parse_lesson_plan, truncate_to_first_period, validate_format
from .providers import TextProvider
from .store import ScoredChunk, VectorStore, top_k

CLASS_SIZES = ("<30", "30-60", ">60")

REQUIRED_PLACEHOLDERS = ("{{topic}}", "{{level}}", "{{periods}}", "{{class_size}}", "{{context}}")

NO_CONTEXT_MARKER = "NO CONTEXT FOUND"

LOW_EVIDENCE_WARNING = "LOW_EVIDENCE"
TOPIC_MISMATCH_WARNING = "TOPIC_MISMATCH"

# Words ignored by the lexical plausibility check.
STOP_WORDS = frozenset(
    """a about above after again all also an and any are as at be because been
    before being below between both but by can could did do does doing down
    during each few for from further had has have having he her here hers him
    his how i if in into is it its itself just me more most my no nor not of
    off on once only or other our out over own same she should so some such
    than that the their them then there these they this those through to too
    under until up very was we were what when where which while who whom why
    will with you your""".split()
)

_WORD_RE = re.compile(r"[a-z0-9]+")


class RequestError(ValueError):
    """Invalid lesson request; carries the offending field name."""

    def __init__(self, field_name: str, reason: str):
        super().__init__(f"{field_name}: {reason}")
        self.field = field_name
        self.reason = reason


class TemplateError(ValueError):
    """Prompt template is missing a required placeholder."""


class FormatFailureError(RuntimeError):
    """Every generation attempt produced structurally invalid output."""

    def __init__(self, attempts: int, last_error: str):
        super().__init__(f"format failure after {attempts - 1} retries ({attempts} attempts): {last_error}")
        self.attempts = attempts


class PipelineError(RuntimeError):
    """A pipeline stage failed; message is prefixed with the stage name."""

    def __init__(self, stage: str, message: str, cause: Exception | None = None):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.cause = cause


class Embedder(Protocol):
    @property
    def embedder_id(self) -> str: ...

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]: ...


@dataclass(frozen=True)
class LessonRequest:
    level: str
    subject: str
    periods: int
    class_size: str
    topic: str

    def __post_init__(self) -> None:
        from .corpus import LEVELS

        if self.level not in LEVELS:
            raise RequestError("level", f"must be one of {', '.join(LEVELS)}")
        if not self.subject or not self.subject.strip():
            raise RequestError("subject", "empty")
        if not isinstance(self.periods, int) or isinstance(self.periods, bool) or self.periods < 1:
            raise RequestError("periods", "must be a positive integer")
        if self.class_size not in CLASS_SIZES:
            raise RequestError("class_size", f"must be one of {', '.join(CLASS_SIZES)}")
        if not self.topic or not self.topic.strip():
            raise RequestError("topic", "empty")


@dataclass(frozen=True)
class RetrievalEvidence:
    scored_chunks: tuple[ScoredChunk, ...]
    distinct_pages: int
    total_source_chars: int
    query_vector_digest: str

    @property
    def chunk_count(self) -> int:
        return len(self.scored_chunks)


@dataclass(frozen=True)
class ConfidenceReport:
    chunk_count: int
    distinct_pages: int
    total_source_chars: int
    page_equivalents: float
    low_evidence: bool


@dataclass(frozen=True)
class PlausibilityVerdict:
    topic_evidence_overlap: float
    topic_plan_overlap: float
    suspicious: bool


@dataclass(frozen=True)
class GenerationResult:
    plan: LessonPlan
    raw_output: str
    evidence: RetrievalEvidence
    confidence: ConfidenceReport
    plausibility: PlausibilityVerdict
    retries_used: int
    warnings: tuple[str, ...]


@dataclass(frozen=True)
class GenerationConfig:
    """Pipeline defaults; every knob is recorded per result by callers that log."""

    k: int = 6
    min_sim: float = 0.0
    max_retries: int = 2
    chars_per_page: int = 1800
    low_evidence_page_threshold: float = 1.0
    overlap_threshold: float = 0.2
    template: str | None = None


@dataclass(frozen=True)
class Providers:
    embedder: Embedder
    llm: TextProvider


def default_template() -> str:
    return (resources.files("lessongen") / "templates" / "default_prompt.txt").read_text("utf-8")


def format_citation(page_start: int, page_end: int) -> str:
    if page_start == page_end:
        return f"p. {page_start}"
    return f"pp. {page_start}–{page_end}"


def retrieve_context(
    store: VectorStore,
    request: LessonRequest,
    k: int,
    min_sim: float,
    embedder: Embedder,
) -> RetrievalEvidence:
    """Embed the topic and aggregate the store's top-k chunks into evidence."""
    if store.subject != request.subject:
        raise ValueError(
            f"store subject {store.subject!r} does not match request subject {request.subject!r}"
        )
    query = embedder.embed_texts([request.topic])[0]
    scored = top_k(store, query, k=k, min_sim=min_sim)
    pages: set[int] = set()
    for item in scored:
        pages.update(range(item.chunk.page_start, item.chunk.page_end + 1))
    return RetrievalEvidence(
        scored_chunks=tuple(scored),
        distinct_pages=len(pages),
        total_source_chars=sum(item.chunk.char_count for item in scored),
        query_vector_digest=hashlib.sha256(np.asarray(query, dtype="<f4").tobytes()).hexdigest(),
    )


def compute_confidence(
    evidence: RetrievalEvidence,
    chars_per_page: int = 1800,
    low_evidence_page_threshold: float = 1.0,
) -> ConfidenceReport:
    """Convert retrieved volume into page-equivalents and flag thin evidence."""
    if chars_per_page <= 0:
        raise ValueError("chars_per_page must be > 0")
    page_equivalents = evidence.total_source_chars / chars_per_page
    return ConfidenceReport(
        chunk_count=evidence.chunk_count,
        distinct_pages=evidence.distinct_pages,
        total_source_chars=evidence.total_source_chars,
        page_equivalents=page_equivalents,
        low_evidence=page_equivalents < low_evidence_page_threshold,
    )


def format_context_block(evidence: RetrievalEvidence) -> str:
    if not evidence.scored_chunks:
        return NO_CONTEXT_MARKER
    parts = []
    for item in evidence.scored_chunks:
        citation = format_citation(item.chunk.page_start, item.chunk.page_end)
        parts.append(f"[Textbook excerpt, {citation}]\n{item.chunk.text}")
    return "\n\n".join(parts)


def assemble_prompt(request: LessonRequest, evidence: RetrievalEvidence, template: str) -> str:
    """Fill the prompt template; all retrieved chunk texts are embedded verbatim."""
    for placeholder in REQUIRED_PLACEHOLDERS:
        if placeholder not in template:
            raise TemplateError(f"template is missing required placeholder {placeholder}")
    return (
        template.replace("{{topic}}", request.topic.strip())
        .replace("{{subject}}", request.subject)
        .replace("{{level}}", request.level)
        .replace("{{periods}}", str(request.periods))
        .replace("{{class_size}}", request.class_size)
        .replace("{{context}}", format_context_block(evidence))
    )


def _structural_check(raw: str) -> str | None:
    """None when raw parses and validates; otherwise a description of the failure."""
    try:
        plan = parse_lesson_plan(raw)
    except ParseError as exc:
        return str(exc)
    report = validate_format(plan)
    if not report.valid:
        problems = list(report.missing_sections) + list(report.missing_keys) + list(
            report.structural_errors
        )
        return "invalid format: " + "; ".join(problems)
    return None


def generate_plan(llm_provider: TextProvider, prompt: str, max_retries: int) -> tuple[str, int]:
    """Call the provider until the output is structurally valid.

    Regeneration reuses the identical prompt. Returns the first valid raw
    output and the number of retries consumed; raises
    :class:`FormatFailureError` when all ``max_retries + 1`` attempts are
    malformed. Provider failures propagate untouched.
    """
    if max_retries < 0:
        raise ValueError("max_retries must be >= 0")
    last_failure = ""
    for attempt in range(max_retries + 1):
        raw = llm_provider.generate(prompt)
        failure = _structural_check(raw)
        if failure is None:
            return raw, attempt
        last_failure = failure
    raise FormatFailureError(attempts=max_retries + 1, last_error=last_failure)


def content_words(text: str) -> set[str]:
    return {w for w in _WORD_RE.findall(text.lower()) if w not in STOP_WORDS}


def plausibility_check(
    topic: str,
    evidence: RetrievalEvidence,
    plan: LessonPlan,
    overlap_threshold: float = 0.2,
) -> PlausibilityVerdict:
    """Lexical crosscheck of the requested topic against evidence and plan.

    Overlaps are the fraction of topic content-words found in the evidence
    texts and in the plan's topic plus learning objective; either falling
    below the threshold marks the result suspicious.
    """
    topic_words = content_words(topic)
    evidence_words: set[str] = set()
    for item in evidence.scored_chunks:
        evidence_words |= content_words(item.chunk.text)
    plan_text = (
        plan.general_information.get("topic", "")
        + " "
        + plan.preparation.get("learning_objective", "")
    )
    plan_words = content_words(plan_text)

    if topic_words:
        evidence_overlap = len(topic_words & evidence_words) / len(topic_words)
        plan_overlap = len(topic_words & plan_words) / len(topic_words)
    else:
        evidence_overlap = 0.0
        plan_overlap = 0.0
    return PlausibilityVerdict(
        topic_evidence_overlap=evidence_overlap,
        topic_plan_overlap=plan_overlap,
        suspicious=evidence_overlap < overlap_threshold or plan_overlap < overlap_threshold,
    )


def run_generation(
    stores: Mapping[str, VectorStore],
    request: LessonRequest,
    providers: Providers,
    config: GenerationConfig = GenerationConfig(),
) -> GenerationResult:
    """Full pipeline; errors are labeled with the failing stage."""
    store = stores.get(request.subject)
    if store is None:
        raise PipelineError("retrieve", f"no store for subject {request.subject!r}")

    try:
        evidence = retrieve_context(store, request, config.k, config.min_sim, providers.embedder)
    except Exception as exc:
        raise PipelineError("retrieve", str(exc), cause=exc) from exc

    confidence = compute_confidence(
        evidence, config.chars_per_page, config.low_evidence_page_threshold
    )

    try:
        template = config.template if config.template is not None else default_template()
        prompt = assemble_prompt(request, evidence, template)
    except TemplateError as exc:
        raise PipelineError("prompt", str(exc), cause=exc) from exc

    try:
        raw, retries_used = generate_plan(providers.llm, prompt, config.max_retries)
    except Exception as exc:
        raise PipelineError("generate", str(exc), cause=exc) from exc

    plan = truncate_to_first_period(parse_lesson_plan(raw))
    verdict = plausibility_check(request.topic, evidence, plan, config.overlap_threshold)

    warnings: list[str] = []
    if confidence.low_evidence:
        warnings.append(LOW_EVIDENCE_WARNING)
    if verdict.suspicious:
        warnings.append(TOPIC_MISMATCH_WARNING)

    return GenerationResult(
        plan=plan,
        raw_output=raw,
        evidence=evidence,
        confidence=confidence,
        plausibility=verdict,
        retries_used=retries_used,
        warnings=tuple(warnings),
    )
