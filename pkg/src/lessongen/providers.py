"""Text-generation providers: HTTP client, deterministic mock, scripted stub.

The wire contract mirrors the embedding provider: ``POST {base_url}/generate``
with ``{"model": ..., "prompt": ..., "max_tokens": ...}`` returning
``{"text": ...}``. The mock provider enables network-free end-to-end runs: it
scrapes the request fields and context citations out of the assembled prompt
and fills a fixed lesson-plan template, so its output is a pure function of
the prompt.
"""

from __future__ import annotations

import re
import threading
import time
from typing import Protocol

import httpx

from .embeddings import ProviderConfig, ProviderError, post_json_with_retries


class TextProvider(Protocol):
    def generate(self, prompt: str) -> str: ...


class HttpLlmProvider:
    """LLM provider client; retry semantics shared with the embedding client."""

    def __init__(
        self,
        config: ProviderConfig,
        *,
        max_tokens: int = 2048,
        max_concurrency: int = 4,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        self.config = config
        self.max_tokens = max_tokens
        self._semaphore = threading.Semaphore(max_concurrency)
        self._sleep = sleep
        self._client = httpx.Client(timeout=config.timeout_ms / 1000.0, transport=transport)

    def close(self) -> None:
        self._client.close()

    def generate(self, prompt: str) -> str:
        url = self.config.base_url.rstrip("/") + "/generate"
        response = post_json_with_retries(
            self._client,
            url,
            {"model": self.config.model_name, "prompt": prompt, "max_tokens": self.max_tokens},
            self.config,
            semaphore=self._semaphore,
            sleep=self._sleep,
        )
        try:
            text = response.json()["text"]
        except (KeyError, ValueError) as exc:
            raise ProviderError(f"malformed generate response: {exc}") from exc
        if not isinstance(text, str):
            raise ProviderError("generate response 'text' is not a string")
        return text


class ScriptedLlmProvider:
    """Returns queued outputs in order; queue entries that are exceptions are raised.

    Test double for retry and failure paths; counts calls.
    """

    def __init__(self, outputs: list[str | Exception], *, repeat_last: bool = False):
        if not outputs:
            raise ValueError("scripted provider needs at least one output")
        self._outputs = list(outputs)
        self._repeat_last = repeat_last
        self._lock = threading.Lock()
        self.call_count = 0

    def generate(self, prompt: str) -> str:
        with self._lock:
            self.call_count += 1
            if self._outputs:
                item = self._outputs.pop(0)
                self._last = item
            elif self._repeat_last:
                item = self._last
            else:
                raise AssertionError("scripted provider exhausted")
        if isinstance(item, Exception):
            raise item
        return item


_FIELD_PATTERNS = {
    "topic": re.compile(r"^Topic:\s*(.+)$", re.MULTILINE),
    "subject": re.compile(r"^Subject:\s*(.+)$", re.MULTILINE),
    "level": re.compile(r"^Level:\s*(.+)$", re.MULTILINE),
    "class_size": re.compile(r"^Class size:\s*(.+)$", re.MULTILINE),
    "periods": re.compile(r"^Periods:\s*(.+)$", re.MULTILINE),
}
_CITATION = re.compile(r"\[Textbook excerpt, (pp?\.\s*[0-9–-]+)\]")


class MockLlmProvider:
    """Deterministic offline provider producing well-formed lesson plans.

    Coupled to the default prompt template's field markers; unknown prompts
    fall back to placeholder values but still yield parseable output.
    """

    def generate(self, prompt: str) -> str:
        fields = {}
        for name, pattern in _FIELD_PATTERNS.items():
            match = pattern.search(prompt)
            fields[name] = match.group(1).strip() if match else ""
        topic = fields["topic"] or "the selected topic"
        subject = fields["subject"] or "General Studies"
        level = fields["level"] or "S1"
        class_size = fields["class_size"] or ">60"
        try:
            periods = max(1, int(fields["periods"]))
        except ValueError:
            periods = 1

        citations = _CITATION.findall(prompt)
        references = (
            "Approved textbook, " + ", ".join(dict.fromkeys(citations))
            if citations
            else "Approved class textbook"
        )

        def period_body() -> list[str]:
            return [
                "## PREPARATION",
                "Learning Objective: By the end of the lesson, the learner should be able to "
                f"explain {topic} using examples from the textbook.",
                "Materials: Textbook, chalkboard, learner notebooks",
                f"References: {references}",
                "",
                "## PROCEDURE",
                f"- [introduction|5] teacher: Reviews the previous lesson and introduces {topic} "
                "| learners: Answer recap questions",
                f"- [development|25] teacher: Guides group work on {topic} using the textbook "
                "excerpts | learners: Work in groups and present their findings",
                "- [wrap-up and assessment|10] teacher: Asks assessment questions and summarises "
                "the key points | learners: Answer the questions and record the summary",
            ]

        lines = [
            "## GENERAL INFORMATION",
            f"Topic: {topic}",
            f"Subject: {subject}",
            f"Level: {level}",
            f"Class Size: {class_size}",
            f"Periods: {periods}",
            "Date: ____________",
            "",
        ]
        lines.extend(period_body())
        for n in range(2, periods + 1):
            lines.extend(["", f"## PERIOD {n}", ""])
            lines.extend(period_body())
        return "\n".join(lines) + "\n"
