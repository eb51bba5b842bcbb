"""Textbook corpus ingestion: page-delimited text loading, chunking, topic selection.

Corpus files are pre-extracted UTF-8 text with ``===PAGE n===`` delimiter lines
(n is the printed page number). The table of contents is a separate JSON file:
an ordered array of ``{title, page_start, page_end, subtopics: [...]}`` objects.
"""

from __future__ import annotations

import json
import re
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path

LEVELS = ("S1", "S2", "S3", "S4")
EDITIONS = ("student", "teacher")

_PAGE_DELIM = re.compile(r"^\s*===PAGE\s+(\d+)===\s*$")


class CorpusError(ValueError):
    """Raised for malformed corpus or table-of-contents inputs."""


@dataclass(frozen=True)
class TextbookDocument:
    """A textbook as an ordered list of (page_number, normalized_text) pairs."""

    subject: str
    level: str
    edition: str
    pages: tuple[tuple[int, str], ...]

    def __post_init__(self) -> None:
        if not self.subject:
            raise CorpusError("subject must be non-empty")
        if self.level not in LEVELS:
            raise CorpusError(f"unknown level {self.level!r}; expected one of {LEVELS}")
        if self.edition not in EDITIONS:
            raise CorpusError(f"unknown edition {self.edition!r}; expected one of {EDITIONS}")
        if not self.pages:
            raise CorpusError("document has no pages")
        numbers = [n for n, _ in self.pages]
        for prev, cur in zip(numbers, numbers[1:]):
            if cur <= prev:
                raise CorpusError(f"non-monotonic pages: {cur} follows {prev}")
        if numbers[0] < 1:
            raise CorpusError(f"page numbers must be positive, got {numbers[0]}")


@dataclass(frozen=True)
class Chunk:
    """A contiguous passage of textbook text, the unit of retrieval."""

    chunk_id: str
    subject: str
    text: str
    page_start: int
    page_end: int
    char_count: int

    def __post_init__(self) -> None:
        if not self.text:
            raise CorpusError("chunk text must be non-empty")
        if self.page_start > self.page_end:
            raise CorpusError("chunk page_start must not exceed page_end")
        if self.char_count != len(self.text):
            raise CorpusError("chunk char_count must equal text length")


@dataclass(frozen=True)
class TopicEntry:
    title: str
    page_start: int
    page_end: int
    subtopics: tuple["TopicEntry", ...] = ()

    def __post_init__(self) -> None:
        if not self.title:
            raise CorpusError("topic title must be non-empty")
        if self.page_start > self.page_end or self.page_start < 1:
            raise CorpusError(f"invalid page range for topic {self.title!r}")
        for sub in self.subtopics:
            if sub.page_start < self.page_start or sub.page_end > self.page_end:
                raise CorpusError(
                    f"subtopic {sub.title!r} page range exceeds parent {self.title!r}"
                )

    @property
    def page_span(self) -> int:
        return self.page_end - self.page_start + 1


@dataclass(frozen=True)
class TableOfContents:
    entries: tuple[TopicEntry, ...]

    def __post_init__(self) -> None:
        if not self.entries:
            raise CorpusError("table of contents is empty")
        starts = [e.page_start for e in self.entries]
        for prev, cur in zip(starts, starts[1:]):
            if cur < prev:
                raise CorpusError("table of contents entries are out of textbook order")


def _normalize_ws(text: str) -> str:
    # Collapse all whitespace runs (including line endings) so chunk boundaries
    # are stable across platforms.
    return " ".join(text.split())


def load_textbook(path: str | Path, subject: str, level: str, edition: str) -> TextbookDocument:
    """Load a page-delimited corpus file into a TextbookDocument.

    Whitespace within each page is normalized to single spaces at load time.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")
    raw = path.read_text(encoding="utf-8")

    pages: list[tuple[int, str]] = []
    current_number: int | None = None
    current_lines: list[str] = []

    def flush() -> None:
        if current_number is not None:
            pages.append((current_number, _normalize_ws("\n".join(current_lines))))

    for lineno, line in enumerate(raw.splitlines(), start=1):
        match = _PAGE_DELIM.match(line)
        if match:
            flush()
            current_number = int(match.group(1))
            current_lines = []
        elif line.lstrip().startswith("===PAGE"):
            raise CorpusError(f"{path}:{lineno}: malformed page delimiter {line.strip()!r}")
        elif current_number is None:
            if line.strip():
                raise CorpusError(f"{path}:{lineno}: content before first page delimiter")
        else:
            current_lines.append(line)
    flush()

    if not pages:
        raise CorpusError(f"empty corpus: {path} contains no page delimiters")
    if all(not text for _, text in pages):
        raise CorpusError(f"empty corpus: {path} contains no text")
    return TextbookDocument(subject=subject, level=level, edition=edition, pages=tuple(pages))


def document_text(doc: TextbookDocument) -> str:
    """Full normalized document text: page texts joined by single spaces."""
    return " ".join(text for _, text in doc.pages if text)


def _page_spans(doc: TextbookDocument) -> list[tuple[int, int, int]]:
    """(offset_start, offset_end, page_number) spans of each non-empty page in document_text."""
    spans: list[tuple[int, int, int]] = []
    offset = 0
    for number, text in doc.pages:
        if not text:
            continue
        if spans:
            offset += 1  # joiner space
        spans.append((offset, offset + len(text), number))
        offset += len(text)
    return spans


def chunk_document(doc: TextbookDocument, chunk_size: int = 1200, overlap: int = 200) -> list[Chunk]:
    """Split a document into overlapping chunks carrying page provenance.

    Consecutive chunks share exactly ``overlap`` characters; dropping the
    trailing overlap of each non-final chunk and concatenating reconstructs
    the normalized document text.
    """
    if overlap < 0:
        raise CorpusError("overlap must be >= 0")
    if chunk_size <= overlap:
        raise CorpusError(f"chunk_size ({chunk_size}) must exceed overlap ({overlap})")
    text = document_text(doc)
    if not text:
        raise CorpusError("document has no text to chunk")

    spans = _page_spans(doc)
    span_starts = [s for s, _, _ in spans]

    def page_range(lo: int, hi: int) -> tuple[int, int]:
        # Pages overlapping [lo, hi). A joiner space at the chunk's start counts
        # toward the preceding page and at its end toward the following page, so
        # the chunk text is always a substring of its joined page span.
        first = max(0, bisect_right(span_starts, lo) - 1)
        last = max(0, bisect_right(span_starts, hi - 1) - 1)
        if hi - 1 >= spans[last][1] and last + 1 < len(spans):
            last += 1
        return spans[first][2], spans[last][2]

    chunks: list[Chunk] = []
    start = 0
    index = 0
    n = len(text)
    while True:
        end = min(start + chunk_size, n)
        piece = text[start:end]
        p_start, p_end = page_range(start, end)
        chunks.append(
            Chunk(
                chunk_id=f"{doc.subject}:{index:05d}",
                subject=doc.subject,
                text=piece,
                page_start=p_start,
                page_end=p_end,
                char_count=len(piece),
            )
        )
        if end == n:
            break
        start = end - overlap
        index += 1
    return chunks


def _topic_from_json(obj: object, path: Path) -> TopicEntry:
    if not isinstance(obj, dict):
        raise CorpusError(f"{path}: TOC entry must be an object, got {type(obj).__name__}")
    try:
        title = obj["title"]
        page_start = obj["page_start"]
        page_end = obj["page_end"]
    except KeyError as exc:
        raise CorpusError(f"{path}: TOC entry missing key {exc}") from None
    subtopics = tuple(_topic_from_json(s, path) for s in obj.get("subtopics", []))
    if not isinstance(page_start, int) or not isinstance(page_end, int):
        raise CorpusError(f"{path}: TOC page bounds must be integers for {title!r}")
    return TopicEntry(title=str(title), page_start=page_start, page_end=page_end, subtopics=subtopics)


def load_toc(path: str | Path) -> TableOfContents:
    """Load a table of contents from its JSON file."""
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"TOC file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise CorpusError(f"{path}: TOC must be a JSON array")
    return TableOfContents(entries=tuple(_topic_from_json(e, path) for e in data))


def toc_to_json(toc: TableOfContents) -> str:
    def encode(entry: TopicEntry) -> dict:
        return {
            "title": entry.title,
            "page_start": entry.page_start,
            "page_end": entry.page_end,
            "subtopics": [encode(s) for s in entry.subtopics],
        }

    return json.dumps([encode(e) for e in toc.entries], indent=2)


def select_topics(
    toc: TableOfContents,
    count: int,
    stride: int,
    breadth_page_limit: int = 25,
) -> list[TopicEntry]:
    """Pick every ``stride``-th TOC entry, descending into the first subtopic
    when an entry spans more than ``breadth_page_limit`` pages.

    Selection starts at the first entry and is fully deterministic.
    """
    if count < 1:
        raise CorpusError("count must be >= 1")
    if stride < 1:
        raise CorpusError("stride must be >= 1")
    last_index = (count - 1) * stride
    if last_index >= len(toc.entries):
        raise CorpusError(
            f"cannot select {count} topics at stride {stride} "
            f"from {len(toc.entries)} entries"
        )
    selected: list[TopicEntry] = []
    for i in range(count):
        entry = toc.entries[i * stride]
        if entry.page_span > breadth_page_limit and entry.subtopics:
            entry = entry.subtopics[0]
        selected.append(entry)
    return selected
