"""Shared fixtures: deterministic synthetic textbooks, stores, and plan markup."""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from lessongen.corpus import chunk_document, load_textbook
from lessongen.embeddings import OfflineEmbedder
from lessongen.store import IngestionMeta, build_store, persist_store

_SYLLABLES = [c + v for c in "bcdfgklmnprstvz" for v in "aeiou"]

VALID_RAW = """## GENERAL INFORMATION
Topic: Soil erosion
Subject: Geography
Level: S1
Class Size: >60
Periods: 1
Date: ____________

## PREPARATION
Learning Objective: By the end of the lesson, the learner should be able to describe soil erosion and its causes.
Materials: Textbook, chalkboard, soil samples
References: Student's book pp. 41-44

## PROCEDURE
- [introduction|5] teacher: Asks learners what happens to soil in heavy rain | learners: Share observations
- [development|25] teacher: Demonstrates erosion with a soil sample and water | learners: Observe and record findings in groups
- [wrap-up and assessment|10] teacher: Asks assessment questions and summarises causes | learners: Answer and copy the summary
"""


def pseudo_word(rng: random.Random, used: set[str] | None = None) -> str:
    while True:
        word = "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 4)))
        if used is None:
            return word
        if word not in used:
            used.add(word)
            return word


def _topic_page(rng: random.Random, title_words: list[str], support: list[str]) -> str:
    w0, w1 = title_words
    templates = [
        f"The {w0} {w1} shows how {support[0]} supports {support[1]} in practice.",
        f"Learners study {w0} {w1} by comparing {support[2]} with {support[3]}.",
        f"A clear example of {w0} {w1} appears when {support[0]} meets {support[2]}.",
        f"Teachers link {w0} {w1} to everyday use of {support[1]} and {support[3]}.",
        f"Records of {w0} {w1} describe {support[0]}, {support[1]} and {support[2]}.",
        f"Exercises on {w0} {w1} ask learners to explain {support[3]} step by step.",
        f"The chapter on {w0} {w1} closes with questions about {support[0]}.",
        f"Communities value {w0} {w1} because it improves {support[1]} over time.",
    ]
    rng.shuffle(templates)
    return " ".join(templates)


def build_subject_fixture(
    subject: str,
    seed: int,
    n_topics: int = 16,
    thin_index: int | None = None,
    thin_title: str | None = None,
) -> tuple[str, list[dict]]:
    """Deterministic corpus text plus TOC entries for one subject.

    Each topic owns two ~900-char pages built from its private vocabulary;
    the optional thin topic owns a single short page (well under one
    page-equivalent of text) to model an under-covered topic.
    """
    rng = random.Random(seed)
    used: set[str] = set()
    corpus_lines: list[str] = []
    toc: list[dict] = []
    page_no = 1
    for i in range(n_topics):
        words = [pseudo_word(rng, used) for _ in range(6)]
        title = f"{words[0].capitalize()} {words[1]}"
        if i == thin_index:
            if thin_title is not None:
                title = thin_title
            lead = title.split()[0].lower()
            corpus_lines.append(f"===PAGE {page_no}===")
            corpus_lines.append(
                f"Notes mention {lead} briefly. Little about {lead} was recorded, "
                f"and {lead} remains a short aside next to {words[2]}."
            )
            toc.append({"title": title, "page_start": page_no, "page_end": page_no, "subtopics": []})
            page_no += 1
            continue
        start = page_no
        for _ in range(2):
            corpus_lines.append(f"===PAGE {page_no}===")
            corpus_lines.append(_topic_page(rng, words[:2], words[2:]))
            page_no += 1
        toc.append({"title": title, "page_start": start, "page_end": page_no - 1, "subtopics": []})
    return "\n".join(corpus_lines) + "\n", toc


def write_subject_fixture(
    directory: Path,
    subject: str,
    seed: int,
    n_topics: int = 16,
    thin_index: int | None = None,
    thin_title: str | None = None,
) -> tuple[Path, Path]:
    corpus_text, toc = build_subject_fixture(subject, seed, n_topics, thin_index, thin_title)
    corpus_path = directory / f"{subject.lower()}_corpus.txt"
    toc_path = directory / f"{subject.lower()}_toc.json"
    corpus_path.write_text(corpus_text, encoding="utf-8")
    toc_path.write_text(json.dumps(toc, indent=2), encoding="utf-8")
    return corpus_path, toc_path


FIXTURE_SUBJECTS = (
    # (subject, level, edition, seed, thin_index, thin_title)
    ("History", "S1", "student", 101, 12, "Kenya"),
    ("Mathematics", "S1", "student", 202, None, None),
    ("ICT", "S1", "teacher", 303, None, None),
)

FIXTURE_CHUNK_SIZE = 700
FIXTURE_OVERLAP = 100


def ingest_subject(
    root: Path,
    subject: str,
    level: str,
    edition: str,
    corpus_path: Path,
    toc_path: Path,
    dim: int = 64,
) -> Path:
    """Library-level ingest used by fixtures (mirrors the CLI ingest command)."""
    document = load_textbook(corpus_path, subject=subject, level=level, edition=edition)
    chunks = chunk_document(document, chunk_size=FIXTURE_CHUNK_SIZE, overlap=FIXTURE_OVERLAP)
    embedder = OfflineEmbedder(dim=dim)
    vectors = embedder.embed_texts([c.text for c in chunks])
    store = build_store(
        subject,
        chunks,
        vectors,
        IngestionMeta(
            level=level,
            edition=edition,
            chunk_size=FIXTURE_CHUNK_SIZE,
            overlap=FIXTURE_OVERLAP,
            embedder_id=embedder.embedder_id,
        ),
    )
    out_dir = root / subject
    persist_store(store, out_dir)
    (out_dir / "toc.json").write_text(toc_path.read_text(encoding="utf-8"), encoding="utf-8")
    return out_dir


@pytest.fixture(scope="session")
def fixture_sources(tmp_path_factory) -> Path:
    """Corpus and TOC files for the three fixture subjects."""
    directory = tmp_path_factory.mktemp("fixture-sources")
    for subject, _level, _edition, seed, thin_index, thin_title in FIXTURE_SUBJECTS:
        write_subject_fixture(directory, subject, seed, 16, thin_index, thin_title)
    return directory


@pytest.fixture(scope="session")
def three_subject_stores(tmp_path_factory, fixture_sources) -> Path:
    """A stores root with History, Mathematics and ICT stores plus TOCs."""
    root = tmp_path_factory.mktemp("stores")
    for subject, level, edition, _seed, _thin, _title in FIXTURE_SUBJECTS:
        ingest_subject(
            root,
            subject,
            level,
            edition,
            fixture_sources / f"{subject.lower()}_corpus.txt",
            fixture_sources / f"{subject.lower()}_toc.json",
        )
    return root


@pytest.fixture
def valid_raw() -> str:
    return VALID_RAW
