"""Acceptance criteria, one test per criterion, offline providers only.

Each test prints a single PASS line on success (visible with `pytest -s`
or in verbose test listings); tolerances are pinned in the assertions.
"""

from __future__ import annotations

import asyncio
import json
import random
import threading
import time

import httpx
import numpy as np
import pytest
from fastapi.testclient import TestClient

from lessongen.cli import main
from lessongen.corpus import Chunk, load_toc, select_topics
from lessongen.embeddings import OfflineEmbedder, ProviderUnavailable
from lessongen.generation import (
    GenerationConfig,
    LessonRequest,
    Providers,
    generate_plan,
    run_generation,
)
from lessongen.lpap import (
    classify_band,
    cohen_kappa,
    default_rubric,
    percent_agreement,
    score_percentage,
    score_presence_items,
    spearman_correlation,
    wilcoxon_signed_rank,
)
from lessongen.planformat import (
    LessonPlan,
    ProcedureStep,
    parse_lesson_plan,
    plan_from_json,
    validate_format,
)
from lessongen.providers import MockLlmProvider, ScriptedLlmProvider
from lessongen.store import (
    IngestionMeta,
    StoreIntegrityError,
    build_store,
    load_store,
    persist_store,
    top_k,
)

from conftest import VALID_RAW
from test_lpap import (
    oracle_kappa,
    oracle_percent_agreement,
    oracle_spearman,
    oracle_wilcoxon,
    rater_subset,
)
from test_store import brute_force_top_k, make_chunk

META = IngestionMeta(level="S1", edition="student", chunk_size=1200, overlap=200, embedder_id="offline-3gram-64")

RUBRIC = default_rubric()


def report(criterion: int, text: str) -> None:
    print(f"ACCEPTANCE {criterion} PASS: {text}")


def test_criterion_01_retrieval_exactness():
    rng = np.random.default_rng(1001)
    py_rng = random.Random(1001)
    started = time.monotonic()
    store_count = 0
    for trial in range(100):
        if trial < 80:
            n = int(rng.integers(1, 61))
        elif trial < 95:
            n = int(rng.integers(61, 401))
        else:
            n = 1000
        dim = int(py_rng.choice([8, 16, 32, 64]))
        matrix = rng.normal(size=(n, dim)).astype(np.float32)
        if n >= 4 and trial % 3 == 0:
            matrix[1] = matrix[0]  # exact duplicates exercise the tie-break rule
            matrix[3] = matrix[2]
        chunks = [make_chunk(i) for i in range(n)]
        store = build_store("History", chunks, [matrix[i] for i in range(n)], META)
        store_count += 1

        for _ in range(2):
            if py_rng.random() < 0.3 and n >= 2:
                query = np.array(matrix[py_rng.randrange(n)])
            else:
                query = rng.normal(size=dim).astype(np.float32)
            k = py_rng.choice([1, 5, 10, n])
            min_sim = py_rng.choice([-1.0, 0.0, 0.2])
            got = top_k(store, query, k=k, min_sim=min_sim)
            expected = brute_force_top_k(store, query, k=k, min_sim=min_sim)
            assert [s.chunk.chunk_id for s in got] == [cid for cid, _ in expected]
            for scored, (_, sim) in zip(got, expected):
                assert abs(scored.score - sim) <= 1e-6
    elapsed = time.monotonic() - started
    assert store_count >= 100
    assert elapsed < 30.0
    report(1, f"top_k equals brute-force oracle on {store_count} stores in {elapsed:.1f}s")


def test_criterion_02_persistence_round_trip_and_corruption(tmp_path):
    rng = np.random.default_rng(2002)
    py_rng = random.Random(2002)
    started = time.monotonic()
    for trial in range(50):
        n = int(rng.integers(1, 80))
        dim = int(py_rng.choice([8, 16, 32]))
        chunks = [make_chunk(i) for i in range(n)]
        vectors = [rng.normal(size=dim).astype(np.float32) for _ in range(n)]
        store = build_store("History", chunks, vectors, META)

        first_dir = tmp_path / f"s{trial}a"
        second_dir = tmp_path / f"s{trial}b"
        persist_store(store, first_dir)
        persist_store(store, second_dir)
        assert (first_dir / "vectors.bin").read_bytes() == (second_dir / "vectors.bin").read_bytes()

        loaded = load_store(first_dir)
        assert loaded.manifest == store.manifest
        assert [r.chunk for r in loaded.records] == [r.chunk for r in store.records]
        for a, b in zip(loaded.records, store.records):
            assert np.array_equal(a.vector, b.vector)

        target = py_rng.choice(["vectors.bin", "chunks.jsonl"])
        path = second_dir / target
        data = bytearray(path.read_bytes())
        data[py_rng.randrange(len(data))] ^= 1 << py_rng.randrange(8)
        path.write_bytes(bytes(data))
        with pytest.raises(StoreIntegrityError):
            load_store(second_dir)
    elapsed = time.monotonic() - started
    assert elapsed < 10.0
    report(2, f"50 round trips bit-exact, all single-byte corruptions detected in {elapsed:.1f}s")


def test_criterion_03_lpap_arithmetic_anchors():
    assert score_percentage(44, RUBRIC) == 100.0
    assert score_percentage(33, RUBRIC) == 75.0
    assert classify_band(score_percentage(33, RUBRIC)) == "good"
    assert classify_band(85.0) == "very_good"
    assert classify_band(92.0) == "excellent"
    assert score_percentage(28.6, RUBRIC) == 65.0
    report(3, "44->100%, 33->75%/good, 85->very_good, 92->excellent, 28.6->65% exact")


def test_criterion_04_statistics_oracle_equivalence():
    rng = random.Random(4004)
    started = time.monotonic()
    for _ in range(500):
        xs = [rng.randint(0, 2) for _ in range(22)]
        ys = [rng.randint(0, 2) for _ in range(22)]
        a, b = rater_subset(xs), rater_subset(ys, "s")
        assert abs(percent_agreement(a, b) - oracle_percent_agreement(xs, ys)) <= 1e-9
        if len(set(xs)) >= 2 and len(set(ys)) >= 2:
            assert abs(spearman_correlation(a, b) - oracle_spearman(xs, ys)) <= 1e-9
        if not (xs == ys and len(set(xs)) == 1):
            assert abs(cohen_kappa(a, b) - oracle_kappa(xs, ys)) <= 1e-9

    checked = 0
    for n in range(1, 13):
        for _ in range(20):
            x = [rng.randint(0, 8) / 2 for _ in range(n)]
            y = [rng.randint(0, 8) / 2 for _ in range(n)]
            expected_w, expected_p, expected_n = oracle_wilcoxon(x, y)
            got = wilcoxon_signed_rank(x, y)
            assert got.n_effective == expected_n
            assert abs(got.w - expected_w) <= 1e-12
            assert abs(got.p_value - expected_p) <= 1e-12
            checked += 1
    elapsed = time.monotonic() - started
    assert elapsed < 60.0
    report(4, f"500 rater pairs within 1e-9; {checked} Wilcoxon enumerations within 1e-12 in {elapsed:.1f}s")


def test_criterion_05_batch_protocol_fidelity(three_subject_stores, tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"offline_embedder": True, "offline_dim": 64, "mock_llm": True}))

    outputs = []
    for run in ("one", "two"):
        out = tmp_path / run
        code = main(
            ["batch", "--stores", str(three_subject_stores), "--out", str(out), "--config", str(config_path)]
        )
        assert code == 0
        outputs.append(out)

    plans = sorted(outputs[0].glob("*.plan.json"))
    assert len(plans) == 24
    manifest = json.loads((outputs[0] / "batch_manifest.json").read_text())
    rows = manifest["plans"]
    assert len(rows) == 24
    per_subject: dict[str, list[dict]] = {}
    for row in rows:
        per_subject.setdefault(row["subject"], []).append(row)
    assert {s: len(r) for s, r in per_subject.items()} == {"History": 8, "ICT": 8, "Mathematics": 8}

    assert manifest["protocol"]["class_size"] == ">60"
    assert manifest["protocol"]["periods"] == 1

    for subject, subject_rows in per_subject.items():
        toc = load_toc(three_subject_stores / subject / "toc.json")
        expected = [t.title for t in select_topics(toc, count=8, stride=2, breadth_page_limit=25)]
        assert [row["topic"] for row in subject_rows] == expected

    for path in plans:
        plan = plan_from_json(path.read_text())
        assert validate_format(plan).valid
        # the protocol's fixed request parameters surface in every plan
        assert plan.general_information["class_size"] == ">60"
        assert plan.general_information["periods"] == "1"

    names = sorted(p.name for p in outputs[0].iterdir())
    assert names == sorted(p.name for p in outputs[1].iterdir())
    for name in names:
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()
    report(5, "24 plans (8 x 3 subjects), every-second topics, fixed protocol, byte-stable")


def _random_valid_plan(rng: random.Random) -> LessonPlan:
    def words(n: int) -> str:
        return " ".join(rng.choice(["maize", "rivers", "angles", "files", "trade"]) for _ in range(n))

    general = {
        "topic": words(2),
        "subject": rng.choice(["History", "ICT", "Mathematics"]),
        "level": rng.choice(["S1", "S2"]),
        "class_size": rng.choice(["<30", "30-60", ">60"]),
        "periods": str(rng.randint(1, 3)),
        "date_placeholder": "____________",
    }
    if rng.random() < 0.3:
        general["stream"] = rng.choice(["A", "B"])
    preparation = {
        "learning_objective": "The learner should be able to explain " + words(2),
        "materials": words(3),
        "references": f"Student's book p. {rng.randint(1, 90)}",
    }
    steps = [
        ProcedureStep("introduction", rng.randint(3, 10), words(3), words(2)),
        ProcedureStep("development", rng.randint(15, 30), words(4), words(3)),
        ProcedureStep("wrap_up_and_assessment", rng.randint(5, 12), words(3), words(2)),
    ]
    if rng.random() < 0.3:
        steps.insert(2, ProcedureStep("development", rng.randint(5, 10), words(2), words(2)))
    return LessonPlan(
        general_information=general,
        preparation=preparation,
        procedure=tuple(steps),
    )


def _spoil(plan: LessonPlan, rng: random.Random) -> LessonPlan:
    choice = rng.randrange(3)
    if choice == 0:
        general = dict(plan.general_information)
        general["topic"] = ""
        return LessonPlan(general, plan.preparation, plan.procedure, plan.extra_periods)
    if choice == 1:
        preparation = dict(plan.preparation)
        preparation.pop("materials")
        return LessonPlan(plan.general_information, preparation, plan.procedure, plan.extra_periods)
    return LessonPlan(
        plan.general_information,
        plan.preparation,
        tuple(s for s in plan.procedure if s.phase != "wrap_up_and_assessment"),
        plan.extra_periods,
    )


def test_criterion_06_presence_bridge_property():
    rng = random.Random(6006)
    presence_items = [item for item in RUBRIC.items if item.kind == "presence"]
    valid_seen = 0
    for i in range(200):
        plan = _random_valid_plan(rng)
        if i % 3 == 2:
            plan = _spoil(plan, rng)
        if validate_format(plan).valid:
            valid_seen += 1
            scores = score_presence_items(plan, RUBRIC)
            assert all(scores[item.item_id] == item.max_points for item in presence_items)
    assert valid_seen >= 100
    report(6, f"{valid_seen} valid plans all scored full presence credit (200 fixtures)")


def test_criterion_07_hallucination_guards():
    embedder = OfflineEmbedder(dim=64)
    # a subject whose whole textbook is under one page-equivalent of text
    thin_text = "kenya appears briefly in the notes with little else recorded about kenya"
    chunk = Chunk(chunk_id="History:00000", subject="History", text=thin_text,
                  page_start=25, page_end=25, char_count=len(thin_text))
    store = build_store("History", [chunk], embedder.embed_texts([thin_text]), META)
    request = LessonRequest(level="S1", subject="History", periods=1, class_size=">60", topic="Kenya")

    for _ in range(5):
        result = run_generation(
            {"History": store}, request, Providers(embedder=embedder, llm=MockLlmProvider()),
            GenerationConfig(),
        )
        assert result.confidence.low_evidence
        assert "LOW_EVIDENCE" in result.warnings

    off_topic = VALID_RAW.replace("Soil erosion", "Mukasa").replace("soil erosion", "Mukasa")
    for _ in range(5):
        result = run_generation(
            {"History": store}, request,
            Providers(embedder=embedder, llm=ScriptedLlmProvider([off_topic], repeat_last=True)),
            GenerationConfig(),
        )
        assert result.plausibility.suspicious
        assert "TOPIC_MISMATCH" in result.warnings
    report(7, "sub-page evidence always LOW_EVIDENCE; off-topic plan always TOPIC_MISMATCH")


def test_criterion_08_retry_contract():
    provider = ScriptedLlmProvider(["<p>malformed</p>", VALID_RAW])
    raw, retries_used = generate_plan(provider, "prompt", max_retries=2)
    assert retries_used == 1
    assert provider.call_count == retries_used + 1
    assert validate_format(parse_lesson_plan(raw)).valid

    for max_retries in (0, 1, 2, 3):
        always_bad = ScriptedLlmProvider(["garbage"], repeat_last=True)
        with pytest.raises(Exception, match="format failure"):
            generate_plan(always_bad, "prompt", max_retries=max_retries)
        assert always_bad.call_count == max_retries + 1
    report(8, "malformed-then-valid -> retries_used=1; terminal failure after max_retries+1 calls")


def test_criterion_09_service_conformance(three_subject_stores, fixture_sources):
    from lessongen.service import ServiceState, create_app
    from lessongen.store import StoreRegistry

    registry = StoreRegistry.from_directory(three_subject_stores)
    toc = json.loads((fixture_sources / "history_toc.json").read_text())
    topic = toc[0]["title"]

    def build_app(llm):
        state = ServiceState(
            providers=Providers(embedder=OfflineEmbedder(dim=64), llm=llm),
            gen_config=GenerationConfig(),
            registry=registry,
            provider_reachable=True,
        )
        return create_app(state)

    payload = {"level": "S1", "subject": "History", "periods": 1, "class_size": ">60", "topic": topic}

    with TestClient(build_app(MockLlmProvider())) as client:
        ok = client.post("/api/generate", json=payload)
        assert ok.status_code == 200
        assert validate_format(plan_from_dict_payload(ok.json()["plan"])).valid

        blank = client.post("/api/generate", json={**payload, "topic": " "})
        assert blank.status_code == 400 and blank.json()["field"] == "topic"

        missing = client.post("/api/generate", json={**payload, "subject": "Physics"})
        assert missing.status_code == 404

        again = client.post("/api/generate", json=payload)
        assert again.content == ok.content

    with TestClient(build_app(ScriptedLlmProvider(["<br>"], repeat_last=True))) as client:
        assert client.post("/api/generate", json=payload).status_code == 422

    with TestClient(build_app(ScriptedLlmProvider([ProviderUnavailable("down")], repeat_last=True))) as client:
        assert client.post("/api/generate", json=payload).status_code == 502

    gate = threading.Event()

    class BlockingProvider:
        def generate(self, prompt: str) -> str:
            gate.wait(timeout=10)
            return MockLlmProvider().generate(prompt)

    app = build_app(BlockingProvider())

    async def scenario() -> None:
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport, base_url="http://test") as client:
            generation = asyncio.create_task(client.post("/api/generate", json=payload))
            await asyncio.sleep(0.05)
            health = await asyncio.wait_for(client.get("/api/health"), timeout=2.0)
            assert health.status_code == 200 and health.json()["status"] == "ok"
            gate.set()
            assert (await asyncio.wait_for(generation, timeout=10.0)).status_code == 200

    asyncio.run(scenario())
    report(9, "200/400/404/422/502 mapped; deterministic responses; health live during generation")


def plan_from_dict_payload(obj: dict) -> LessonPlan:
    from lessongen.planformat import plan_from_dict

    return plan_from_dict(obj)
