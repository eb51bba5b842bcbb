"""CLI behavior: ingest, batch protocol, evaluate."""

from __future__ import annotations

import json

import pytest

from lessongen.cli import main
from lessongen.corpus import chunk_document, load_textbook, load_toc, select_topics
from lessongen.planformat import plan_from_json, validate_format
from lessongen.store import load_store

from conftest import write_subject_fixture

from test_lpap import ITEM_IDS


# --- ingest ------------------------------------------------------------------------


def test_ingest_writes_expected_store(tmp_path):
    corpus_path, toc_path = write_subject_fixture(tmp_path, "History", seed=101, thin_index=12, thin_title="Kenya")
    out = tmp_path / "store"
    code = main(
        [
            "ingest",
            "--corpus", str(corpus_path),
            "--toc", str(toc_path),
            "--subject", "History",
            "--level", "S1",
            "--edition", "student",
            "--out", str(out),
            "--chunk-size", "700",
            "--overlap", "100",
            "--offline-embedder",
        ]
    )
    assert code == 0
    store = load_store(out)
    document = load_textbook(corpus_path, "History", "S1", "student")
    expected = chunk_document(document, chunk_size=700, overlap=100)
    assert store.manifest.record_count == len(expected)
    assert store.manifest.embedder_id == "offline-3gram-256"
    assert (out / "toc.json").is_file()


def test_ingest_missing_toc_exits_2(tmp_path, capsys):
    corpus_path, _ = write_subject_fixture(tmp_path, "History", seed=101)
    code = main(
        [
            "ingest",
            "--corpus", str(corpus_path),
            "--toc", str(tmp_path / "no_such_toc.json"),
            "--subject", "History",
            "--level", "S1",
            "--edition", "student",
            "--out", str(tmp_path / "store"),
            "--offline-embedder",
        ]
    )
    assert code == 2
    assert "no_such_toc.json" in capsys.readouterr().err


def test_ingest_refuses_existing_dir_without_force(tmp_path, capsys):
    corpus_path, toc_path = write_subject_fixture(tmp_path, "History", seed=101)
    out = tmp_path / "store"
    out.mkdir()
    (out / "stale.txt").write_text("old")
    args = [
        "ingest",
        "--corpus", str(corpus_path),
        "--toc", str(toc_path),
        "--subject", "History",
        "--level", "S1",
        "--edition", "student",
        "--out", str(out),
        "--offline-embedder",
    ]
    assert main(args) == 2
    assert "--force" in capsys.readouterr().err
    assert main(args + ["--force"]) == 0


# --- batch --------------------------------------------------------------------------


@pytest.fixture
def batch_config(tmp_path):
    """Config file matching the fixture stores' embedding dim."""
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"offline_embedder": True, "offline_dim": 64, "mock_llm": True}))
    return path


def test_batch_emits_24_plans(three_subject_stores, batch_config, tmp_path):
    out = tmp_path / "plans"
    code = main(
        ["batch", "--stores", str(three_subject_stores), "--out", str(out), "--config", str(batch_config)]
    )
    assert code == 0
    plan_files = sorted(out.glob("*.plan.json"))
    assert len(plan_files) == 24
    manifest = json.loads((out / "batch_manifest.json").read_text())
    assert len(manifest["plans"]) == 24
    assert manifest["protocol"]["class_size"] == ">60"
    assert manifest["protocol"]["periods"] == 1

    by_subject: dict[str, list[dict]] = {}
    for row in manifest["plans"]:
        by_subject.setdefault(row["subject"], []).append(row)
    assert {s: len(rows) for s, rows in by_subject.items()} == {
        "History": 8, "ICT": 8, "Mathematics": 8,
    }

    for path in plan_files:
        plan = plan_from_json(path.read_text())
        assert validate_format(plan).valid

    # topic list must equal the selection rule output exactly
    for subject in ("History", "ICT", "Mathematics"):
        toc = load_toc(three_subject_stores / subject / "toc.json")
        expected = [t.title for t in select_topics(toc, count=8, stride=2, breadth_page_limit=25)]
        assert [row["topic"] for row in by_subject[subject]] == expected


def test_batch_byte_stable_across_runs(three_subject_stores, batch_config, tmp_path):
    out_one, out_two = tmp_path / "one", tmp_path / "two"
    for out in (out_one, out_two):
        assert main(
            ["batch", "--stores", str(three_subject_stores), "--out", str(out), "--config", str(batch_config)]
        ) == 0
    files_one = sorted(p.name for p in out_one.iterdir())
    assert files_one == sorted(p.name for p in out_two.iterdir())
    for name in files_one:
        assert (out_one / name).read_bytes() == (out_two / name).read_bytes(), name


def test_batch_parallel_matches_sequential(three_subject_stores, batch_config, tmp_path):
    sequential, parallel = tmp_path / "seq", tmp_path / "par"
    assert main(
        ["batch", "--stores", str(three_subject_stores), "--out", str(sequential), "--config", str(batch_config)]
    ) == 0
    assert main(
        ["batch", "--stores", str(three_subject_stores), "--out", str(parallel),
         "--config", str(batch_config), "--parallel", "4"]
    ) == 0
    for path in sorted(sequential.iterdir()):
        assert path.read_bytes() == (parallel / path.name).read_bytes()


def test_batch_thin_topic_row_carries_low_evidence(three_subject_stores, batch_config, tmp_path):
    out = tmp_path / "plans"
    code = main(
        [
            "batch",
            "--stores", str(three_subject_stores),
            "--out", str(out),
            "--config", str(batch_config),
            "--min-sim", "0.2",
            "--chars-per-page", "1000",
        ]
    )
    assert code == 0
    manifest = json.loads((out / "batch_manifest.json").read_text())
    flagged = {row["plan_id"]: row["warnings"] for row in manifest["plans"]}
    assert "LOW_EVIDENCE" in flagged["History07"]  # the under-covered Kenya topic
    for plan_id, warnings in flagged.items():
        if plan_id != "History07":
            assert "LOW_EVIDENCE" not in warnings


def test_batch_stride_too_large_names_subject(three_subject_stores, batch_config, tmp_path, capsys):
    code = main(
        [
            "batch",
            "--stores", str(three_subject_stores),
            "--out", str(tmp_path / "plans"),
            "--config", str(batch_config),
            "--stride", "4",
        ]
    )
    assert code == 2
    err = capsys.readouterr().err
    assert "History" in err and "cannot select" in err


def test_batch_unknown_subject_fails(three_subject_stores, batch_config, tmp_path, capsys):
    code = main(
        [
            "batch",
            "--stores", str(three_subject_stores),
            "--out", str(tmp_path / "plans"),
            "--config", str(batch_config),
            "--subjects", "Physics",
        ]
    )
    assert code == 2
    assert "Physics" in capsys.readouterr().err


# --- evaluate -----------------------------------------------------------------------


def write_plans(tmp_path, plan_ids: list[str]) -> None:
    from conftest import VALID_RAW
    from lessongen.planformat import parse_lesson_plan, render_plan

    plan = parse_lesson_plan(VALID_RAW)
    for plan_id in plan_ids:
        (tmp_path / f"{plan_id}.plan.json").write_text(render_plan(plan, "archival_json"))


def ratings_csv(path, plan_ids: list[str], raters: list[str], value_of=lambda p, r, i: 1) -> None:
    lines = ["plan_id,rater_id,item_id,score"]
    for plan_id in plan_ids:
        for rater_id in raters:
            for item_id in ITEM_IDS:
                lines.append(f"{plan_id},{rater_id},{item_id},{value_of(plan_id, rater_id, item_id)}")
    path.write_text("\n".join(lines) + "\n")


def test_evaluate_identical_raters_max_agreement(tmp_path, capsys):
    plans_dir = tmp_path / "plans"
    plans_dir.mkdir()
    write_plans(plans_dir, ["History01", "History02"])
    ratings = tmp_path / "ratings.csv"
    # identical raters, non-constant scores so kappa and spearman are defined
    ratings_csv(ratings, ["History01", "History02"], ["r1", "r2"],
                value_of=lambda p, r, i: 2 if i.startswith("pres") else 1)
    out = tmp_path / "report"
    code = main(["evaluate", "--plans", str(plans_dir), "--ratings", str(ratings), "--out", str(out)])
    assert code == 0
    csv_text = (out / "report.csv").read_text()
    for line in csv_text.strip().splitlines()[1:]:
        cells = line.split(",")
        assert cells[6] == "100.0000"  # mean percent agreement
        assert cells[8] == "1.0000"    # mean kappa
    assert "report.txt" in capsys.readouterr().out


def test_evaluate_unknown_plan_rejected(tmp_path, capsys):
    plans_dir = tmp_path / "plans"
    plans_dir.mkdir()
    write_plans(plans_dir, ["History01"])
    ratings = tmp_path / "ratings.csv"
    ratings_csv(ratings, ["History09"], ["r1"])
    code = main(["evaluate", "--plans", str(plans_dir), "--ratings", str(ratings), "--out", str(tmp_path / "r")])
    assert code == 2
    assert "History09" in capsys.readouterr().err


def test_evaluate_full_synthetic_batch(three_subject_stores, batch_config, tmp_path):
    import random

    plans_out = tmp_path / "plans"
    assert main(
        ["batch", "--stores", str(three_subject_stores), "--out", str(plans_out), "--config", str(batch_config)]
    ) == 0
    plan_ids = sorted(p.name[: -len(".plan.json")] for p in plans_out.glob("*.plan.json"))
    assert len(plan_ids) == 24

    rng = random.Random(21)
    scores = {
        (p, r, i): rng.randint(0, 2) for p in plan_ids for r in ("r1", "r2", "r3") for i in ITEM_IDS
    }
    ratings = tmp_path / "ratings.csv"
    ratings_csv(ratings, plan_ids, ["r1", "r2", "r3"], value_of=lambda p, r, i: scores[(p, r, i)])
    out = tmp_path / "report"
    assert main(["evaluate", "--plans", str(plans_out), "--ratings", str(ratings), "--out", str(out)]) == 0

    rows = (out / "report.csv").read_text().strip().splitlines()[1:]
    assert len(rows) == 24
    # spreadsheet-style oracle: recompute each plan's percentage from the raw CSV
    for line in rows:
        cells = line.split(",")
        plan_id = cells[0]
        expected_total = sum(
            scores[(plan_id, r, i)] for r in ("r1", "r2", "r3") for i in ITEM_IDS
        ) / 3
        assert float(cells[2]) == pytest.approx(100.0 * expected_total / 44, abs=0.005)

    text = (out / "report.txt").read_text()
    assert "History" in text and "Mathematics" in text and "ICT" in text
    assert "Wilcoxon signed-rank" in text


def test_evaluate_missing_plans_dir(tmp_path, capsys):
    code = main(["evaluate", "--plans", str(tmp_path / "nope"), "--ratings", str(tmp_path / "r.csv"),
                 "--out", str(tmp_path / "out")])
    assert code == 2
