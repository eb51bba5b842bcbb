"""Operator command line: ingest corpora, run the batch protocol, evaluate, serve.

The CLI is the only component that writes files; the HTTP service is
read-only over stores.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .config import AppConfig, ConfigError, load_config
from .corpus import (
    CorpusError,
    EDITIONS,
    LEVELS,
    chunk_document,
    load_textbook,
    load_toc,
    select_topics,
)
from .embeddings import HttpEmbedder, OfflineEmbedder, ProviderError
from .generation import (
    CLASS_SIZES,
    LessonRequest,
    PipelineError,
    Providers,
    run_generation,
)
from .lpap import (
    EvaluationError,
    average_raters,
    default_rubric,
    evaluation_report,
    load_ratings_csv,
    load_rubric,
)
from .planformat import plan_from_json, render_plan
from .providers import HttpLlmProvider, MockLlmProvider
from .store import IngestionMeta, StoreError, build_store, load_store, persist_store


def _fail(message: str, code: int = 2) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _app_config(args: argparse.Namespace) -> AppConfig:
    config = load_config(args.config) if getattr(args, "config", None) else AppConfig()
    if getattr(args, "offline_embedder", False):
        config = replace(config, offline_embedder=True)
    if getattr(args, "mock_llm", False):
        config = replace(config, mock_llm=True)
    return config


def _build_embedder(config: AppConfig):
    if config.offline_embedder:
        return OfflineEmbedder(dim=config.offline_dim)
    if config.embedding_provider is None:
        raise ConfigError(
            "no embedding provider configured; pass --offline-embedder or set "
            "embedding_provider in the config file"
        )
    return HttpEmbedder(config.embedding_provider)


def _build_llm(config: AppConfig):
    if config.mock_llm:
        return MockLlmProvider()
    if config.llm_provider is None:
        raise ConfigError(
            "no LLM provider configured; pass --mock-llm or set llm_provider "
            "in the config file"
        )
    return HttpLlmProvider(config.llm_provider, max_tokens=config.llm_max_tokens)


def cmd_ingest(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    if out_dir.exists() and any(out_dir.iterdir()) and not args.force:
        return _fail(f"output directory {out_dir} is not empty (use --force to overwrite)")

    config = _app_config(args)
    toc = load_toc(args.toc)
    document = load_textbook(args.corpus, subject=args.subject, level=args.level, edition=args.edition)
    chunks = chunk_document(document, chunk_size=args.chunk_size, overlap=args.overlap)
    embedder = _build_embedder(config)
    vectors = embedder.embed_texts([chunk.text for chunk in chunks])
    store = build_store(
        args.subject,
        chunks,
        vectors,
        IngestionMeta(
            level=args.level,
            edition=args.edition,
            chunk_size=args.chunk_size,
            overlap=args.overlap,
            embedder_id=embedder.embedder_id,
        ),
    )
    digest = persist_store(store, out_dir)
    # The TOC rides along with the store so `batch` can replay the topic
    # selection protocol; it is not part of the digest.
    (out_dir / "toc.json").write_text(Path(args.toc).read_text(encoding="utf-8"), encoding="utf-8")

    manifest = store.manifest
    print(f"store written to {out_dir}")
    print(f"  subject={manifest.subject} level={manifest.level} edition={manifest.edition}")
    print(f"  records={manifest.record_count} dim={manifest.dim} embedder={manifest.embedder_id}")
    print(f"  digest={digest}")
    return 0


def _discover_stores(root: Path) -> dict[str, Path]:
    if not root.is_dir():
        raise StoreError(f"store directory not found: {root}")
    found: dict[str, Path] = {}
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        if not (sub / "manifest.json").is_file():
            continue
        subject = json.loads((sub / "manifest.json").read_text(encoding="utf-8")).get("subject")
        if subject in found:
            raise StoreError(f"duplicate subject {subject!r} (directory {sub})")
        found[subject] = sub
    if not found:
        raise StoreError(f"no stores found under {root}")
    return found


def cmd_batch(args: argparse.Namespace) -> int:
    config = _app_config(args)
    gen_config = replace(
        config.generation,
        k=args.k,
        min_sim=args.min_sim,
        max_retries=args.max_retries,
        chars_per_page=args.chars_per_page,
        low_evidence_page_threshold=args.low_evidence_threshold,
    )
    providers = Providers(embedder=_build_embedder(config), llm=_build_llm(config))

    store_dirs = _discover_stores(Path(args.stores))
    subjects = args.subjects or sorted(store_dirs)
    missing = [s for s in subjects if s not in store_dirs]
    if missing:
        return _fail(f"no store for subject(s): {', '.join(missing)}")

    stores = {subject: load_store(store_dirs[subject]) for subject in subjects}
    for subject in subjects:
        manifest = stores[subject].manifest
        if manifest.embedder_id != providers.embedder.embedder_id:
            print(
                f"warning: {subject} store was embedded with {manifest.embedder_id!r}, "
                f"querying with {providers.embedder.embedder_id!r}",
                file=sys.stderr,
            )

    jobs: list[tuple[str, int, str]] = []
    for subject in subjects:
        toc_path = store_dirs[subject] / "toc.json"
        if not toc_path.is_file():
            return _fail(f"{subject}: store has no toc.json (re-run ingest)")
        try:
            topics = select_topics(
                load_toc(toc_path),
                count=args.plans_per_subject,
                stride=args.stride,
                breadth_page_limit=args.breadth_page_limit,
            )
        except CorpusError as exc:
            return _fail(f"{subject}: {exc}")
        jobs.extend((subject, i, topic.title) for i, topic in enumerate(topics))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def run_one(job: tuple[str, int, str]) -> dict:
        subject, index, topic_title = job
        plan_id = f"{subject}{index + 1:02d}"
        request = LessonRequest(
            level=stores[subject].manifest.level,
            subject=subject,
            periods=args.periods,
            class_size=args.class_size,
            topic=topic_title,
        )
        try:
            result = run_generation(stores, request, providers, gen_config)
        except PipelineError as exc:
            return {
                "plan_id": plan_id,
                "subject": subject,
                "topic": topic_title,
                "status": "failed",
                "error": str(exc),
            }
        (out_dir / f"{plan_id}.plan.json").write_text(
            render_plan(result.plan, "archival_json"), encoding="utf-8"
        )
        return {
            "plan_id": plan_id,
            "subject": subject,
            "topic": topic_title,
            "status": "ok",
            "retries_used": result.retries_used,
            "warnings": list(result.warnings),
            "page_equivalents": round(result.confidence.page_equivalents, 4),
        }

    if args.parallel > 1:
        with ThreadPoolExecutor(max_workers=args.parallel) as executor:
            rows = list(executor.map(run_one, jobs))
    else:
        rows = [run_one(job) for job in jobs]

    manifest = {
        "protocol": {
            "subjects": subjects,
            "plans_per_subject": args.plans_per_subject,
            "stride": args.stride,
            "class_size": args.class_size,
            "periods": args.periods,
            "breadth_page_limit": args.breadth_page_limit,
        },
        "generation": {
            "k": gen_config.k,
            "min_sim": gen_config.min_sim,
            "max_retries": gen_config.max_retries,
            "chars_per_page": gen_config.chars_per_page,
            "low_evidence_page_threshold": gen_config.low_evidence_page_threshold,
            "overlap_threshold": gen_config.overlap_threshold,
            "embedder_id": providers.embedder.embedder_id,
        },
        "plans": rows,
    }
    (out_dir / "batch_manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )

    failed = [row["plan_id"] for row in rows if row["status"] != "ok"]
    print(f"{len(rows) - len(failed)}/{len(rows)} plans written to {out_dir}")
    if failed:
        print(f"failed plans: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    plans_dir = Path(args.plans)
    if not plans_dir.is_dir():
        return _fail(f"plans directory not found: {plans_dir}")
    plan_files = sorted(plans_dir.glob("*.plan.json"))
    if not plan_files:
        return _fail(f"no .plan.json files in {plans_dir}")
    plan_ids = set()
    for path in plan_files:
        plan_from_json(path.read_text(encoding="utf-8"))  # readability check
        plan_ids.add(path.name[: -len(".plan.json")])

    rubric = load_rubric(args.rubric) if args.rubric else default_rubric()
    ratings = load_ratings_csv(args.ratings, rubric)

    unknown = sorted({r.plan_id for r in ratings} - plan_ids)
    if unknown:
        return _fail(f"ratings reference unknown plan(s): {', '.join(unknown)}")

    by_plan: dict[str, list] = {}
    for rating in ratings:
        by_plan.setdefault(rating.plan_id, []).append(rating)
    unrated = sorted(plan_ids - set(by_plan))
    if unrated:
        print(f"note: {len(unrated)} plan(s) have no ratings: {', '.join(unrated)}", file=sys.stderr)

    records = [average_raters(group, rubric) for _, group in sorted(by_plan.items())]
    report = evaluation_report(records, ratings, rubric)
    csv_path, txt_path = report.write(args.out)
    print(f"report written: {csv_path}, {txt_path}")
    print(report.to_text())
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import threading

    import uvicorn

    from .service import ServiceState, create_app, probe_provider

    config = _app_config(args)
    if args.stores:
        config = replace(config, stores_dir=args.stores)
    if args.ui_dir:
        config = replace(config, ui_dir=args.ui_dir)
    host = args.host or config.host
    port = args.port if args.port is not None else config.port

    providers = Providers(embedder=_build_embedder(config), llm=_build_llm(config))
    state = ServiceState(providers=providers, gen_config=config.generation)

    if config.mock_llm:
        state.provider_reachable = True
    elif config.llm_provider is not None:
        llm_config = config.llm_provider

        def probe() -> None:
            state.provider_reachable = probe_provider(llm_config)

        threading.Thread(target=probe, name="provider-probe", daemon=True).start()

    app = create_app(
        state,
        stores_dir=config.stores_dir,
        ui_dir=config.ui_dir,
        cors_origins=config.cors_origins,
    )
    uvicorn.run(app, host=host, port=port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lessongen",
        description="Retrieval-augmented lesson plan generation and evaluation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="build a subject vector store from a corpus file")
    ingest.add_argument("--corpus", required=True, help="page-delimited UTF-8 corpus file")
    ingest.add_argument("--toc", required=True, help="table-of-contents JSON file")
    ingest.add_argument("--subject", required=True)
    ingest.add_argument("--level", required=True, choices=LEVELS)
    ingest.add_argument("--edition", required=True, choices=EDITIONS)
    ingest.add_argument("--out", required=True, help="store output directory")
    ingest.add_argument("--chunk-size", type=int, default=1200)
    ingest.add_argument("--overlap", type=int, default=200)
    ingest.add_argument("--config", help="app config file (.json or .toml)")
    ingest.add_argument("--offline-embedder", action="store_true")
    ingest.add_argument("--force", action="store_true", help="overwrite an existing store")
    ingest.set_defaults(func=cmd_ingest)

    batch = sub.add_parser("batch", help="generate plans per the batch protocol")
    batch.add_argument("--stores", required=True, help="directory containing store subdirectories")
    batch.add_argument("--out", required=True)
    batch.add_argument("--subjects", nargs="*", default=None)
    batch.add_argument("--plans-per-subject", type=int, default=8)
    batch.add_argument("--stride", type=int, default=2)
    batch.add_argument("--class-size", default=">60", choices=CLASS_SIZES)
    batch.add_argument("--periods", type=int, default=1)
    batch.add_argument("--breadth-page-limit", type=int, default=25)
    batch.add_argument("--k", type=int, default=6)
    batch.add_argument("--min-sim", type=float, default=0.0)
    batch.add_argument("--max-retries", type=int, default=2)
    batch.add_argument("--chars-per-page", type=int, default=1800)
    batch.add_argument("--low-evidence-threshold", type=float, default=1.0)
    batch.add_argument("--parallel", type=int, default=1)
    batch.add_argument("--config", help="app config file (.json or .toml)")
    batch.add_argument("--offline-embedder", action="store_true")
    batch.add_argument("--mock-llm", action="store_true")
    batch.set_defaults(func=cmd_batch)

    evaluate = sub.add_parser("evaluate", help="score rated plans and emit the report")
    evaluate.add_argument("--plans", required=True, help="directory of .plan.json files")
    evaluate.add_argument("--ratings", required=True, help="CSV: plan_id,rater_id,item_id,score")
    evaluate.add_argument("--rubric", help="rubric JSON file (default: packaged rubric)")
    evaluate.add_argument("--out", required=True)
    evaluate.set_defaults(func=cmd_evaluate)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--config", help="app config file (.json or .toml)")
    serve.add_argument("--stores", help="override stores directory")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    serve.add_argument("--ui-dir", help="static UI directory to serve at /")
    serve.add_argument("--offline-embedder", action="store_true")
    serve.add_argument("--mock-llm", action="store_true")
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, StoreError, EvaluationError, ConfigError) as exc:
        return _fail(str(exc))
    except ProviderError as exc:
        return _fail(str(exc), code=1)


if __name__ == "__main__":
    sys.exit(main())
