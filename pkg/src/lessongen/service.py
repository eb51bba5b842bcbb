"""HTTP service: subject discovery, lesson-plan generation, health.

Endpoints: ``GET /api/subjects``, ``POST /api/generate``, ``GET /api/health``;
static UI assets are served from ``/`` when a UI directory is configured.
Handlers are synchronous so FastAPI dispatches them to worker threads: a slow
generation call never blocks health checks or subject listing. Stores are
shared immutably across requests.

Non-200 responses always carry a machine-readable ``{stage, reason}`` body
(plus ``field`` for request-validation errors).
"""

from __future__ import annotations

import logging
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass, field

import httpx
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .embeddings import ProviderConfig, ProviderError
from .generation import (
    FormatFailureError,
    GenerationConfig,
    LessonRequest,
    PipelineError,
    Providers,
    RequestError,
    run_generation,
)
from .planformat import plan_to_dict, render_plan
from .store import StoreRegistry

logger = logging.getLogger(__name__)


@dataclass
class ServiceState:
    """Mutable server-side state shared by all handlers."""

    providers: Providers
    gen_config: GenerationConfig = field(default_factory=GenerationConfig)
    registry: StoreRegistry | None = None
    provider_reachable: bool | None = None
    startup_error: str | None = None

    @property
    def ready(self) -> bool:
        return self.registry is not None


def _error(status: int, stage: str, reason: str, field_name: str | None = None) -> JSONResponse:
    body: dict = {"stage": stage, "reason": reason}
    if field_name:
        body["field"] = field_name
    return JSONResponse(status_code=status, content=body)


def probe_provider(config: ProviderConfig, timeout_s: float = 2.0) -> bool:
    """Best-effort reachability probe; any HTTP response counts as reachable."""
    try:
        httpx.get(config.base_url, timeout=timeout_s)
        return True
    except httpx.HTTPError:
        return False


def create_app(
    state: ServiceState,
    *,
    stores_dir: str | None = None,
    ui_dir: str | None = None,
    cors_origins: tuple[str, ...] = ("*",),
) -> FastAPI:
    """Build the application around an explicit state object.

    Tests pass a preloaded registry; the CLI passes ``stores_dir`` so stores
    load in a background thread and health reports "starting" meanwhile.
    """
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if stores_dir is not None and state.registry is None:

            def worker() -> None:
                try:
                    state.registry = StoreRegistry.from_directory(stores_dir)
                except Exception as exc:
                    state.startup_error = str(exc)
                    logger.error("store loading failed: %s", exc)

            threading.Thread(target=worker, name="store-loader", daemon=True).start()
        yield

    app = FastAPI(title="Lesson Plan Generator", version="0.1.0", lifespan=lifespan)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    def malformed_body(request: Request, exc: RequestValidationError) -> JSONResponse:
        return _error(400, "validate", "request body is not a JSON object")

    @app.get("/api/health")
    def health() -> dict:
        if state.startup_error:
            status = "error"
        elif state.ready:
            status = "ok"
        else:
            status = "starting"
        return {
            "status": status,
            "stores_loaded": len(state.registry) if state.registry else 0,
            "provider_reachable": state.provider_reachable,
        }

    @app.get("/api/subjects")
    def subjects() -> list[dict]:
        if state.registry is None:
            return []
        return [
            {"subject": m.subject, "level": m.level, "edition": m.edition}
            for m in state.registry.subjects()
        ]

    @app.post("/api/generate")
    def generate(payload: dict) -> JSONResponse:
        if state.registry is None:
            return _error(503, "startup", state.startup_error or "stores are still loading")
        raw_periods = payload.get("periods")
        try:
            request = LessonRequest(
                level=str(payload.get("level", "")),
                subject=str(payload.get("subject", "")),
                periods=raw_periods if isinstance(raw_periods, int) and not isinstance(raw_periods, bool) else -1,
                class_size=str(payload.get("class_size", "")),
                topic=str(payload.get("topic", "")),
            )
        except RequestError as exc:
            return _error(400, "validate", exc.reason, field_name=exc.field)

        if state.registry.get(request.subject) is None:
            return _error(404, "validate", "no store for subject", field_name="subject")

        try:
            result = run_generation(
                state.registry.as_mapping(), request, state.providers, state.gen_config
            )
        except PipelineError as exc:
            if isinstance(exc.cause, FormatFailureError):
                return _error(422, exc.stage, str(exc.cause))
            if isinstance(exc.cause, ProviderError):
                return _error(502, exc.stage, str(exc.cause))
            logger.exception("generation failed")
            return _error(500, exc.stage, str(exc))

        confidence = result.confidence
        return JSONResponse(
            {
                "plan": plan_to_dict(result.plan),
                "rendered": render_plan(result.plan, "display_markup"),
                "confidence": {
                    "chunk_count": confidence.chunk_count,
                    "distinct_pages": confidence.distinct_pages,
                    "page_equivalents": confidence.page_equivalents,
                    "low_evidence": confidence.low_evidence,
                },
                "warnings": list(result.warnings),
                "retries_used": result.retries_used,
            }
        )

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
