"""Application configuration: JSON or TOML file plus environment overrides for secrets.

Only non-secret settings live in the file; provider API keys are read from the
environment variables named by ``api_key_env``.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .embeddings import DEFAULT_OFFLINE_DIM, ProviderConfig
from .generation import GenerationConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AppConfig:
    stores_dir: str = "stores"
    host: str = "127.0.0.1"
    port: int = 8000
    ui_dir: str | None = None
    cors_origins: tuple[str, ...] = ("*",)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    embedding_provider: ProviderConfig | None = None
    llm_provider: ProviderConfig | None = None
    offline_embedder: bool = False
    offline_dim: int = DEFAULT_OFFLINE_DIM
    mock_llm: bool = False
    llm_max_tokens: int = 2048


def _provider_from_dict(obj: dict, source: str) -> ProviderConfig:
    try:
        return ProviderConfig(
            base_url=obj["base_url"],
            model_name=obj["model_name"],
            api_key_env=obj.get("api_key_env", ""),
            timeout_ms=int(obj.get("timeout_ms", 30_000)),
            max_retries=int(obj.get("max_retries", 3)),
            batch_size=int(obj.get("batch_size", 64)),
        )
    except KeyError as exc:
        raise ConfigError(f"{source}: provider config missing key {exc}") from None


def config_from_dict(obj: dict, source: str = "<config>") -> AppConfig:
    generation_obj = obj.get("generation", {})
    template: str | None = None
    template_path = generation_obj.get("template_path")
    if template_path:
        template = Path(template_path).read_text(encoding="utf-8")
    generation = GenerationConfig(
        k=int(generation_obj.get("k", 6)),
        min_sim=float(generation_obj.get("min_sim", 0.0)),
        max_retries=int(generation_obj.get("max_retries", 2)),
        chars_per_page=int(generation_obj.get("chars_per_page", 1800)),
        low_evidence_page_threshold=float(generation_obj.get("low_evidence_page_threshold", 1.0)),
        overlap_threshold=float(generation_obj.get("overlap_threshold", 0.2)),
        template=template,
    )
    listen = obj.get("listen", {})
    embed_obj = obj.get("embedding_provider")
    llm_obj = obj.get("llm_provider")
    return AppConfig(
        stores_dir=str(obj.get("stores_dir", "stores")),
        host=str(listen.get("host", "127.0.0.1")),
        port=int(listen.get("port", 8000)),
        ui_dir=obj.get("ui_dir"),
        cors_origins=tuple(obj.get("cors_origins", ["*"])),
        generation=generation,
        embedding_provider=_provider_from_dict(embed_obj, source) if embed_obj else None,
        llm_provider=_provider_from_dict(llm_obj, source) if llm_obj else None,
        offline_embedder=bool(obj.get("offline_embedder", False)),
        offline_dim=int(obj.get("offline_dim", DEFAULT_OFFLINE_DIM)),
        mock_llm=bool(obj.get("mock_llm", False)),
        llm_max_tokens=int(obj.get("llm_max_tokens", 2048)),
    )


def load_config(path: str | Path) -> AppConfig:
    """Load configuration from a .json or .toml file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".toml":
        with path.open("rb") as handle:
            obj = tomllib.load(handle)
    elif path.suffix == ".json":
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    else:
        raise ConfigError(f"unsupported config format {path.suffix!r} (use .json or .toml)")
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config root must be an object")
    return config_from_dict(obj, str(path))
