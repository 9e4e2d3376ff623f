"""Provider configuration: which backend (mock or HTTP) serves each of the
six contracts, plus store location and template set.

Credential handling: the config stores env var *names* only. Values are read
lazily by live clients at call time, so they can never end up in serialized
config, logs, or session archives.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from ..errors import MalformedConfig, MissingCredential

CONFIG_SCHEMA = "tracetune/config/v1"

PROVIDER_NAMES = ("text", "image", "inpaint", "segmentation", "embedding", "caption")


@dataclass(frozen=True)
class ProviderSpec:
    name: str
    kind: str  # "mock" | "http"
    endpoint: str | None = None
    credential_env: str | None = None
    timeout_s: float = 30.0
    retries: int = 1
    template_set: str | None = None
    options: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ProviderConfig:
    providers: dict[str, ProviderSpec]
    store_dir: str | None = None
    templates_path: str | None = None
    concurrency_limit: int = 4
    base_dir: Path = field(default_factory=Path)

    def spec(self, name: str) -> ProviderSpec:
        return self.providers[name]

    def mock_only(self) -> bool:
        return all(s.kind == "mock" for s in self.providers.values())

    def resolve_path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p


def load_provider_config(
    path: str | Path, environment: Mapping[str, str] | None = None
) -> ProviderConfig:
    """Load and validate a config file. Live providers that declare a
    credential env var which is absent from the environment fail here with
    the var named; mock-only configs need no credentials at all."""
    environment = os.environ if environment is None else environment
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedConfig(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != CONFIG_SCHEMA:
        raise MalformedConfig(f"{path}: not a {CONFIG_SCHEMA} document")

    raw_providers = doc.get("providers")
    if not isinstance(raw_providers, dict):
        raise MalformedConfig(f"{path}: providers section missing")
    unknown = set(raw_providers) - set(PROVIDER_NAMES)
    if unknown:
        raise MalformedConfig(f"{path}: unknown providers {sorted(unknown)}")

    providers: dict[str, ProviderSpec] = {}
    for name in PROVIDER_NAMES:
        raw = raw_providers.get(name, {"kind": "mock"})
        if not isinstance(raw, dict):
            raise MalformedConfig(f"{path}: provider {name!r} must be an object")
        kind = raw.get("kind", "mock")
        if kind not in ("mock", "http"):
            raise MalformedConfig(f"{path}: provider {name!r} has unknown kind {kind!r}")
        timeout_s = raw.get("timeout_s", 30.0)
        if not isinstance(timeout_s, (int, float)) or timeout_s <= 0:
            raise MalformedConfig(f"{path}: provider {name!r} timeout must be positive")
        retries = raw.get("retries", 1)
        if not isinstance(retries, int) or retries < 0:
            raise MalformedConfig(f"{path}: provider {name!r} retries must be >= 0")
        endpoint = raw.get("endpoint")
        credential_env = raw.get("credential_env")
        if kind == "http":
            if not endpoint:
                raise MalformedConfig(f"{path}: provider {name!r} needs an endpoint")
            if credential_env and credential_env not in environment:
                raise MissingCredential(name, credential_env)
        providers[name] = ProviderSpec(
            name=name,
            kind=kind,
            endpoint=endpoint,
            credential_env=credential_env,
            timeout_s=float(timeout_s),
            retries=retries,
            template_set=raw.get("template_set"),
            options=dict(raw.get("options", {})),
        )

    concurrency = doc.get("concurrency_limit", 4)
    if not isinstance(concurrency, int) or concurrency < 1:
        raise MalformedConfig(f"{path}: concurrency_limit must be a positive integer")

    return ProviderConfig(
        providers=providers,
        store_dir=doc.get("store_dir"),
        templates_path=doc.get("templates"),
        concurrency_limit=concurrency,
        base_dir=path.parent.resolve(),
    )
