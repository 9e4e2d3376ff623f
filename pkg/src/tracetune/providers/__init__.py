"""Provider contracts, configuration, deterministic mocks, and live clients."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

from ..errors import MalformedConfig
from .base import (
    CaptionProvider,
    EmbeddingProvider,
    ImageProvider,
    InpaintProvider,
    InpaintSample,
    ProviderSet,
    SegmentationProvider,
    TextProvider,
)
from .config import PROVIDER_NAMES, ProviderConfig, ProviderSpec, load_provider_config
from .http import (
    ConcurrencyGate,
    HttpCaptionProvider,
    HttpEmbeddingProvider,
    HttpImageProvider,
    HttpInpaintProvider,
    HttpSegmentationProvider,
    HttpTextProvider,
)
from .mocks import (
    ColorRegionSegmentation,
    HashImageProvider,
    OneHotEmbeddingProvider,
    SceneImageProvider,
    ScriptedTextProvider,
    SolidFillInpaintProvider,
    StaticSegmentation,
    TableCaptionProvider,
    load_scene_fixture,
)
from .templates import TemplateSet, default_template_set, load_template_set

__all__ = [
    "CaptionProvider",
    "ColorRegionSegmentation",
    "ConcurrencyGate",
    "EmbeddingProvider",
    "HashImageProvider",
    "ImageProvider",
    "InpaintProvider",
    "InpaintSample",
    "OneHotEmbeddingProvider",
    "PROVIDER_NAMES",
    "ProviderConfig",
    "ProviderSet",
    "ProviderSpec",
    "SceneImageProvider",
    "ScriptedTextProvider",
    "SegmentationProvider",
    "SolidFillInpaintProvider",
    "StaticSegmentation",
    "TableCaptionProvider",
    "TemplateSet",
    "TextProvider",
    "build_providers",
    "default_template_set",
    "load_provider_config",
    "load_scene_fixture",
    "load_template_set",
]


def build_providers(
    config: ProviderConfig, environment: Mapping[str, str] | None = None
) -> ProviderSet:
    """Instantiate the six providers a config describes. Mock variants are
    selected through each spec's options; live clients share one FIFO gate."""
    gate = ConcurrencyGate(config.concurrency_limit)
    scene_cache: dict[str, dict] = {}

    def scenes_for(spec: ProviderSpec) -> dict:
        raw = spec.options.get("scenes")
        if not raw:
            raise MalformedConfig(f"provider {spec.name!r} mock needs a scenes fixture")
        path = str(config.resolve_path(raw))
        if path not in scene_cache:
            scene_cache[path] = load_scene_fixture(path)
        return scene_cache[path]

    def inline_or_file(spec: ProviderSpec, key: str):
        value = spec.options.get(key)
        if isinstance(value, str):
            return json.loads(Path(config.resolve_path(value)).read_text())
        return value

    def build(name: str):
        spec = config.spec(name)
        if spec.kind == "http":
            cls = {
                "text": HttpTextProvider,
                "image": HttpImageProvider,
                "inpaint": HttpInpaintProvider,
                "segmentation": HttpSegmentationProvider,
                "embedding": HttpEmbeddingProvider,
                "caption": HttpCaptionProvider,
            }[name]
            return cls(spec, gate=gate, environment=environment)

        if name == "text":
            table = inline_or_file(spec, "script")
            if table is None:
                raise MalformedConfig("text mock needs a script table")
            if isinstance(table, dict):
                table = table["entries"]
            return ScriptedTextProvider(table)
        if name == "image":
            variant = spec.options.get("variant", "hash")
            if variant == "hash":
                return HashImageProvider(
                    width=spec.options.get("width", 64),
                    height=spec.options.get("height", 64),
                )
            if variant == "scene":
                table = inline_or_file(spec, "table")
                if table is None:
                    raise MalformedConfig("scene image mock needs a table")
                return SceneImageProvider(table, scenes_for(spec))
            raise MalformedConfig(f"unknown image mock variant {variant!r}")
        if name == "inpaint":
            return SolidFillInpaintProvider(
                perturb_outside=spec.options.get("perturb_outside", True)
            )
        if name == "segmentation":
            variant = spec.options.get("variant", "color_region")
            if variant == "color_region":
                return ColorRegionSegmentation()
            if variant == "static":
                return StaticSegmentation()
            raise MalformedConfig(f"unknown segmentation mock variant {variant!r}")
        if name == "embedding":
            if "scenes" in spec.options:
                return OneHotEmbeddingProvider.from_scenes(
                    scenes_for(spec), dimension=spec.options.get("dimension")
                )
            labels = spec.options.get("labels")
            if not labels:
                raise MalformedConfig("embedding mock needs labels or a scenes fixture")
            colors = {
                tuple(color): idx
                for idx, color in enumerate(spec.options.get("colors", []))
            }
            return OneHotEmbeddingProvider(
                labels=labels, colors=colors, dimension=spec.options.get("dimension")
            )
        if name == "caption":
            table = inline_or_file(spec, "table") or {}
            return TableCaptionProvider(table=table, default=spec.options.get("default"))
        raise MalformedConfig(f"unknown provider {name!r}")

    return ProviderSet(**{name: build(name) for name in PROVIDER_NAMES})
