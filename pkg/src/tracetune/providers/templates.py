"""Named prompt templates with `{variable}` substitution.

Template sets live in a versioned JSON file so wording can be edited without
a rebuild. The packaged `default` set is authored for this engine; deployments
point the config at their own file to override it.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..errors import MalformedConfig

TEMPLATE_SCHEMA = "tracetune/templates/v1"

REQUIRED_TEMPLATES = (
    "brainstorm",
    "refine_global",
    "refine_semantic",
    "inpaint_region",
    "merge_inpaint",
    "suggest_global",
    "suggest_label",
    "suggest_expanded",
    "schema_retry",
)

_formatter = string.Formatter()


@dataclass(frozen=True)
class TemplateSet:
    set_id: str
    templates: dict[str, str]

    def render(self, name: str, **variables: str) -> str:
        if name not in self.templates:
            raise MalformedConfig(f"template set {self.set_id!r} has no template {name!r}")
        text = self.templates[name]
        needed = {f for _, f, _, _ in _formatter.parse(text) if f}
        missing = needed - variables.keys()
        if missing:
            raise MalformedConfig(
                f"template {name!r} needs variables {sorted(missing)}"
            )
        return text.format(**{k: variables[k] for k in needed})


def load_template_set(path: str | Path) -> TemplateSet:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedConfig(f"cannot read template file {path}: {exc}") from exc
    return _template_set_from_doc(doc, source=str(path))


def default_template_set() -> TemplateSet:
    data = resources.files("tracetune").joinpath("templates/default.json").read_text()
    return _template_set_from_doc(json.loads(data), source="packaged default")


def _template_set_from_doc(doc: dict, source: str) -> TemplateSet:
    if not isinstance(doc, dict) or doc.get("schema") != TEMPLATE_SCHEMA:
        raise MalformedConfig(f"{source}: not a {TEMPLATE_SCHEMA} document")
    templates = doc.get("templates")
    if not isinstance(templates, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in templates.items()
    ):
        raise MalformedConfig(f"{source}: templates must map names to text")
    missing = [name for name in REQUIRED_TEMPLATES if name not in templates]
    if missing:
        raise MalformedConfig(f"{source}: missing templates {missing}")
    return TemplateSet(set_id=str(doc.get("id", "default")), templates=dict(templates))
