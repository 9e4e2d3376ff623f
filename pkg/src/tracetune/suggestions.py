"""Refinement suggestion generation: whole-scene options, per-label refine
and replace options, and completions of a partially typed instruction.

Counts are contractual (5, 3+3, 5). Providers are not trusted to hit them:
each call gets one corrective retry, surplus items are truncated, a deficit
after the retry is a SchemaViolation. Suggestions are plain text shown to the
user; applying one feeds it back as a refinement instruction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import InvalidRequest, ProviderFailure, SchemaViolation, TraceTuneError
from .prompt import StructuredPrompt, segment_for_label, serialize_structured_prompt
from .providers.base import TextProvider
from .providers.templates import TemplateSet

GLOBAL_COUNT = 5
LABEL_COUNT_PER_TAG = 3
EXPANDED_COUNT = 5

LABEL_TAGS = ("refine", "replace")


@dataclass(frozen=True)
class SuggestionItem:
    text: str
    tag: str | None = None  # "refine" | "replace" on label-based items


@dataclass(frozen=True)
class SuggestionProvenance:
    prompt_digest: str
    label: str | None = None
    user_input: str | None = None


@dataclass(frozen=True)
class SuggestionSet:
    kind: str  # global | label_based | expanded
    items: tuple[SuggestionItem, ...]
    provenance: SuggestionProvenance


@dataclass
class SuggestionEngine:
    text: TextProvider
    templates: TemplateSet

    def suggest_global(self, p: StructuredPrompt) -> SuggestionSet:
        rendered = self.templates.render(
            "suggest_global", prompt=serialize_structured_prompt(p)
        )
        items = self._texts_with_retry(rendered, GLOBAL_COUNT)
        return SuggestionSet(
            kind="global",
            items=tuple(SuggestionItem(text=t) for t in items),
            provenance=SuggestionProvenance(prompt_digest=p.digest()),
        )

    def suggest_for_label(self, p: StructuredPrompt, label: str) -> SuggestionSet:
        segment = segment_for_label(p, label)  # raises UnknownLabel
        rendered = self.templates.render(
            "suggest_label",
            prompt=serialize_structured_prompt(p),
            label=segment.element.label,
            segment=segment.element.description,
        )
        items = self._tagged_with_retry(rendered)
        return SuggestionSet(
            kind="label_based",
            items=tuple(items),
            provenance=SuggestionProvenance(
                prompt_digest=p.digest(), label=segment.element.label
            ),
        )

    def suggest_expanded(
        self, p: StructuredPrompt, user_input: str, label: str | None = None
    ) -> SuggestionSet:
        if not user_input or not user_input.strip():
            raise InvalidRequest("expanded suggestions need a non-empty user input")
        label_clause = ""
        display_label = None
        if label is not None:
            segment = segment_for_label(p, label)
            display_label = segment.element.label
            label_clause = f' while working on the element labeled "{display_label}"'
        rendered = self.templates.render(
            "suggest_expanded",
            prompt=serialize_structured_prompt(p),
            user_input=user_input.strip(),
            label_clause=label_clause,
        )
        items = self._texts_with_retry(rendered, EXPANDED_COUNT)
        return SuggestionSet(
            kind="expanded",
            items=tuple(SuggestionItem(text=t) for t in items),
            provenance=SuggestionProvenance(
                prompt_digest=p.digest(),
                label=display_label,
                user_input=user_input.strip(),
            ),
        )

    # --- provider output handling ---

    def _generate(self, rendered: str) -> str:
        try:
            return self.text.generate(rendered)
        except TraceTuneError:
            raise
        except Exception as exc:
            raise ProviderFailure("text", "suggestion call failed") from exc

    def _texts_with_retry(self, rendered: str, count: int) -> list[str]:
        first = _parse_texts(self._generate(rendered))
        if first is not None and len(first) >= count:
            return first[:count]
        retry = rendered + "\n\n" + self.templates.render(
            "schema_retry",
            reason=f"Reply with a JSON array of exactly {count} distinct strings.",
        )
        second = _parse_texts(self._generate(retry))
        if second is not None and len(second) >= count:
            return second[:count]
        raise SchemaViolation("text", f"expected {count} suggestions after retry")

    def _tagged_with_retry(self, rendered: str) -> list[SuggestionItem]:
        first = _parse_tagged(self._generate(rendered))
        if first is not None:
            return first
        retry = rendered + "\n\n" + self.templates.render(
            "schema_retry",
            reason=(
                "Reply with a JSON array of exactly 6 objects, 3 tagged "
                '"refine" and 3 tagged "replace", each with distinct text.'
            ),
        )
        second = _parse_tagged(self._generate(retry))
        if second is not None:
            return second
        raise SchemaViolation("text", "expected 3 refine + 3 replace suggestions after retry")


def _parse_texts(raw: str) -> list[str] | None:
    """Parse a JSON array of strings; returns deduplicated non-empty texts,
    or None when the shape is wrong."""
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError:
        return None
    if not isinstance(doc, list) or not all(isinstance(x, str) for x in doc):
        return None
    out: list[str] = []
    for text in (x.strip() for x in doc):
        if text and text not in out:
            out.append(text)
    return out


def _parse_tagged(raw: str) -> list[SuggestionItem] | None:
    """Parse the label-based shape: 6 objects tagged refine/replace. Surplus
    per tag is truncated; returns None on any deficit or malformed item."""
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError:
        return None
    if not isinstance(doc, list):
        return None
    by_tag: dict[str, list[str]] = {tag: [] for tag in LABEL_TAGS}
    seen: set[str] = set()
    for item in doc:
        if not isinstance(item, dict):
            return None
        tag, text = item.get("tag"), item.get("text")
        if tag not in LABEL_TAGS or not isinstance(text, str) or not text.strip():
            return None
        text = text.strip()
        if text not in seen:
            seen.add(text)
            by_tag[tag].append(text)
    if any(len(by_tag[tag]) < LABEL_COUNT_PER_TAG for tag in LABEL_TAGS):
        return None
    return [
        SuggestionItem(text=text, tag=tag)
        for tag in LABEL_TAGS
        for text in by_tag[tag][:LABEL_COUNT_PER_TAG]
    ]
