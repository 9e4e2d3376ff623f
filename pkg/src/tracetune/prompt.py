"""Structured prompt model: six fixed categories, labeled content elements,
label trees, serialization, and prompt diffing.

The content category is the traceability substrate: each element carries a
short noun-phrase label that image regions resolve back to. Everything here
is an immutable value; operations are pure functions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import (
    CyclicParent,
    DuplicateLabel,
    EmptyContent,
    MissingCategory,
    PromptSchemaError,
    UnknownField,
    UnknownLabel,
    UnknownParent,
)

PROMPT_SCHEMA = "tracetune/prompt/v1"

# The six categories, in canonical serialization order.
CATEGORIES = ("theme", "art_style", "content", "lighting", "color", "shot_angle")
TEXT_CATEGORIES = ("theme", "art_style", "lighting", "color", "shot_angle")


def normalize_label(label: str) -> str:
    """Label identity: case-folded, whitespace-trimmed exact match."""
    return label.strip().casefold()


@dataclass(frozen=True)
class ContentElement:
    label: str
    description: str
    parent: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "label", self.label.strip())
        if not self.label:
            raise PromptSchemaError("content element has an empty label")

    @property
    def key(self) -> str:
        return normalize_label(self.label)


@dataclass(frozen=True)
class StructuredPrompt:
    theme: str
    art_style: str
    content: tuple[ContentElement, ...]
    lighting: str
    color: str
    shot_angle: str

    def __post_init__(self):
        elements = tuple(self.content)
        object.__setattr__(self, "content", elements)
        if not elements:
            raise EmptyContent()
        seen: dict[str, str] = {}
        for el in elements:
            if el.key in seen:
                raise DuplicateLabel(el.key)
            seen[el.key] = el.label
        for el in elements:
            if el.parent is not None and normalize_label(el.parent) not in seen:
                raise UnknownParent(el.label, el.parent)
        _check_acyclic(elements)

    def element_for(self, label: str) -> ContentElement:
        key = normalize_label(label)
        for el in self.content:
            if el.key == key:
                return el
        raise UnknownLabel(label)

    def has_label(self, label: str) -> bool:
        key = normalize_label(label)
        return any(el.key == key for el in self.content)

    def labels(self) -> list[str]:
        return [el.label for el in self.content]

    def digest(self) -> str:
        import hashlib

        return hashlib.sha256(serialize_structured_prompt(self).encode()).hexdigest()


def _check_acyclic(elements: tuple[ContentElement, ...]) -> None:
    by_key = {el.key: el for el in elements}
    for el in elements:
        seen = {el.key}
        cursor = el
        while cursor.parent is not None:
            pkey = normalize_label(cursor.parent)
            if pkey in seen:
                raise CyclicParent(el.label)
            seen.add(pkey)
            cursor = by_key[pkey]


@dataclass(frozen=True)
class LabelNode:
    label: str
    children: tuple["LabelNode", ...] = ()


@dataclass(frozen=True)
class LabelTree:
    roots: tuple[LabelNode, ...]

    def all_labels(self) -> list[str]:
        out: list[str] = []
        stack = list(reversed(self.roots))
        while stack:
            node = stack.pop()
            out.append(node.label)
            stack.extend(reversed(node.children))
        return out

    def node_count(self) -> int:
        return len(self.all_labels())


@dataclass(frozen=True)
class LabelSegment:
    """One element plus its ancestor chain (root first), as the UI needs to
    expand every enclosing section when a label is traced."""

    element: ContentElement
    ancestors: tuple[ContentElement, ...] = ()


@dataclass(frozen=True)
class PromptDiff:
    changed_categories: frozenset[str] = field(default_factory=frozenset)
    changed_labels: frozenset[str] = field(default_factory=frozenset)
    added_labels: frozenset[str] = field(default_factory=frozenset)
    removed_labels: frozenset[str] = field(default_factory=frozenset)

    def is_empty(self) -> bool:
        return not (
            self.changed_categories
            or self.changed_labels
            or self.added_labels
            or self.removed_labels
        )


def parse_structured_prompt(raw: str | bytes | dict) -> StructuredPrompt:
    """Parse a structured-prompt document.

    Accepts the JSON text of a document (or an already-decoded mapping).
    Rejects unknown fields, missing categories, empty content, duplicate
    labels (after case folding), dangling parents, and parent cycles.
    """
    if isinstance(raw, (str, bytes)):
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise PromptSchemaError(f"document is not valid JSON: {exc}") from exc
    else:
        doc = raw
    if not isinstance(doc, dict):
        raise PromptSchemaError("document must be a JSON object")

    allowed = {"schema", *CATEGORIES}
    for key in doc:
        if key not in allowed:
            raise UnknownField(key)
    schema = doc.get("schema", PROMPT_SCHEMA)
    if schema != PROMPT_SCHEMA:
        raise PromptSchemaError(f"unsupported prompt schema: {schema!r}")
    for category in CATEGORIES:
        if category not in doc:
            raise MissingCategory(category)
    for category in TEXT_CATEGORIES:
        if not isinstance(doc[category], str):
            raise PromptSchemaError(f"category {category!r} must be text")

    raw_content = doc["content"]
    if not isinstance(raw_content, list):
        raise PromptSchemaError("content must be an array of elements")
    if not raw_content:
        raise EmptyContent()

    elements = []
    for item in raw_content:
        if not isinstance(item, dict):
            raise PromptSchemaError("content elements must be objects")
        extra = set(item) - {"label", "description", "parent"}
        if extra:
            raise UnknownField(f"content element field {sorted(extra)[0]!r}")
        if "label" not in item or "description" not in item:
            raise PromptSchemaError("content element needs label and description")
        if not isinstance(item["label"], str) or not isinstance(item["description"], str):
            raise PromptSchemaError("content element label and description must be text")
        parent = item.get("parent")
        if parent is not None and not isinstance(parent, str):
            raise PromptSchemaError("content element parent must be text")
        elements.append(
            ContentElement(label=item["label"], description=item["description"], parent=parent)
        )

    return StructuredPrompt(
        theme=doc["theme"],
        art_style=doc["art_style"],
        content=tuple(elements),
        lighting=doc["lighting"],
        color=doc["color"],
        shot_angle=doc["shot_angle"],
    )


def serialize_structured_prompt(p: StructuredPrompt) -> str:
    """Serialize to the canonical document: fixed key order, stable element
    order, two-space indent. Equal prompts serialize byte-identically."""
    doc: dict = {"schema": PROMPT_SCHEMA}
    for category in CATEGORIES:
        if category == "content":
            doc["content"] = [
                {"label": el.label, "description": el.description}
                | ({"parent": el.parent} if el.parent is not None else {})
                for el in p.content
            ]
        else:
            doc[category] = getattr(p, category)
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def derive_label_tree(p: StructuredPrompt) -> LabelTree:
    """Build the label tree: parentless elements become roots, children keep
    content order. Contains every label exactly once."""
    children: dict[str, list[ContentElement]] = {el.key: [] for el in p.content}
    roots: list[ContentElement] = []
    for el in p.content:
        if el.parent is None:
            roots.append(el)
        else:
            children[normalize_label(el.parent)].append(el)

    def build(el: ContentElement) -> LabelNode:
        return LabelNode(label=el.label, children=tuple(build(c) for c in children[el.key]))

    return LabelTree(roots=tuple(build(el) for el in roots))


def segment_for_label(p: StructuredPrompt, label: str) -> LabelSegment:
    """Look up the element for a label (case-folded match) together with its
    ancestor chain, root first."""
    element = p.element_for(label)
    ancestors: list[ContentElement] = []
    cursor = element
    while cursor.parent is not None:
        cursor = p.element_for(cursor.parent)
        ancestors.append(cursor)
    ancestors.reverse()
    return LabelSegment(element=element, ancestors=tuple(ancestors))


def diff_prompts(before: StructuredPrompt, after: StructuredPrompt) -> PromptDiff:
    """Diff two prompts: set semantics on labels, a category is changed iff
    its text (or, for content, its element list) differs."""
    changed_categories = {
        c for c in TEXT_CATEGORIES if getattr(before, c) != getattr(after, c)
    }
    if before.content != after.content:
        changed_categories.add("content")

    before_by_key = {el.key: el for el in before.content}
    after_by_key = {el.key: el for el in after.content}

    added = {after_by_key[k].label for k in after_by_key.keys() - before_by_key.keys()}
    removed = {before_by_key[k].label for k in before_by_key.keys() - after_by_key.keys()}
    changed = set()
    for key in before_by_key.keys() & after_by_key.keys():
        b, a = before_by_key[key], after_by_key[key]
        if (b.label, b.description, b.parent) != (a.label, a.description, a.parent):
            changed.add(a.label)

    return PromptDiff(
        changed_categories=frozenset(changed_categories),
        changed_labels=frozenset(changed),
        added_labels=frozenset(added),
        removed_labels=frozenset(removed),
    )
