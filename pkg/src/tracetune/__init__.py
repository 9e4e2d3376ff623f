"""Traceable prompt-to-image refinement: structured prompts whose elements
map to image regions, region-to-label resolution, and semantic-guided
refinement with controlled seeds and inpainting."""

from .prompt import (
    ContentElement,
    LabelTree,
    PromptDiff,
    StructuredPrompt,
    derive_label_tree,
    diff_prompts,
    parse_structured_prompt,
    segment_for_label,
    serialize_structured_prompt,
)

__version__ = "0.1.0"

__all__ = [
    "ContentElement",
    "LabelTree",
    "PromptDiff",
    "StructuredPrompt",
    "derive_label_tree",
    "diff_prompts",
    "parse_structured_prompt",
    "segment_for_label",
    "serialize_structured_prompt",
    "__version__",
]
