"""Exception taxonomy shared across the engine.

Every error that crosses a module boundary lives here so callers (service,
CLI, tests) can catch by family instead of by module.
"""

from __future__ import annotations


class TraceTuneError(Exception):
    """Base class for all engine errors."""


# --- structured prompt schema ---

class PromptSchemaError(TraceTuneError):
    """A document or provider output does not satisfy the prompt schema."""


class MissingCategory(PromptSchemaError):
    def __init__(self, category: str):
        super().__init__(f"missing prompt category: {category!r}")
        self.category = category


class EmptyContent(PromptSchemaError):
    def __init__(self):
        super().__init__("content category has no elements")


class DuplicateLabel(PromptSchemaError):
    def __init__(self, label: str):
        super().__init__(f"duplicate content label: {label!r}")
        self.label = label


class CyclicParent(PromptSchemaError):
    def __init__(self, label: str):
        super().__init__(f"cyclic parent chain at label: {label!r}")
        self.label = label


class UnknownParent(PromptSchemaError):
    def __init__(self, label: str, parent: str):
        super().__init__(f"element {label!r} names unknown parent {parent!r}")
        self.label = label
        self.parent = parent


class UnknownField(PromptSchemaError):
    def __init__(self, field: str):
        super().__init__(f"unknown field in prompt document: {field!r}")
        self.field = field


class UnknownLabel(TraceTuneError):
    def __init__(self, label: str):
        super().__init__(f"label not present in prompt: {label!r}")
        self.label = label


# --- providers ---

class ProviderFailure(TraceTuneError):
    """An external model call failed. The message never carries raw provider
    payloads or credentials; `provider` names which contract failed."""

    def __init__(self, provider: str, message: str = "provider call failed", *, retryable: bool = False):
        super().__init__(f"{provider}: {message}")
        self.provider = provider
        self.retryable = retryable


class SchemaViolation(TraceTuneError):
    """Provider emitted output that does not conform to its contract, even
    after the single corrective retry."""

    def __init__(self, provider: str, message: str):
        super().__init__(f"{provider}: {message}")
        self.provider = provider


class UnscriptedInput(TraceTuneError):
    """A scripted mock received an input with no table entry. This is a test
    authoring error, never an engine condition."""


class MalformedConfig(TraceTuneError):
    pass


class MissingCredential(TraceTuneError):
    def __init__(self, provider: str, env_var: str):
        super().__init__(f"provider {provider!r} needs credential env var {env_var!r} (not set)")
        self.provider = provider
        self.env_var = env_var


# --- imaging / correspondence ---

class UndecodableImage(TraceTuneError):
    pass


class EmptyMask(TraceTuneError):
    def __init__(self, message: str = "segmentation returned an all-false mask"):
        super().__init__(message)


class EmptyLabelSet(TraceTuneError):
    def __init__(self):
        super().__init__("no candidate labels to score")


class DimensionMismatch(TraceTuneError):
    def __init__(self, message: str):
        super().__init__(message)


# --- refinement / session ---

class InvalidRequest(TraceTuneError):
    """A refinement or session operation violated a precondition."""


class UnknownNode(TraceTuneError):
    def __init__(self, node_id: str):
        super().__init__(f"unknown session node: {node_id!r}")
        self.node_id = node_id


class StorageFailure(TraceTuneError):
    pass


# --- cli scripts ---

class ScriptParseError(TraceTuneError):
    def __init__(self, message: str, step: int | None = None):
        where = f" (step {step})" if step is not None else ""
        super().__init__(f"{message}{where}")
        self.step = step


class AssertionFailed(TraceTuneError):
    def __init__(self, step: int, message: str):
        super().__init__(f"expect step {step} failed: {message}")
        self.step = step
