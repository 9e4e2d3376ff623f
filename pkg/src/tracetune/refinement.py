"""The three refinement pipelines: global prompt rewrite, semantic prompt
edit regenerated under the base seed, and region inpainting, plus mixed mode
(two seed results and two inpaint results side by side).

Seed-mode variants use consecutive seeds starting at the base seed, so the
first variant of an unchanged prompt reproduces the base image exactly under
a deterministic generator. Inpaint results are re-composited here: pixels
outside the mask are always copied back from the base image, making locality
an engine guarantee instead of a provider promise.
"""

from __future__ import annotations

import hashlib
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .correspondence import CorrespondenceEngine
from .errors import (
    DimensionMismatch,
    InvalidRequest,
    ProviderFailure,
    PromptSchemaError,
    SchemaViolation,
    TraceTuneError,
)
from .geometry import RegionSelection
from .imaging import ImageData
from .prompt import (
    StructuredPrompt,
    parse_structured_prompt,
    segment_for_label,
    serialize_structured_prompt,
)
from .providers.base import ProviderSet
from .providers.templates import TemplateSet

REFINEMENT_MODES = ("global", "seed", "inpaint", "mixed")
BATCH_SIZE = 4

# Modes that regenerate the whole image and can therefore overwrite pixels a
# previous inpaint placed.
_REGENERATING_MODES = ("global", "seed", "mixed")


@dataclass(frozen=True)
class SelectionRef:
    region: RegionSelection
    label: str


@dataclass(frozen=True)
class ReferenceCaption:
    caption: str
    source_image_digest: str

    def __post_init__(self):
        if not self.caption:
            raise SchemaViolation("caption", "provider returned an empty caption")


@dataclass(frozen=True)
class RefinementRequest:
    mode: str
    base_image_id: str
    base_prompt: StructuredPrompt
    base_seed: int
    instruction: str | None = None
    reference_image: ImageData | None = None
    selection: SelectionRef | None = None
    base_method: str | None = None
    randomize_seed: bool = False

    def validate(self) -> None:
        if self.mode not in REFINEMENT_MODES:
            raise InvalidRequest(f"unknown refinement mode {self.mode!r}")
        if self.mode == "global":
            if self.selection is not None:
                raise InvalidRequest("global mode does not take a selection")
        elif self.selection is None:
            raise InvalidRequest(f"{self.mode} mode requires a selection")
        has_instruction = bool(self.instruction and self.instruction.strip())
        if not has_instruction and self.reference_image is None:
            raise InvalidRequest("need an instruction or a reference image")


@dataclass(frozen=True)
class GeneratedImage:
    method: str  # global | seed | inpaint
    seed: int
    prompt_after: StructuredPrompt
    image: ImageData | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.image is not None


@dataclass(frozen=True)
class GenerationBatch:
    results: tuple[GeneratedImage, ...]
    inpaint_overwrite_warning: bool = False

    def __post_init__(self):
        object.__setattr__(self, "results", tuple(self.results))

    def methods(self) -> list[str]:
        return [r.method for r in self.results]


@dataclass
class RefinementEngine:
    providers: ProviderSet
    templates: TemplateSet
    rng: random.Random = field(default_factory=random.Random)

    def __post_init__(self):
        self._caption_cache: dict[str, ReferenceCaption] = {}
        self._correspondence = CorrespondenceEngine(
            self.providers.segmentation, self.providers.embedding
        )

    # --- captioning ---

    def caption_reference(self, image: ImageData | bytes) -> ReferenceCaption:
        """Caption a reference image, memoized by content digest so the same
        upload never hits the vision provider twice."""
        if isinstance(image, (bytes, bytearray)):
            image = ImageData.from_png_bytes(bytes(image))
        digest = image.digest()
        cached = self._caption_cache.get(digest)
        if cached is not None:
            return cached
        try:
            text = self.providers.caption.caption(image)
        except TraceTuneError:
            raise
        except Exception as exc:
            raise ProviderFailure("caption", "captioning call failed") from exc
        result = ReferenceCaption(caption=text, source_image_digest=digest)
        self._caption_cache[digest] = result
        return result

    # --- prompt refinement LLM calls ---

    def refine_prompt_global(
        self,
        base: StructuredPrompt,
        instruction: str | None = None,
        caption: ReferenceCaption | None = None,
    ) -> StructuredPrompt:
        merged = _fuse_instruction(instruction, caption)
        if not merged:
            raise InvalidRequest("global refinement needs an instruction or caption")
        return self._prompt_from_llm(
            "refine_global",
            prompt=serialize_structured_prompt(base),
            instruction=merged,
        )

    def refine_prompt_semantic(
        self,
        base: StructuredPrompt,
        label: str,
        instruction: str | None = None,
        caption: ReferenceCaption | None = None,
    ) -> StructuredPrompt:
        segment = segment_for_label(base, label)  # raises UnknownLabel
        merged = _fuse_instruction(instruction, caption)
        if not merged:
            raise InvalidRequest("semantic refinement needs an instruction or caption")
        return self._prompt_from_llm(
            "refine_semantic",
            prompt=serialize_structured_prompt(base),
            label=segment.element.label,
            segment=segment.element.description,
            instruction=merged,
        )

    def build_inpaint_prompt(
        self,
        base: StructuredPrompt,
        label: str,
        instruction: str | None = None,
        caption: ReferenceCaption | None = None,
    ) -> str:
        segment = segment_for_label(base, label)
        merged = _fuse_instruction(instruction, caption)
        if not merged:
            raise InvalidRequest("inpainting needs an instruction or caption")
        rendered = self.templates.render(
            "inpaint_region",
            prompt=serialize_structured_prompt(base),
            label=segment.element.label,
            segment=segment.element.description,
            instruction=merged,
        )
        text = self._generate_text(rendered)
        if not text.strip():
            retry = rendered + "\n\n" + self.templates.render(
                "schema_retry", reason="The region prompt must not be empty."
            )
            text = self._generate_text(retry)
            if not text.strip():
                raise SchemaViolation("text", "empty region prompt after retry")
        return text.strip()

    def merge_inpaint_into_prompt(
        self, base: StructuredPrompt, region_prompt: str
    ) -> StructuredPrompt:
        if not region_prompt or not region_prompt.strip():
            raise SchemaViolation("text", "cannot merge an empty region prompt")
        return self._prompt_from_llm(
            "merge_inpaint",
            prompt=serialize_structured_prompt(base),
            region_prompt=region_prompt,
        )

    # --- generation ---

    def generate_with_seed(
        self, p: StructuredPrompt, seed: int, n: int, method: str = "seed"
    ) -> list[GeneratedImage]:
        """Generate n variants with consecutive seeds seed, seed+1, ... Each
        result records its exact seed and prompt; per-item provider failures
        become error records instead of aborting the batch."""
        if n < 1:
            raise InvalidRequest("variant count must be >= 1")
        prompt_text = _prompt_text(p)

        def one(k: int) -> GeneratedImage:
            variant_seed = seed + k
            try:
                image = self.providers.image.generate(prompt_text, variant_seed)
            except TraceTuneError as exc:
                return GeneratedImage(
                    method=method, seed=variant_seed, prompt_after=p, error=str(exc)
                )
            except Exception:
                return GeneratedImage(
                    method=method,
                    seed=variant_seed,
                    prompt_after=p,
                    error="image generation failed",
                )
            return GeneratedImage(
                method=method, seed=variant_seed, prompt_after=p, image=image
            )

        with ThreadPoolExecutor(max_workers=min(n, BATCH_SIZE)) as pool:
            return list(pool.map(one, range(n)))

    def inpaint(
        self,
        image: ImageData,
        mask: np.ndarray,
        region_prompt: str,
        *,
        prompt_after: StructuredPrompt | None = None,
    ) -> GeneratedImage:
        return self._inpaint_samples(image, mask, region_prompt, 1, prompt_after)[0]

    def _inpaint_samples(
        self,
        image: ImageData,
        mask: np.ndarray,
        region_prompt: str,
        count: int,
        prompt_after: StructuredPrompt | None,
    ) -> list[GeneratedImage]:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (image.height, image.width):
            raise DimensionMismatch(
                f"mask shape {mask.shape} does not match image "
                f"{image.height}x{image.width}"
            )
        if not mask.any():
            raise InvalidRequest("inpaint mask is empty")
        try:
            samples = self.providers.inpaint.fill(image, mask, region_prompt, count)
        except TraceTuneError:
            raise
        except Exception as exc:
            raise ProviderFailure("inpaint", "inpainting call failed") from exc
        if len(samples) != count:
            raise ProviderFailure(
                "inpaint", f"asked for {count} samples, got {len(samples)}"
            )
        results = []
        outside = ~mask
        for index, sample in enumerate(samples):
            if sample.image.size != image.size:
                raise DimensionMismatch(
                    f"provider sample {index} has size {sample.image.size}, "
                    f"expected {image.size}"
                )
            # Locality guarantee: restore every outside-mask pixel from the base.
            px = np.array(sample.image.pixels, dtype=np.uint8, copy=True)
            px[outside] = image.pixels[outside]
            seed = sample.seed
            if seed is None:
                seed = _synthetic_seed(region_prompt, index)
            results.append(
                GeneratedImage(
                    method="inpaint",
                    seed=int(seed),
                    prompt_after=prompt_after,
                    image=ImageData(px),
                )
            )
        return results

    # --- orchestration ---

    def execute_refinement(
        self, request: RefinementRequest, base_image: ImageData
    ) -> GenerationBatch:
        """Run one refinement and return its batch of four results:
        mode=seed gives four seed-method variants of the semantically refined
        prompt, mode=inpaint four samples of one region prompt, mode=mixed two
        of each, mode=global four variants of the globally refined prompt."""
        request.validate()
        caption = (
            self.caption_reference(request.reference_image)
            if request.reference_image is not None
            else None
        )
        warning = (
            request.base_method == "inpaint" and request.mode in _REGENERATING_MODES
        )

        if request.mode == "global":
            refined = self.refine_prompt_global(
                request.base_prompt, request.instruction, caption
            )
            seeds = self._global_seeds(request)
            results = self._generate_at_seeds(refined, seeds, "global")
        elif request.mode == "seed":
            refined = self.refine_prompt_semantic(
                request.base_prompt, request.selection.label, request.instruction, caption
            )
            results = self.generate_with_seed(refined, request.base_seed, BATCH_SIZE)
        elif request.mode == "inpaint":
            results = self._run_inpaint(request, base_image, caption, BATCH_SIZE)
        else:  # mixed
            refined = self.refine_prompt_semantic(
                request.base_prompt, request.selection.label, request.instruction, caption
            )
            seed_half = self.generate_with_seed(refined, request.base_seed, 2)
            inpaint_half = self._run_inpaint(request, base_image, caption, 2)
            results = seed_half + inpaint_half

        return GenerationBatch(results=tuple(results), inpaint_overwrite_warning=warning)

    def _run_inpaint(
        self,
        request: RefinementRequest,
        base_image: ImageData,
        caption: ReferenceCaption | None,
        count: int,
    ) -> list[GeneratedImage]:
        selection = request.selection
        region_prompt = self.build_inpaint_prompt(
            request.base_prompt, selection.label, request.instruction, caption
        )
        seg = self._correspondence.segment_region(base_image, selection.region)
        merged = self.merge_inpaint_into_prompt(request.base_prompt, region_prompt)
        return self._inpaint_samples(base_image, seg.mask, region_prompt, count, merged)

    def _global_seeds(self, request: RefinementRequest) -> list[int]:
        if request.randomize_seed:
            return [self.rng.randrange(2**32) for _ in range(BATCH_SIZE)]
        return [request.base_seed + k for k in range(BATCH_SIZE)]

    def _generate_at_seeds(
        self, p: StructuredPrompt, seeds: list[int], method: str
    ) -> list[GeneratedImage]:
        prompt_text = _prompt_text(p)

        def one(seed: int) -> GeneratedImage:
            try:
                image = self.providers.image.generate(prompt_text, seed)
            except TraceTuneError as exc:
                return GeneratedImage(method=method, seed=seed, prompt_after=p, error=str(exc))
            except Exception:
                return GeneratedImage(
                    method=method, seed=seed, prompt_after=p, error="image generation failed"
                )
            return GeneratedImage(method=method, seed=seed, prompt_after=p, image=image)

        with ThreadPoolExecutor(max_workers=len(seeds)) as pool:
            return list(pool.map(one, seeds))

    # --- LLM plumbing ---

    def _generate_text(self, rendered: str) -> str:
        return generate_text(self.providers.text, rendered)

    def _prompt_from_llm(self, template_name: str, **variables: str) -> StructuredPrompt:
        return prompt_from_llm(self.providers.text, self.templates, template_name, **variables)


def generate_text(provider, rendered: str) -> str:
    try:
        return provider.generate(rendered)
    except TraceTuneError:
        raise
    except Exception as exc:
        raise ProviderFailure("text", "text generation failed") from exc


def prompt_from_llm(
    provider, templates: TemplateSet, template_name: str, **variables: str
) -> StructuredPrompt:
    """Render the template, call the text provider, and parse the output as a
    prompt document. Non-conforming output gets exactly one retry with a
    corrective clause, then surfaces as SchemaViolation."""
    rendered = templates.render(template_name, **variables)
    out = generate_text(provider, rendered)
    try:
        return parse_structured_prompt(out)
    except PromptSchemaError as first:
        retry = rendered + "\n\n" + templates.render("schema_retry", reason=str(first))
        out = generate_text(provider, retry)
        try:
            return parse_structured_prompt(out)
        except PromptSchemaError as second:
            raise SchemaViolation(
                "text", f"prompt document invalid after retry: {second}"
            ) from second


def _fuse_instruction(instruction: str | None, caption: ReferenceCaption | None) -> str:
    parts = []
    if instruction and instruction.strip():
        parts.append(instruction.strip())
    if caption is not None:
        parts.append(f"reference: {caption.caption}")
    return "\n".join(parts)


def _prompt_text(p: StructuredPrompt) -> str:
    return serialize_structured_prompt(p)


def _synthetic_seed(region_prompt: str, index: int) -> int:
    raw = hashlib.sha256(f"{index}\x00{region_prompt}".encode()).digest()
    return int.from_bytes(raw[:4], "big")
