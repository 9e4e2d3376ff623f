"""HTTP API exposing the full workflow: session creation, region-to-label
resolution, refinement batches, suggestions, reference uploads, and the
iteration tree.

The API is a thin adapter over the engines; every module invariant holds
unchanged through it. Refinement is the one long-running call: it returns a
batch id immediately and clients poll /batches/{id}. One refinement runs per
session at a time; a concurrent second request gets a conflict response.
Images are served by content digest under an immutable cache policy.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from typing import Any

from fastapi import FastAPI, Request, Response, UploadFile
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .correspondence import CorrespondenceEngine
from .errors import (
    DimensionMismatch,
    EmptyLabelSet,
    EmptyMask,
    InvalidRequest,
    ProviderFailure,
    PromptSchemaError,
    SchemaViolation,
    StorageFailure,
    TraceTuneError,
    UndecodableImage,
    UnknownLabel,
    UnknownNode,
)
from .geometry import RegionSelection
from .imaging import ImageData, mask_to_rle
from .prompt import StructuredPrompt, segment_for_label, serialize_structured_prompt
from .providers import ProviderConfig, build_providers, default_template_set, load_template_set
from .refinement import SelectionRef
from .session import Session, SessionManager, SessionNode, SessionStore
from .suggestions import SuggestionEngine


# --- request bodies ---


class SessionCreateBody(BaseModel):
    initial_input: str


class SelectBody(BaseModel):
    node_id: str


class SelectionBody(BaseModel):
    kind: str
    point: tuple[int, int] | None = None
    box: tuple[int, int, int, int] | None = None
    label: str | None = None

    def to_region(self) -> RegionSelection:
        if self.kind == "point":
            if self.point is None:
                raise InvalidRequest("point selection needs a point")
            return RegionSelection.at_point(*self.point)
        if self.kind == "box":
            if self.box is None:
                raise InvalidRequest("box selection needs a box")
            return RegionSelection.in_box(*self.box)
        raise InvalidRequest(f"unknown selection kind {self.kind!r}")


class ResolveBody(BaseModel):
    selection: SelectionBody


class RefineBody(BaseModel):
    mode: str
    instruction: str | None = None
    reference_digest: str | None = None
    selection: SelectionBody | None = None
    randomize_seed: bool = False


class SuggestionBody(BaseModel):
    kind: str
    session_id: str
    node_id: str
    label: str | None = None
    input: str | None = Field(default=None)


# --- batch registry ---


@dataclass
class BatchJob:
    batch_id: str
    session_id: str
    node_id: str
    status: str = "queued"  # queued | running | done | partial | failed
    nodes: list[dict] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    inpaint_overwrite_warning: bool = False

    def payload(self) -> dict:
        return {
            "batch_id": self.batch_id,
            "session_id": self.session_id,
            "node_id": self.node_id,
            "status": self.status,
            "nodes": self.nodes,
            "errors": self.errors,
            "inpaint_overwrite_warning": self.inpaint_overwrite_warning,
        }


class ApiState:
    def __init__(self, manager: SessionManager):
        self.manager = manager
        self.correspondence = CorrespondenceEngine(
            manager.providers.segmentation, manager.providers.embedding
        )
        self.suggestions = SuggestionEngine(manager.providers.text, manager.templates)
        self.batches: dict[str, BatchJob] = {}
        self.session_locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def session_lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self.session_locks.setdefault(session_id, threading.Lock())

    def new_batch(self, session_id: str, node_id: str) -> BatchJob:
        job = BatchJob(batch_id=uuid.uuid4().hex[:12], session_id=session_id, node_id=node_id)
        with self._registry_lock:
            self.batches[job.batch_id] = job
        return job


class ConflictError(TraceTuneError):
    pass


_ERROR_CODES: list[tuple[type, str, int]] = [
    (ConflictError, "conflict", 409),
    (UnknownNode, "not_found", 404),
    (UnknownLabel, "bad_request", 400),
    (InvalidRequest, "bad_request", 400),
    (PromptSchemaError, "bad_request", 400),
    (UndecodableImage, "bad_request", 400),
    (EmptyLabelSet, "bad_request", 400),
    (EmptyMask, "bad_request", 400),
    (DimensionMismatch, "bad_request", 400),
    (SchemaViolation, "provider_failure", 502),
    (ProviderFailure, "provider_failure", 502),
    (StorageFailure, "not_found", 404),
    (TraceTuneError, "internal", 500),
]


def _error_response(exc: Exception) -> JSONResponse:
    for cls, code, status in _ERROR_CODES:
        if isinstance(exc, cls):
            body = {"error": {"code": code, "message": str(exc), "detail": _detail(exc)}}
            if isinstance(exc, ProviderFailure):
                body["error"]["retryable"] = exc.retryable
            return JSONResponse(status_code=status, content=body)
    return JSONResponse(
        status_code=500,
        content={"error": {"code": "internal", "message": "internal error", "detail": None}},
    )


def _detail(exc: Exception) -> Any:
    for attr in ("label", "node_id", "category", "field", "env_var", "provider"):
        value = getattr(exc, attr, None)
        if value is not None:
            return {attr: value}
    return None


# --- payload builders ---


def _prompt_doc(prompt: StructuredPrompt) -> dict:
    return json.loads(serialize_structured_prompt(prompt))


def _node_payload(node: SessionNode) -> dict:
    return {
        "node_id": node.node_id,
        "parent_id": node.parent_id,
        "method": node.method,
        "seed": node.seed,
        "image_digest": node.image_digest,
        "image_url": f"/images/{node.image_digest}",
        "created_at": node.created_at,
        "prompt": _prompt_doc(node.prompt),
        "refinement_record": node.refinement_record.to_doc()
        if node.refinement_record
        else None,
    }


def _session_summary(session: Session) -> dict:
    return {
        "session_id": session.session_id,
        "initial_input": session.initial_input,
        "active_node_id": session.active_node_id,
        "created_at": session.created_at,
        "node_count": len(session.nodes),
        "generation_errors": session.generation_errors,
    }


def _label_payload(prompt: StructuredPrompt, label: str, score: float) -> dict:
    segment = segment_for_label(prompt, label)
    return {
        "label": segment.element.label,
        "score": score,
        "description": segment.element.description,
        "ancestors": [el.label for el in segment.ancestors],
    }


# --- app factory ---


def create_app(manager: SessionManager) -> FastAPI:
    app = FastAPI(title="tracetune", version="0.1.0")
    state = ApiState(manager)
    app.state.engine = state

    @app.exception_handler(TraceTuneError)
    async def handle_engine_error(request: Request, exc: TraceTuneError):
        return _error_response(exc)

    def load_session(session_id: str) -> Session:
        return manager.store.load_session(session_id)

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionCreateBody):
        session = manager.create_session(body.initial_input)
        return {
            "session": _session_summary(session),
            "nodes": [_node_payload(session.nodes[n]) for n in session.node_order],
        }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_summary(load_session(session_id))

    @app.get("/sessions/{session_id}/tree")
    def get_tree(session_id: str):
        session = load_session(session_id)
        return {
            "session_id": session.session_id,
            "active_node_id": session.active_node_id,
            "nodes": [_node_payload(session.nodes[n]) for n in session.node_order],
        }

    @app.post("/sessions/{session_id}/select")
    def select_node(session_id: str, body: SelectBody):
        session = load_session(session_id)
        manager.select_node(session, body.node_id)
        return _session_summary(session)

    @app.post("/sessions/{session_id}/nodes/{node_id}/resolve")
    def resolve(session_id: str, node_id: str, body: ResolveBody):
        session = load_session(session_id)
        node = session.node(node_id)
        image = manager.store.get_image(node.image_digest)
        state.correspondence.precompute_image_embedding_context(node.image_digest, image)
        result = state.correspondence.resolve_selection(
            image,
            body.selection.to_region(),
            node.prompt.labels(),
            image_id=node.image_digest,
        )
        return {
            "labels": [
                _label_payload(node.prompt, ls.label, ls.score) for ls in result.scores
            ],
            "mask_rle": mask_to_rle(result.segmentation.mask),
            "bbox": list(result.segmentation.bbox.as_tuple()),
        }

    @app.post("/sessions/{session_id}/nodes/{node_id}/refine", status_code=202)
    def refine(session_id: str, node_id: str, body: RefineBody):
        session = load_session(session_id)
        session.node(node_id)  # 404 before locking
        selection = None
        if body.selection is not None:
            if body.selection.label is None:
                raise InvalidRequest("refinement selection needs a label")
            selection = SelectionRef(
                region=body.selection.to_region(), label=body.selection.label
            )
        reference = None
        if body.reference_digest is not None:
            reference = manager.store.get_image(body.reference_digest)

        # validate the mode rules up front so callers get 400, not a failed batch
        mode = body.mode
        if mode not in ("global", "seed", "inpaint", "mixed"):
            raise InvalidRequest(f"unknown refinement mode {mode!r}")
        if mode == "global" and selection is not None:
            raise InvalidRequest("global mode does not take a selection")
        if mode != "global" and selection is None:
            raise InvalidRequest(f"{mode} mode requires a selection")
        if not (body.instruction and body.instruction.strip()) and reference is None:
            raise InvalidRequest("need an instruction or a reference image")

        lock = state.session_lock(session_id)
        if not lock.acquire(blocking=False):
            raise ConflictError(f"a refinement is already running for session {session_id}")

        job = state.new_batch(session_id, node_id)

        def run():
            try:
                job.status = "running"
                work_session = manager.store.load_session(session_id)
                batch, new_ids = manager.refine(
                    work_session,
                    node_id,
                    mode=mode,
                    instruction=body.instruction,
                    reference_image=reference,
                    selection=selection,
                    randomize_seed=body.randomize_seed,
                )
                job.nodes = [_node_payload(work_session.node(i)) for i in new_ids]
                job.errors = [r.error for r in batch.results if not r.ok]
                job.inpaint_overwrite_warning = batch.inpaint_overwrite_warning
                if not job.nodes:
                    job.status = "failed"
                elif job.errors:
                    job.status = "partial"
                else:
                    job.status = "done"
            except TraceTuneError as exc:
                job.errors = [str(exc)]
                job.status = "failed"
            except Exception:
                job.errors = ["internal error"]
                job.status = "failed"
            finally:
                lock.release()

        threading.Thread(target=run, daemon=True).start()
        return {"batch_id": job.batch_id, "status_url": f"/batches/{job.batch_id}"}

    @app.get("/batches/{batch_id}")
    def get_batch(batch_id: str):
        job = state.batches.get(batch_id)
        if job is None:
            raise UnknownNode(batch_id)
        return job.payload()

    @app.post("/suggestions")
    def suggestions(body: SuggestionBody):
        session = load_session(body.session_id)
        node = session.node(body.node_id)
        if body.kind == "global":
            result = state.suggestions.suggest_global(node.prompt)
        elif body.kind == "label_based":
            if body.label is None:
                raise InvalidRequest("label_based suggestions need a label")
            result = state.suggestions.suggest_for_label(node.prompt, body.label)
        elif body.kind == "expanded":
            if not body.input:
                raise InvalidRequest("expanded suggestions need a user input")
            result = state.suggestions.suggest_expanded(node.prompt, body.input, body.label)
        else:
            raise InvalidRequest(f"unknown suggestion kind {body.kind!r}")
        return {
            "kind": result.kind,
            "items": [
                {"text": item.text} | ({"tag": item.tag} if item.tag else {})
                for item in result.items
            ],
            "provenance": {
                "prompt_digest": result.provenance.prompt_digest,
                "label": result.provenance.label,
                "user_input": result.provenance.user_input,
            },
        }

    @app.post("/references")
    async def upload_reference(file: UploadFile):
        data = await file.read()
        image = ImageData.from_png_bytes(data)
        digest = manager.store.put_image(image)
        caption = manager.refiner.caption_reference(image)
        return {"digest": digest, "caption": caption.caption}

    @app.get("/images/{digest}")
    def get_image(digest: str):
        data = manager.store.get_image_bytes(digest)
        return Response(
            content=data,
            media_type="image/png",
            headers={"Cache-Control": "public, max-age=31536000, immutable"},
        )

    return app


def create_app_from_config(
    config: ProviderConfig, store_dir: str | None = None
) -> FastAPI:
    providers = build_providers(config)
    templates = (
        load_template_set(config.resolve_path(config.templates_path))
        if config.templates_path
        else default_template_set()
    )
    root = store_dir or config.store_dir
    if root is None:
        raise InvalidRequest("config needs a store_dir to serve")
    store = SessionStore(config.resolve_path(root) if store_dir is None else root)
    manager = SessionManager(store, providers, templates)
    return create_app(manager)


def main(argv: list[str] | None = None) -> int:
    import argparse

    import uvicorn

    from .providers import load_provider_config

    parser = argparse.ArgumentParser(
        prog="tracetune-serve", description="Serve the refinement API."
    )
    parser.add_argument("--config", required=True, help="provider config file")
    parser.add_argument("--store-dir", help="override the config's store directory")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8351)
    args = parser.parse_args(argv)
    app = create_app_from_config(load_provider_config(args.config), store_dir=args.store_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
