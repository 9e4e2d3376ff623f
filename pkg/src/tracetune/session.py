"""Persistent session state: the image iteration tree.

Every generated image is a node linking to its parent, the prompt and seed
that produced it, its method, and the refinement record that requested it.
Nodes are immutable once created; revert is re-selection of an ancestor,
never deletion, so the audit trail survives.

Storage is one embedded SQLite store per deployment plus a content-addressed
image directory; sessions export to a self-contained archive (directory or
zip) that re-imports to an equal session.
"""

from __future__ import annotations

import json
import random
import sqlite3
import time
import uuid
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .errors import (
    InvalidRequest,
    StorageFailure,
    TraceTuneError,
    UnknownNode,
)
from .imaging import ImageData
from .prompt import StructuredPrompt, parse_structured_prompt, serialize_structured_prompt
from .providers.base import ProviderSet
from .providers.templates import TemplateSet
from .refinement import (
    GenerationBatch,
    RefinementEngine,
    RefinementRequest,
    SelectionRef,
    prompt_from_llm,
)

SESSION_SCHEMA = "tracetune/session/v1"
INITIAL_BATCH_SIZE = 4

NODE_METHODS = ("initial", "global", "seed", "inpaint")


@dataclass(frozen=True)
class RefinementRecord:
    mode: str
    instruction: str | None = None
    label: str | None = None
    reference_digest: str | None = None
    randomize_seed: bool = False

    def to_doc(self) -> dict:
        return {
            "mode": self.mode,
            "instruction": self.instruction,
            "label": self.label,
            "reference_digest": self.reference_digest,
            "randomize_seed": self.randomize_seed,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "RefinementRecord":
        return cls(
            mode=doc["mode"],
            instruction=doc.get("instruction"),
            label=doc.get("label"),
            reference_digest=doc.get("reference_digest"),
            randomize_seed=doc.get("randomize_seed", False),
        )


@dataclass(frozen=True)
class SessionNode:
    node_id: str
    parent_id: str | None
    image_digest: str
    prompt: StructuredPrompt
    seed: int
    method: str
    refinement_record: RefinementRecord | None
    created_at: float


@dataclass
class Session:
    session_id: str
    initial_input: str
    nodes: dict[str, SessionNode] = field(default_factory=dict)
    node_order: list[str] = field(default_factory=list)
    active_node_id: str | None = None
    generation_errors: list[dict] = field(default_factory=list)
    created_at: float = 0.0

    def node(self, node_id: str) -> SessionNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def roots(self) -> list[SessionNode]:
        return [self.nodes[n] for n in self.node_order if self.nodes[n].parent_id is None]

    def children(self, node_id: str) -> list[SessionNode]:
        return [self.nodes[n] for n in self.node_order if self.nodes[n].parent_id == node_id]

    def ancestors(self, node_id: str) -> list[SessionNode]:
        chain = []
        cursor = self.node(node_id)
        while cursor.parent_id is not None:
            cursor = self.node(cursor.parent_id)
            chain.append(cursor)
        chain.reverse()
        return chain

    def next_node_id(self) -> str:
        return f"n{len(self.node_order) + 1:03d}"

    def validate_forest(self) -> None:
        """The structural invariant: a forest whose roots are exactly the
        initial-generation nodes, parents always created before children."""
        seen: set[str] = set()
        for node_id in self.node_order:
            node = self.nodes[node_id]
            if node.parent_id is None:
                if node.method != "initial":
                    raise StorageFailure(f"root node {node_id} has method {node.method!r}")
            else:
                if node.method == "initial":
                    raise StorageFailure(f"initial node {node_id} has a parent")
                if node.parent_id not in seen:
                    raise StorageFailure(
                        f"node {node_id} references parent {node.parent_id!r} "
                        "that does not precede it"
                    )
            seen.add(node_id)
        if set(self.nodes) != seen or len(self.node_order) != len(self.nodes):
            raise StorageFailure("node order and node map disagree")
        if self.active_node_id is not None and self.active_node_id not in self.nodes:
            raise StorageFailure(f"active node {self.active_node_id!r} missing")


class SessionStore:
    """SQLite session records plus PNG images keyed by content digest."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.images_dir = self.root / "images"
        self.images_dir.mkdir(exist_ok=True)
        self._db_path = self.root / "sessions.db"
        with self._connect() as conn:
            conn.execute(
                "CREATE TABLE IF NOT EXISTS sessions ("
                " session_id TEXT PRIMARY KEY, initial_input TEXT NOT NULL,"
                " active_node_id TEXT, created_at REAL NOT NULL,"
                " errors_json TEXT NOT NULL)"
            )
            conn.execute(
                "CREATE TABLE IF NOT EXISTS nodes ("
                " session_id TEXT NOT NULL, node_id TEXT NOT NULL,"
                " position INTEGER NOT NULL, parent_id TEXT,"
                " image_digest TEXT NOT NULL, prompt_json TEXT NOT NULL,"
                " seed INTEGER NOT NULL, method TEXT NOT NULL,"
                " record_json TEXT, created_at REAL NOT NULL,"
                " PRIMARY KEY (session_id, node_id))"
            )

    def _connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self._db_path)

    # --- images ---

    def _image_path(self, digest: str) -> Path:
        return self.images_dir / f"{digest}.png"

    def put_image(self, image: ImageData) -> str:
        digest = image.digest()
        path = self._image_path(digest)
        if not path.exists():
            path.write_bytes(image.to_png_bytes())
        return digest

    def has_image(self, digest: str) -> bool:
        return self._image_path(digest).exists()

    def get_image(self, digest: str) -> ImageData:
        path = self._image_path(digest)
        if not path.exists():
            raise StorageFailure(f"image {digest} not in store")
        return ImageData.from_png_bytes(path.read_bytes())

    def get_image_bytes(self, digest: str) -> bytes:
        path = self._image_path(digest)
        if not path.exists():
            raise StorageFailure(f"image {digest} not in store")
        return path.read_bytes()

    # --- sessions ---

    def save_session(self, session: Session) -> None:
        session.validate_forest()
        with self._connect() as conn:
            conn.execute("DELETE FROM sessions WHERE session_id = ?", (session.session_id,))
            conn.execute("DELETE FROM nodes WHERE session_id = ?", (session.session_id,))
            conn.execute(
                "INSERT INTO sessions VALUES (?, ?, ?, ?, ?)",
                (
                    session.session_id,
                    session.initial_input,
                    session.active_node_id,
                    session.created_at,
                    json.dumps(session.generation_errors),
                ),
            )
            for position, node_id in enumerate(session.node_order):
                node = session.nodes[node_id]
                conn.execute(
                    "INSERT INTO nodes VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                    (
                        session.session_id,
                        node.node_id,
                        position,
                        node.parent_id,
                        node.image_digest,
                        serialize_structured_prompt(node.prompt),
                        node.seed,
                        node.method,
                        json.dumps(node.refinement_record.to_doc())
                        if node.refinement_record
                        else None,
                        node.created_at,
                    ),
                )

    def load_session(self, session_id: str) -> Session:
        with self._connect() as conn:
            row = conn.execute(
                "SELECT initial_input, active_node_id, created_at, errors_json"
                " FROM sessions WHERE session_id = ?",
                (session_id,),
            ).fetchone()
            if row is None:
                raise StorageFailure(f"no session {session_id!r}")
            session = Session(
                session_id=session_id,
                initial_input=row[0],
                active_node_id=row[1],
                created_at=row[2],
                generation_errors=json.loads(row[3]),
            )
            for node_row in conn.execute(
                "SELECT node_id, parent_id, image_digest, prompt_json, seed,"
                " method, record_json, created_at FROM nodes"
                " WHERE session_id = ? ORDER BY position",
                (session_id,),
            ):
                node = SessionNode(
                    node_id=node_row[0],
                    parent_id=node_row[1],
                    image_digest=node_row[2],
                    prompt=parse_structured_prompt(node_row[3]),
                    seed=node_row[4],
                    method=node_row[5],
                    refinement_record=RefinementRecord.from_doc(json.loads(node_row[6]))
                    if node_row[6]
                    else None,
                    created_at=node_row[7],
                )
                session.nodes[node.node_id] = node
                session.node_order.append(node.node_id)
        return session

    def has_session(self, session_id: str) -> bool:
        with self._connect() as conn:
            row = conn.execute(
                "SELECT 1 FROM sessions WHERE session_id = ?", (session_id,)
            ).fetchone()
        return row is not None

    def list_sessions(self) -> list[str]:
        with self._connect() as conn:
            return [
                r[0]
                for r in conn.execute(
                    "SELECT session_id FROM sessions ORDER BY created_at, session_id"
                )
            ]


class SessionManager:
    """Session lifecycle over one store and one provider set."""

    def __init__(
        self,
        store: SessionStore,
        providers: ProviderSet,
        templates: TemplateSet,
        rng: random.Random | None = None,
        clock: Callable[[], float] = time.time,
        id_factory: Callable[[], str] | None = None,
    ):
        self.store = store
        self.providers = providers
        self.templates = templates
        self.rng = rng or random.Random()
        self.clock = clock
        self._id_factory = id_factory
        self.refiner = RefinementEngine(providers, templates, rng=self.rng)

    def _new_session_id(self) -> str:
        if self._id_factory is not None:
            return self._id_factory()
        return uuid.uuid4().hex[:12]

    def create_session(self, initial_input: str) -> Session:
        """Expand the input into a structured prompt via the brainstorming
        role, generate four initial images with fresh recorded seeds, and
        persist the resulting roots. Per-image failures become error records
        instead of aborting the session."""
        if not initial_input or not initial_input.strip():
            raise InvalidRequest("initial input must not be empty")
        prompt = prompt_from_llm(
            self.providers.text, self.templates, "brainstorm",
            user_input=initial_input.strip(),
        )
        session = Session(
            session_id=self._new_session_id(),
            initial_input=initial_input.strip(),
            created_at=self.clock(),
        )
        seeds: list[int] = []
        while len(seeds) < INITIAL_BATCH_SIZE:
            seed = self.rng.randrange(2**32)
            if seed not in seeds:
                seeds.append(seed)
        prompt_text = serialize_structured_prompt(prompt)
        for seed in seeds:
            try:
                image = self.providers.image.generate(prompt_text, seed)
            except TraceTuneError as exc:
                session.generation_errors.append({"seed": seed, "error": str(exc)})
                continue
            digest = self.store.put_image(image)
            self._append_node(
                session,
                parent_id=None,
                image_digest=digest,
                prompt=prompt,
                seed=seed,
                method="initial",
                record=None,
            )
        if session.active_node_id is None and session.node_order:
            session.active_node_id = session.node_order[0]
        self.store.save_session(session)
        return session

    def attach_batch(
        self,
        session: Session,
        parent_id: str,
        batch: GenerationBatch,
        record: RefinementRecord | None = None,
    ) -> list[str]:
        """Add the batch's successful results as children of `parent_id`,
        in result order. Returns the new node ids."""
        session.node(parent_id)  # raises UnknownNode
        new_ids: list[str] = []
        for result in batch.results:
            if not result.ok:
                session.generation_errors.append(
                    {
                        "parent": parent_id,
                        "seed": result.seed,
                        "method": result.method,
                        "error": result.error,
                    }
                )
                continue
            digest = self.store.put_image(result.image)
            node = self._append_node(
                session,
                parent_id=parent_id,
                image_digest=digest,
                prompt=result.prompt_after,
                seed=result.seed,
                method=result.method,
                record=record,
            )
            new_ids.append(node.node_id)
        self.store.save_session(session)
        return new_ids

    def select_node(self, session: Session, node_id: str) -> Session:
        session.node(node_id)
        session.active_node_id = node_id
        self.store.save_session(session)
        return session

    def refine(
        self,
        session: Session,
        node_id: str,
        *,
        mode: str,
        instruction: str | None = None,
        reference_image: ImageData | None = None,
        selection: SelectionRef | None = None,
        randomize_seed: bool = False,
    ) -> tuple[GenerationBatch, list[str]]:
        """Refine from one node: builds the request from the node's recorded
        prompt, seed, and method, runs the pipeline, and attaches results as
        its children."""
        node = session.node(node_id)
        request = RefinementRequest(
            mode=mode,
            base_image_id=node.image_digest,
            base_prompt=node.prompt,
            base_seed=node.seed,
            instruction=instruction,
            reference_image=reference_image,
            selection=selection,
            base_method=node.method,
            randomize_seed=randomize_seed,
        )
        base_image = self.store.get_image(node.image_digest)
        batch = self.refiner.execute_refinement(request, base_image)
        record = RefinementRecord(
            mode=mode,
            instruction=instruction,
            label=selection.label if selection else None,
            reference_digest=reference_image.digest() if reference_image else None,
            randomize_seed=randomize_seed,
        )
        new_ids = self.attach_batch(session, node_id, batch, record)
        return batch, new_ids

    def _append_node(
        self,
        session: Session,
        *,
        parent_id: str | None,
        image_digest: str,
        prompt: StructuredPrompt,
        seed: int,
        method: str,
        record: RefinementRecord | None,
    ) -> SessionNode:
        node = SessionNode(
            node_id=session.next_node_id(),
            parent_id=parent_id,
            image_digest=image_digest,
            prompt=prompt,
            seed=seed,
            method=method,
            refinement_record=record,
            created_at=self.clock(),
        )
        session.nodes[node.node_id] = node
        session.node_order.append(node.node_id)
        return node


# --- export / import ---


def session_to_doc(session: Session) -> dict:
    return {
        "schema": SESSION_SCHEMA,
        "session_id": session.session_id,
        "initial_input": session.initial_input,
        "active_node_id": session.active_node_id,
        "created_at": session.created_at,
        "generation_errors": session.generation_errors,
        "nodes": [
            {
                "node_id": n.node_id,
                "parent_id": n.parent_id,
                "image": n.image_digest,
                "prompt": json.loads(serialize_structured_prompt(n.prompt)),
                "seed": n.seed,
                "method": n.method,
                "refinement_record": n.refinement_record.to_doc()
                if n.refinement_record
                else None,
                "created_at": n.created_at,
            }
            for n in (session.nodes[i] for i in session.node_order)
        ],
    }


def session_from_doc(doc: dict) -> Session:
    if doc.get("schema") != SESSION_SCHEMA:
        raise StorageFailure(f"not a {SESSION_SCHEMA} document")
    session = Session(
        session_id=doc["session_id"],
        initial_input=doc["initial_input"],
        active_node_id=doc.get("active_node_id"),
        created_at=doc.get("created_at", 0.0),
        generation_errors=list(doc.get("generation_errors", [])),
    )
    for raw in doc["nodes"]:
        node = SessionNode(
            node_id=raw["node_id"],
            parent_id=raw.get("parent_id"),
            image_digest=raw["image"],
            prompt=parse_structured_prompt(raw["prompt"]),
            seed=raw["seed"],
            method=raw["method"],
            refinement_record=RefinementRecord.from_doc(raw["refinement_record"])
            if raw.get("refinement_record")
            else None,
            created_at=raw.get("created_at", 0.0),
        )
        session.nodes[node.node_id] = node
        session.node_order.append(node.node_id)
    session.validate_forest()
    return session


def export_session(store: SessionStore, session: Session, dest: str | Path) -> Path:
    """Write a self-contained archive: session.json plus every referenced
    image, under a directory or a .zip, re-importable with ids preserved."""
    dest = Path(dest)
    doc = json.dumps(session_to_doc(session), indent=2) + "\n"
    digests = sorted({session.nodes[i].image_digest for i in session.node_order})
    if dest.suffix == ".zip":
        dest.parent.mkdir(parents=True, exist_ok=True)
        with zipfile.ZipFile(dest, "w") as zf:
            zf.writestr("session.json", doc)
            for digest in digests:
                zf.writestr(f"images/{digest}.png", store.get_image_bytes(digest))
    else:
        (dest / "images").mkdir(parents=True, exist_ok=True)
        (dest / "session.json").write_text(doc)
        for digest in digests:
            (dest / "images" / f"{digest}.png").write_bytes(store.get_image_bytes(digest))
    return dest


def import_session(store: SessionStore, archive: str | Path) -> Session:
    """Load an exported archive into the store. Every node's image must be
    present in the archive; a missing file fails naming its digest."""
    archive = Path(archive)
    if archive.is_file() and archive.suffix == ".zip":
        with zipfile.ZipFile(archive) as zf:
            names = set(zf.namelist())
            if "session.json" not in names:
                raise StorageFailure("archive has no session.json")
            session = session_from_doc(json.loads(zf.read("session.json")))
            images: dict[str, bytes] = {}
            for node_id in session.node_order:
                digest = session.nodes[node_id].image_digest
                member = f"images/{digest}.png"
                if member not in names:
                    raise StorageFailure(f"archive missing image {digest}")
                images[digest] = zf.read(member)
    elif (archive / "session.json").exists():
        session = session_from_doc(json.loads((archive / "session.json").read_text()))
        images = {}
        for node_id in session.node_order:
            digest = session.nodes[node_id].image_digest
            path = archive / "images" / f"{digest}.png"
            if not path.exists():
                raise StorageFailure(f"archive missing image {digest}")
            images[digest] = path.read_bytes()
    else:
        raise StorageFailure(f"no session archive at {archive}")

    if store.has_session(session.session_id):
        raise StorageFailure(f"session {session.session_id!r} already in store")
    for digest, data in images.items():
        image = ImageData.from_png_bytes(data)
        actual = store.put_image(image)
        if actual != digest:
            raise StorageFailure(f"archive image {digest} content hashes to {actual}")
    store.save_session(session)
    return session
