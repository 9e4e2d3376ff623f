"""Headless script driver.

Runs a scripted session against configured providers (normally mocks),
asserting label ranks, prompt-diff locality, and batch shapes along the way.
Scripts are the repository's integration-test format: each golden script
encodes one narrative refinement workflow end to end.

Exit codes: 0 success, 1 failed assertion or runtime failure, 2 bad
configuration or script. The report file is deterministic across runs with
mock providers; wall-clock step timings go to stdout only.
"""

from __future__ import annotations

import argparse
import json
import random
import re
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .correspondence import CorrespondenceEngine, LabelScore
from .errors import (
    AssertionFailed,
    MalformedConfig,
    MissingCredential,
    ScriptParseError,
    TraceTuneError,
)
from .geometry import RegionSelection
from .prompt import diff_prompts, normalize_label
from .providers import build_providers, default_template_set, load_provider_config, load_template_set
from .refinement import SelectionRef
from .session import Session, SessionManager, SessionStore, export_session

SCRIPT_SCHEMA = "tracetune/script/v1"
REPORT_SCHEMA = "tracetune/report/v1"

_OPS = ("generate", "resolve", "refine", "select", "expect")

_REF_PATTERN = re.compile(r"^([A-Za-z_]\w*)\[(\d+)\]$")


@dataclass
class NodesBinding:
    node_ids: list[str]
    parent_id: str | None = None
    methods: list[str] = field(default_factory=list)
    selection: SelectionRef | None = None
    overwrite_warning: bool = False


@dataclass
class ResolveBinding:
    node_id: str
    scores: list[LabelScore]


def load_script(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise ScriptParseError(f"script file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScriptParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != SCRIPT_SCHEMA:
        raise ScriptParseError(f"not a {SCRIPT_SCHEMA} document")
    steps = doc.get("steps")
    if not isinstance(steps, list) or not steps:
        raise ScriptParseError("script has no steps")
    for index, step in enumerate(steps):
        _validate_step(step, index)
    return steps


def _validate_step(step: dict, index: int) -> None:
    if not isinstance(step, dict) or "op" not in step:
        raise ScriptParseError("step is not an object with an op", step=index)
    op = step["op"]
    if op not in _OPS:
        raise ScriptParseError(f"unknown op {op!r}", step=index)
    required = {
        "generate": ("input", "as"),
        "resolve": ("node", "selection", "as"),
        "refine": ("node", "mode", "as"),
        "select": ("node",),
        "expect": ("assert",),
    }[op]
    missing = [key for key in required if key not in step]
    if missing:
        raise ScriptParseError(f"{op} step missing {missing}", step=index)


def _selection_from(doc: dict, index: int) -> RegionSelection:
    try:
        if doc["kind"] == "point":
            return RegionSelection.at_point(*doc["point"])
        if doc["kind"] == "box":
            return RegionSelection.in_box(*doc["box"])
    except (KeyError, TypeError) as exc:
        raise ScriptParseError(f"bad selection: {exc}", step=index) from exc
    raise ScriptParseError(f"unknown selection kind {doc.get('kind')!r}", step=index)


class ScriptRunner:
    def __init__(self, manager: SessionManager):
        self.manager = manager
        self.correspondence = CorrespondenceEngine(
            manager.providers.segmentation, manager.providers.embedding
        )
        self.session: Session | None = None
        self.bindings: dict[str, NodesBinding | ResolveBinding] = {}
        self.counts = {"generates": 0, "resolves": 0, "refines": 0, "expects": 0}

    def node_ref(self, ref: str, index: int) -> str:
        match = _REF_PATTERN.match(ref)
        if match:
            binding = self.bindings.get(match.group(1))
            if not isinstance(binding, NodesBinding):
                raise ScriptParseError(f"{match.group(1)!r} is not a node list", step=index)
            position = int(match.group(2))
            if position >= len(binding.node_ids):
                raise AssertionFailed(
                    index, f"{ref} out of range ({len(binding.node_ids)} nodes)"
                )
            return binding.node_ids[position]
        if self.session is not None and ref in self.session.nodes:
            return ref
        raise ScriptParseError(f"unresolvable node reference {ref!r}", step=index)

    def run_step(self, step: dict, index: int) -> dict:
        op = step["op"]
        if op == "generate":
            return self._run_generate(step)
        if op == "resolve":
            return self._run_resolve(step, index)
        if op == "refine":
            return self._run_refine(step, index)
        if op == "select":
            return self._run_select(step, index)
        return self._run_expect(step, index)

    def _need_session(self, index: int) -> Session:
        if self.session is None:
            raise ScriptParseError("no generate step has run yet", step=index)
        return self.session

    def _run_generate(self, step: dict) -> dict:
        self.session = self.manager.create_session(step["input"])
        ids = list(self.session.node_order)
        self.bindings[step["as"]] = NodesBinding(node_ids=ids, methods=["initial"] * len(ids))
        self.counts["generates"] += 1
        return {"session_id": self.session.session_id, "nodes": ids}

    def _run_resolve(self, step: dict, index: int) -> dict:
        session = self._need_session(index)
        node = session.node(self.node_ref(step["node"], index))
        image = self.manager.store.get_image(node.image_digest)
        self.correspondence.precompute_image_embedding_context(node.image_digest, image)
        result = self.correspondence.resolve_selection(
            image,
            _selection_from(step["selection"], index),
            node.prompt.labels(),
            image_id=node.image_digest,
        )
        self.bindings[step["as"]] = ResolveBinding(node_id=node.node_id, scores=result.scores)
        self.counts["resolves"] += 1
        return {
            "node": node.node_id,
            "labels": [{"label": s.label, "score": round(s.score, 6)} for s in result.scores],
        }

    def _run_refine(self, step: dict, index: int) -> dict:
        session = self._need_session(index)
        node_id = self.node_ref(step["node"], index)
        selection = None
        if "selection" in step or "label" in step:
            if "selection" not in step or "label" not in step:
                raise ScriptParseError("refine selection needs selection and label", step=index)
            selection = SelectionRef(
                region=_selection_from(step["selection"], index), label=step["label"]
            )
        batch, new_ids = self.manager.refine(
            session,
            node_id,
            mode=step["mode"],
            instruction=step.get("instruction"),
            selection=selection,
            randomize_seed=step.get("randomize_seed", False),
        )
        self.bindings[step["as"]] = NodesBinding(
            node_ids=new_ids,
            parent_id=node_id,
            methods=[r.method for r in batch.results if r.ok],
            selection=selection,
            overwrite_warning=batch.inpaint_overwrite_warning,
        )
        self.counts["refines"] += 1
        return {
            "parent": node_id,
            "nodes": new_ids,
            "methods": [r.method for r in batch.results],
            "inpaint_overwrite_warning": batch.inpaint_overwrite_warning,
        }

    def _run_select(self, step: dict, index: int) -> dict:
        session = self._need_session(index)
        node_id = self.node_ref(step["node"], index)
        self.manager.select_node(session, node_id)
        return {"active_node_id": node_id}

    # --- assertions ---

    def _run_expect(self, step: dict, index: int) -> dict:
        assertion = step["assert"]
        kind = assertion.get("kind")
        handler = {
            "label_rank": self._assert_label_rank,
            "resolve_count": self._assert_resolve_count,
            "diff_locality": self._assert_diff_locality,
            "batch_methods": self._assert_batch_methods,
            "batch_size": self._assert_batch_size,
            "node_count": self._assert_node_count,
            "active_node": self._assert_active_node,
            "inpaint_locality": self._assert_inpaint_locality,
            "image_equal": self._assert_image_equal,
            "overwrite_warning": self._assert_overwrite_warning,
        }.get(kind)
        if handler is None:
            raise ScriptParseError(f"unknown assertion kind {kind!r}", step=index)
        handler(assertion, index)
        self.counts["expects"] += 1
        return {"assert": kind}

    def _resolve_binding(self, name: str, index: int) -> ResolveBinding:
        binding = self.bindings.get(name)
        if not isinstance(binding, ResolveBinding):
            raise ScriptParseError(f"{name!r} is not a resolve result", step=index)
        return binding

    def _nodes_binding(self, name: str, index: int) -> NodesBinding:
        binding = self.bindings.get(name)
        if not isinstance(binding, NodesBinding):
            raise ScriptParseError(f"{name!r} is not a node list", step=index)
        return binding

    def _assert_label_rank(self, a: dict, index: int) -> None:
        binding = self._resolve_binding(a["resolve"], index)
        rank = int(a.get("rank", 1))
        if rank > len(binding.scores):
            raise AssertionFailed(index, f"only {len(binding.scores)} labels resolved")
        actual = binding.scores[rank - 1].label
        if normalize_label(actual) != normalize_label(a["label"]):
            raise AssertionFailed(
                index, f"rank {rank} label is {actual!r}, expected {a['label']!r}"
            )

    def _assert_resolve_count(self, a: dict, index: int) -> None:
        binding = self._resolve_binding(a["resolve"], index)
        if len(binding.scores) != int(a["count"]):
            raise AssertionFailed(
                index, f"resolved {len(binding.scores)} labels, expected {a['count']}"
            )

    def _assert_diff_locality(self, a: dict, index: int) -> None:
        session = self._need_session(index)
        before = session.node(self.node_ref(a["before"], index)).prompt
        after = session.node(self.node_ref(a["after"], index)).prompt
        diff = diff_prompts(before, after)
        for key, actual in (
            ("changed", diff.changed_labels),
            ("added", diff.added_labels),
            ("removed", diff.removed_labels),
        ):
            expected = {normalize_label(x) for x in a.get(key, [])}
            got = {normalize_label(x) for x in actual}
            if got != expected:
                raise AssertionFailed(
                    index, f"{key} labels {sorted(got)}, expected {sorted(expected)}"
                )
        if "categories" in a:
            expected_categories = set(a["categories"])
            if diff.changed_categories != expected_categories:
                raise AssertionFailed(
                    index,
                    f"changed categories {sorted(diff.changed_categories)}, "
                    f"expected {sorted(expected_categories)}",
                )

    def _assert_batch_methods(self, a: dict, index: int) -> None:
        binding = self._nodes_binding(a["batch"], index)
        if sorted(binding.methods) != sorted(a["methods"]):
            raise AssertionFailed(
                index, f"batch methods {sorted(binding.methods)}, expected {sorted(a['methods'])}"
            )

    def _assert_batch_size(self, a: dict, index: int) -> None:
        binding = self._nodes_binding(a["batch"], index)
        if len(binding.node_ids) != int(a["size"]):
            raise AssertionFailed(
                index, f"batch has {len(binding.node_ids)} nodes, expected {a['size']}"
            )

    def _assert_node_count(self, a: dict, index: int) -> None:
        session = self._need_session(index)
        if len(session.nodes) != int(a["value"]):
            raise AssertionFailed(
                index, f"session has {len(session.nodes)} nodes, expected {a['value']}"
            )

    def _assert_active_node(self, a: dict, index: int) -> None:
        session = self._need_session(index)
        expected = self.node_ref(a["node"], index)
        if session.active_node_id != expected:
            raise AssertionFailed(
                index, f"active node {session.active_node_id!r}, expected {expected!r}"
            )

    def _assert_inpaint_locality(self, a: dict, index: int) -> None:
        session = self._need_session(index)
        binding = self._nodes_binding(a["batch"], index)
        if binding.parent_id is None or binding.selection is None:
            raise ScriptParseError("inpaint_locality needs a refine batch", step=index)
        parent = session.node(binding.parent_id)
        base = self.manager.store.get_image(parent.image_digest)
        seg = self.correspondence.segment_region(base, binding.selection.region)
        outside = ~seg.mask
        for node_id, method in zip(binding.node_ids, binding.methods):
            if method != "inpaint":
                continue
            child = self.manager.store.get_image(session.node(node_id).image_digest)
            if not np.array_equal(child.pixels[outside], base.pixels[outside]):
                raise AssertionFailed(
                    index, f"node {node_id} differs from base outside the mask"
                )

    def _assert_overwrite_warning(self, a: dict, index: int) -> None:
        binding = self._nodes_binding(a["batch"], index)
        expected = bool(a.get("value", True))
        if binding.overwrite_warning != expected:
            raise AssertionFailed(
                index,
                f"overwrite warning is {binding.overwrite_warning}, expected {expected}",
            )

    def _assert_image_equal(self, a: dict, index: int) -> None:
        session = self._need_session(index)
        left = session.node(self.node_ref(a["a"], index))
        right = session.node(self.node_ref(a["b"], index))
        if left.image_digest != right.image_digest:
            raise AssertionFailed(
                index,
                f"images differ: {left.image_digest[:12]} vs {right.image_digest[:12]}",
            )


def run_script(
    script_path: str | Path,
    config_path: str | Path,
    *,
    mock_only: bool = False,
    export_dir: str | Path | None = None,
    report_path: str | Path | None = None,
    store_dir: str | Path | None = None,
    out=sys.stdout,
) -> int:
    """Execute one script; returns the process exit code."""
    try:
        steps = load_script(script_path)
        config = load_provider_config(config_path)
        if mock_only and not config.mock_only():
            raise MalformedConfig("--mock-only given but config names live providers")
        providers = build_providers(config)
        templates = (
            load_template_set(config.resolve_path(config.templates_path))
            if config.templates_path
            else default_template_set()
        )
    except (ScriptParseError, MalformedConfig, MissingCredential) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    if store_dir is None:
        store_root = Path(tempfile.mkdtemp(prefix="tracetune-run-"))
    else:
        store_root = Path(store_dir)
    counter = {"n": 0}

    def next_id() -> str:
        counter["n"] += 1
        return f"s{counter['n']:04d}"

    manager = SessionManager(
        SessionStore(store_root),
        providers,
        templates,
        rng=random.Random(0),
        clock=lambda: 0.0,
        id_factory=next_id,
    )
    runner = ScriptRunner(manager)

    report_steps: list[dict] = []
    status = "ok"
    failure: str | None = None
    exit_code = 0
    for index, step in enumerate(steps):
        started = time.perf_counter()
        try:
            detail = runner.run_step(step, index)
            elapsed_ms = (time.perf_counter() - started) * 1000
            report_steps.append({"index": index, "op": step["op"], "status": "ok", "detail": detail})
            print(f"  step {index:>2} {step['op']:<9} ok      {elapsed_ms:8.1f} ms", file=out)
        except AssertionFailed as exc:
            status, failure, exit_code = "assertion_failed", str(exc), 1
            report_steps.append(
                {"index": index, "op": step["op"], "status": "failed", "detail": {"error": str(exc)}}
            )
            print(f"  step {index:>2} {step['op']:<9} FAILED  {exc}", file=out)
            break
        except ScriptParseError as exc:
            print(f"configuration error: {exc}", file=sys.stderr)
            return 2
        except TraceTuneError as exc:
            status, failure, exit_code = "error", str(exc), 1
            report_steps.append(
                {"index": index, "op": step["op"], "status": "failed", "detail": {"error": str(exc)}}
            )
            print(f"  step {index:>2} {step['op']:<9} ERROR   {exc}", file=out)
            break

    report = {
        "schema": REPORT_SCHEMA,
        "script": Path(script_path).name,
        "status": status,
        "failure": failure,
        "steps": report_steps,
        "summary": {
            "steps_run": len(report_steps),
            "iterations": runner.counts["refines"],
            **runner.counts,
            "session_id": runner.session.session_id if runner.session else None,
            "node_count": len(runner.session.nodes) if runner.session else 0,
        },
    }
    if report_path is not None:
        Path(report_path).parent.mkdir(parents=True, exist_ok=True)
        Path(report_path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if export_dir is not None and runner.session is not None:
        export_session(manager.store, runner.session, Path(export_dir))

    print(f"{Path(script_path).name}: {status} ({len(report_steps)} steps)", file=out)
    return exit_code


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="tracetune", description="Run a scripted refinement session."
    )
    parser.add_argument("--config", required=True, help="provider config file")
    parser.add_argument("--script", required=True, help="session script to execute")
    parser.add_argument(
        "--mock-only", action="store_true", help="refuse configs that name live providers"
    )
    parser.add_argument("--export", metavar="DIR", help="export the final session archive")
    parser.add_argument("--report", metavar="PATH", help="write the JSON run report")
    args = parser.parse_args(argv)
    return run_script(
        args.script,
        args.config,
        mock_only=args.mock_only,
        export_dir=args.export,
        report_path=args.report,
    )


if __name__ == "__main__":
    sys.exit(main())
