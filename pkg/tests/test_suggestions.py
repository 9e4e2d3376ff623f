from __future__ import annotations

import pytest

from tracetune.errors import InvalidRequest, SchemaViolation, UnknownLabel
from tracetune.providers.mocks import ScriptedTextProvider
from tracetune.providers.templates import default_template_set
from tracetune.suggestions import SuggestionEngine

TEMPLATES = default_template_set()

FIVE = ["brighter dawn light", "add market stalls", "denser fog", "warmer palette", "low camera"]
TAGGED = [
    {"tag": "refine", "text": "make its fire bigger"},
    {"tag": "refine", "text": "add a glow to the sword"},
    {"tag": "refine", "text": "sharpen the scales"},
    {"tag": "replace", "text": "swap for a wyvern"},
    {"tag": "replace", "text": "swap for a stone statue"},
    {"tag": "replace", "text": "swap for a banner"},
]


def engine_with(table) -> SuggestionEngine:
    return SuggestionEngine(text=ScriptedTextProvider(table), templates=TEMPLATES)


class TestGlobal:
    def test_exactly_five(self, street_prompt):
        engine = engine_with([{"match": "Propose exactly 5 ways", "output": FIVE}])
        result = engine.suggest_global(street_prompt)
        assert result.kind == "global"
        assert len(result.items) == 5
        assert [i.text for i in result.items] == FIVE
        assert result.provenance.prompt_digest == street_prompt.digest()
        assert result.provenance.label is None and result.provenance.user_input is None

    def test_four_items_retried_then_schema_violation(self, street_prompt):
        provider = ScriptedTextProvider(
            [{"match": "Propose exactly 5 ways", "outputs": [FIVE[:4], FIVE[:4]]}]
        )
        engine = SuggestionEngine(text=provider, templates=TEMPLATES)
        with pytest.raises(SchemaViolation):
            engine.suggest_global(street_prompt)
        assert provider.call_count == 2

    def test_duplicates_deduplicated_and_refilled_by_retry(self, street_prompt):
        with_dup = [FIVE[0], FIVE[0], FIVE[1], FIVE[2], FIVE[3]]
        engine = engine_with(
            [{"match": "Propose exactly 5 ways", "outputs": [with_dup, FIVE]}]
        )
        result = engine.suggest_global(street_prompt)
        texts = [i.text for i in result.items]
        assert len(texts) == 5 and len(set(texts)) == 5

    def test_surplus_truncated(self, street_prompt):
        engine = engine_with(
            [{"match": "Propose exactly 5 ways", "output": FIVE + ["extra", "more"]}]
        )
        assert [i.text for i in engine.suggest_global(street_prompt).items] == FIVE


class TestLabelBased:
    def test_three_refine_three_replace(self, street_prompt):
        engine = engine_with([{"match": 'labeled "Vintage Cars"', "output": TAGGED}])
        result = engine.suggest_for_label(street_prompt, "Vintage Cars")
        assert result.kind == "label_based"
        assert len(result.items) == 6
        assert [i.tag for i in result.items] == ["refine"] * 3 + ["replace"] * 3
        assert result.provenance.label == "Vintage Cars"

    def test_unknown_label(self, street_prompt):
        engine = engine_with([])
        with pytest.raises(UnknownLabel):
            engine.suggest_for_label(street_prompt, "Dragon")

    def test_mixed_tags_schema_violation_after_retry(self, street_prompt):
        lopsided = TAGGED[:2] + [{"tag": "replace", "text": f"r{i}"} for i in range(4)]
        provider = ScriptedTextProvider(
            [{"match": 'labeled "Gas Lamps"', "outputs": [lopsided, lopsided]}]
        )
        engine = SuggestionEngine(text=provider, templates=TEMPLATES)
        with pytest.raises(SchemaViolation):
            engine.suggest_for_label(street_prompt, "Gas Lamps")
        assert provider.call_count == 2

    def test_unknown_tag_rejected(self, street_prompt):
        bad = TAGGED[:5] + [{"tag": "delete", "text": "nope"}]
        engine = engine_with([{"match": 'labeled "Gas Lamps"', "outputs": [bad, TAGGED]}])
        result = engine.suggest_for_label(street_prompt, "Gas Lamps")
        assert len(result.items) == 6  # recovered on retry


class TestExpanded:
    def test_label_aware_completions(self, street_prompt):
        completions = [f"add {i} lamps beside the Gas Lamps row" for i in range(5)]
        engine = engine_with([{"match": '"add"', "output": completions}])
        result = engine.suggest_expanded(street_prompt, "add", label="Gas Lamps")
        assert len(result.items) == 5
        assert all("Gas Lamps" in i.text for i in result.items)
        assert result.provenance.user_input == "add"
        assert result.provenance.label == "Gas Lamps"

    def test_no_label_whole_scene(self, street_prompt):
        engine = engine_with([{"match": '"more dramatic"', "output": FIVE}])
        result = engine.suggest_expanded(street_prompt, "more dramatic")
        assert len(result.items) == 5
        assert result.provenance.label is None

    def test_empty_input_rejected(self, street_prompt):
        engine = engine_with([])
        with pytest.raises(InvalidRequest):
            engine.suggest_expanded(street_prompt, "   ")


class TestPurity:
    def test_identical_inputs_identical_sets(self, street_prompt):
        table = [{"match": "Propose exactly 5 ways", "output": FIVE}]
        a = engine_with(table).suggest_global(street_prompt)
        b = engine_with(table).suggest_global(street_prompt)
        assert a == b
