from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracetune.errors import (
    CyclicParent,
    DuplicateLabel,
    EmptyContent,
    MissingCategory,
    UnknownField,
    UnknownLabel,
    UnknownParent,
)
from tracetune.prompt import (
    CATEGORIES,
    ContentElement,
    StructuredPrompt,
    derive_label_tree,
    diff_prompts,
    parse_structured_prompt,
    segment_for_label,
    serialize_structured_prompt,
)


def minimal_doc(**overrides):
    doc = {
        "schema": "tracetune/prompt/v1",
        "theme": "harbor town",
        "art_style": "watercolor",
        "content": [
            {"label": "Vintage Cars", "description": "1930s sedans parked along the curb"}
        ],
        "lighting": "dawn",
        "color": "pastel",
        "shot_angle": "wide",
    }
    doc.update(overrides)
    return doc


class TestParse:
    def test_single_element_document(self):
        p = parse_structured_prompt(json.dumps(minimal_doc()))
        assert p.labels() == ["Vintage Cars"]
        tree = derive_label_tree(p)
        assert [n.label for n in tree.roots] == ["Vintage Cars"]

    def test_missing_category(self):
        for category in CATEGORIES:
            doc = minimal_doc()
            del doc[category]
            with pytest.raises(MissingCategory) as exc:
                parse_structured_prompt(json.dumps(doc))
            assert exc.value.category == category

    def test_empty_content(self):
        with pytest.raises(EmptyContent):
            parse_structured_prompt(json.dumps(minimal_doc(content=[])))

    def test_duplicate_label_case_folded(self):
        doc = minimal_doc(
            content=[
                {"label": "tree", "description": "an oak"},
                {"label": "Tree", "description": "a pine"},
            ]
        )
        with pytest.raises(DuplicateLabel) as exc:
            parse_structured_prompt(json.dumps(doc))
        assert exc.value.label == "tree"

    def test_cyclic_parent(self):
        doc = minimal_doc(
            content=[
                {"label": "a", "description": "x", "parent": "b"},
                {"label": "b", "description": "y", "parent": "a"},
            ]
        )
        with pytest.raises(CyclicParent):
            parse_structured_prompt(json.dumps(doc))

    def test_unknown_parent(self):
        doc = minimal_doc(
            content=[{"label": "a", "description": "x", "parent": "ghost"}]
        )
        with pytest.raises(UnknownParent):
            parse_structured_prompt(json.dumps(doc))

    def test_unknown_extra_field_rejected(self):
        with pytest.raises(UnknownField):
            parse_structured_prompt(json.dumps(minimal_doc(mood="dark")))


class TestSerialize:
    def test_round_trip(self, street_prompt):
        assert parse_structured_prompt(serialize_structured_prompt(street_prompt)) == street_prompt

    def test_deterministic_bytes(self, street_prompt):
        twin = parse_structured_prompt(serialize_structured_prompt(street_prompt))
        assert serialize_structured_prompt(street_prompt) == serialize_structured_prompt(twin)

    def test_parent_survives_round_trip(self):
        p = StructuredPrompt(
            theme="t",
            art_style="a",
            content=(
                ContentElement(label="Market", description="a busy market square"),
                ContentElement(
                    label="Stalls", description="wooden stalls", parent="Market"
                ),
            ),
            lighting="l",
            color="c",
            shot_angle="s",
        )
        back = parse_structured_prompt(serialize_structured_prompt(p))
        assert back.element_for("Stalls").parent == "Market"
        assert back == p


class TestLabelTree:
    def test_parent_child(self):
        p = StructuredPrompt(
            theme="t",
            art_style="a",
            content=(
                ContentElement(label="A", description="da"),
                ContentElement(label="B", description="db", parent="A"),
            ),
            lighting="l",
            color="c",
            shot_angle="s",
        )
        tree = derive_label_tree(p)
        assert [n.label for n in tree.roots] == ["A"]
        assert [n.label for n in tree.roots[0].children] == ["B"]

    def test_flat_roots_in_content_order(self, street_prompt):
        tree = derive_label_tree(street_prompt)
        assert [n.label for n in tree.roots] == street_prompt.labels()

    def test_three_subtrees_ten_nodes(self):
        # exhaustive-traversal oracle, independent of LabelTree helpers
        elements = [ContentElement(label=f"root{i}", description="d") for i in range(3)]
        parents = ["root0", "root0", "root1", "root2", "root2", "root2", "root1"]
        elements += [
            ContentElement(label=f"leaf{i}", description="d", parent=parent)
            for i, parent in enumerate(parents)
        ]
        p = StructuredPrompt(
            theme="t", art_style="a", content=tuple(elements),
            lighting="l", color="c", shot_angle="s",
        )
        tree = derive_label_tree(p)

        def count(node):
            return 1 + sum(count(c) for c in node.children)

        assert len(tree.roots) == 3
        assert sum(count(r) for r in tree.roots) == 10


class TestSegmentForLabel:
    def test_finds_description(self, street_prompt):
        seg = segment_for_label(street_prompt, "Vintage Cars")
        assert seg.element.description == "1930s sedans parked along the curb"
        assert seg.ancestors == ()

    def test_case_insensitive(self, street_prompt):
        a = segment_for_label(street_prompt, "vintage cars")
        b = segment_for_label(street_prompt, "VINTAGE CARS")
        assert a.element == b.element

    def test_unknown_label(self, street_prompt):
        with pytest.raises(UnknownLabel):
            segment_for_label(street_prompt, "Tram")

    def test_ancestor_chain_root_first(self):
        p = StructuredPrompt(
            theme="t", art_style="a",
            content=(
                ContentElement(label="City", description="d"),
                ContentElement(label="Block", description="d", parent="City"),
                ContentElement(label="Door", description="d", parent="Block"),
            ),
            lighting="l", color="c", shot_angle="s",
        )
        seg = segment_for_label(p, "Door")
        assert [el.label for el in seg.ancestors] == ["City", "Block"]


class TestDiff:
    def test_self_diff_empty(self, street_prompt):
        assert diff_prompts(street_prompt, street_prompt).is_empty()

    def test_single_description_edit(self, street_prompt):
        edited = StructuredPrompt(
            theme=street_prompt.theme,
            art_style=street_prompt.art_style,
            content=tuple(
                ContentElement(label=el.label, description="electric trams gliding past", parent=el.parent)
                if el.label == "Vintage Cars"
                else el
                for el in street_prompt.content
            ),
            lighting=street_prompt.lighting,
            color=street_prompt.color,
            shot_angle=street_prompt.shot_angle,
        )
        diff = diff_prompts(street_prompt, edited)
        assert diff.changed_labels == {"Vintage Cars"}
        assert diff.changed_categories == {"content"}
        assert not diff.added_labels and not diff.removed_labels

    def test_add_and_remove(self, street_prompt):
        replaced = StructuredPrompt(
            theme=street_prompt.theme,
            art_style=street_prompt.art_style,
            content=tuple(
                el for el in street_prompt.content if el.label != "Vintage Cars"
            )
            + (ContentElement(label="Tram", description="a vintage electrical tram"),),
            lighting=street_prompt.lighting,
            color=street_prompt.color,
            shot_angle=street_prompt.shot_angle,
        )
        # set-difference oracle over the label sets
        before_labels = {el.key for el in street_prompt.content}
        after_labels = {el.key for el in replaced.content}
        diff = diff_prompts(street_prompt, replaced)
        assert {l.casefold() for l in diff.added_labels} == after_labels - before_labels
        assert {l.casefold() for l in diff.removed_labels} == before_labels - after_labels
        assert diff.added_labels == {"Tram"}
        assert diff.removed_labels == {"Vintage Cars"}

    def test_category_text_edit(self, street_prompt):
        night = StructuredPrompt(
            theme=street_prompt.theme,
            art_style=street_prompt.art_style,
            content=street_prompt.content,
            lighting="moonlit night",
            color=street_prompt.color,
            shot_angle=street_prompt.shot_angle,
        )
        diff = diff_prompts(street_prompt, night)
        assert diff.changed_categories == {"lighting"}
        assert diff.is_empty() is False


# --- property tests ---

_label_text = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 _-",
    min_size=1,
    max_size=16,
).filter(lambda s: s.strip())

_free_text = st.text(min_size=0, max_size=40)


@st.composite
def prompts(draw) -> StructuredPrompt:
    n = draw(st.integers(min_value=1, max_value=8))
    labels: list[str] = []
    for _ in range(n):
        label = draw(
            _label_text.filter(
                lambda s, seen=tuple(labels): s.strip().casefold()
                not in {x.strip().casefold() for x in seen}
            )
        )
        labels.append(label)
    elements = []
    for i, label in enumerate(labels):
        parent = None
        if i > 0 and draw(st.booleans()):
            parent = labels[draw(st.integers(min_value=0, max_value=i - 1))]
        elements.append(
            ContentElement(label=label, description=draw(_free_text), parent=parent)
        )
    return StructuredPrompt(
        theme=draw(_free_text),
        art_style=draw(_free_text),
        content=tuple(elements),
        lighting=draw(_free_text),
        color=draw(_free_text),
        shot_angle=draw(_free_text),
    )


@settings(max_examples=150, deadline=None)
@given(prompts())
def test_round_trip_property(p: StructuredPrompt):
    assert parse_structured_prompt(serialize_structured_prompt(p)) == p


@settings(max_examples=100, deadline=None)
@given(prompts())
def test_label_tree_counts(p: StructuredPrompt):
    tree = derive_label_tree(p)
    labels = tree.all_labels()
    assert len(labels) == len(p.content)
    assert len({l.casefold() for l in labels}) == len(labels)


@settings(max_examples=100, deadline=None)
@given(prompts(), st.data())
def test_diff_locality_property(p: StructuredPrompt, data):
    index = data.draw(st.integers(min_value=0, max_value=len(p.content) - 1))
    target = p.content[index]
    edited = StructuredPrompt(
        theme=p.theme,
        art_style=p.art_style,
        content=tuple(
            ContentElement(
                label=el.label,
                description=el.description + " (edited)",
                parent=el.parent,
            )
            if i == index
            else el
            for i, el in enumerate(p.content)
        ),
        lighting=p.lighting,
        color=p.color,
        shot_angle=p.shot_angle,
    )
    diff = diff_prompts(p, edited)
    assert diff.changed_labels == {target.label}
    assert diff.changed_categories == {"content"}
    assert not diff.added_labels and not diff.removed_labels
