from __future__ import annotations

import numpy as np
import pytest

from tracetune.correspondence import (
    QUERY_TEXT_TEMPLATE,
    CorrespondenceEngine,
    tight_bbox,
)
from tracetune.errors import EmptyLabelSet, EmptyMask, InvalidRequest
from tracetune.geometry import RegionSelection
from tracetune.imaging import ImageData
from tracetune.providers.mocks import ColorRegionSegmentation, StaticSegmentation

from helpers import make_image, paint_rect


class BasisEmbedding:
    """Maps label i to basis vector e_i and every image to e_<image_index>."""

    def __init__(self, labels: list[str], image_index: int):
        self.labels = labels
        self.image_index = image_index
        self.image_calls = 0
        self.text_calls = 0

    @property
    def dimension(self) -> int:
        return max(len(self.labels), self.image_index + 1)

    def _basis(self, i: int) -> np.ndarray:
        v = np.zeros(self.dimension)
        v[i] = 1.0
        return v

    def embed_text(self, text: str) -> np.ndarray:
        self.text_calls += 1
        prefix = "The bright part is a segmentation of "
        queried = text[len(prefix) :] if text.startswith(prefix) else text
        for i, label in enumerate(self.labels):
            if label.casefold() == queried.casefold():
                return self._basis(i)
        return np.zeros(self.dimension)

    def embed_image(self, image: ImageData) -> np.ndarray:
        self.image_calls += 1
        return self._basis(self.image_index)


def engine_with(segmentation, embedding=None) -> CorrespondenceEngine:
    if embedding is None:
        embedding = BasisEmbedding(["x"], 0)
    return CorrespondenceEngine(segmentation, embedding)


def blob_image(size=60, box=(10, 20, 30, 40), color=(200, 40, 40)) -> ImageData:
    return paint_rect(make_image(size, size, (15, 15, 18)), box, color)


class TestSegmentRegion:
    def test_point_recovers_blob_with_scanned_bbox(self):
        # 20x20 hand-drawn blob; bbox oracle by exhaustive pixel scan
        image = blob_image(size=20, box=(3, 5, 11, 14))
        engine = engine_with(ColorRegionSegmentation())
        seg = engine.segment_region(image, RegionSelection.at_point(5, 7))

        expected = np.zeros((20, 20), dtype=bool)
        expected[5:14, 3:11] = True
        assert np.array_equal(seg.mask, expected)

        xs = [x for y in range(20) for x in range(20) if seg.mask[y, x]]
        ys = [y for y in range(20) for x in range(20) if seg.mask[y, x]]
        assert seg.bbox.as_tuple() == (min(xs), min(ys), max(xs) + 1, max(ys) + 1)

    def test_full_mask_gives_full_image_bbox(self):
        image = make_image(16, 12)
        full = np.ones((12, 16), dtype=bool)
        engine = engine_with(StaticSegmentation(full))
        seg = engine.segment_region(image, RegionSelection.in_box(0, 0, 16, 12))
        assert seg.bbox.as_tuple() == (0, 0, 16, 12)

    def test_all_false_mask_raises_empty(self):
        engine = engine_with(StaticSegmentation())
        with pytest.raises(EmptyMask):
            engine.segment_region(make_image(8, 8), RegionSelection.at_point(1, 1))

    def test_out_of_bounds_selection_rejected(self):
        engine = engine_with(ColorRegionSegmentation())
        with pytest.raises(InvalidRequest):
            engine.segment_region(make_image(8, 8), RegionSelection.at_point(8, 0))

    def test_box_selection_picks_modal_color(self):
        image = blob_image(size=40, box=(8, 8, 26, 30))
        engine = engine_with(ColorRegionSegmentation())
        seg = engine.segment_region(image, RegionSelection.in_box(6, 6, 28, 32))
        assert seg.bbox.as_tuple() == (8, 8, 26, 30)


class TestPrepareQueryImage:
    def test_darkening_values(self):
        image = paint_rect(make_image(10, 10, (200, 100, 50)), (2, 2, 6, 6), (90, 60, 30))
        engine = engine_with(ColorRegionSegmentation())
        seg = engine.segment_region(image, RegionSelection.at_point(3, 3))
        query = engine.prepare_query_image(image, seg)

        inside = query.mask
        outside_px = query.pixels.pixels[~inside]
        if outside_px.size:
            assert set(map(tuple, outside_px.reshape(-1, 3))) == {(40, 20, 10)}
        assert set(map(tuple, query.pixels.pixels[inside].reshape(-1, 3))) == {(90, 60, 30)}

    def test_inside_pixels_bit_identical(self):
        rng = np.random.default_rng(3)
        px = rng.integers(0, 256, size=(30, 30, 3), dtype=np.uint8)
        px[10:20, 5:15] = (7, 77, 177)
        image = ImageData(px)
        engine = engine_with(ColorRegionSegmentation())
        seg = engine.segment_region(image, RegionSelection.at_point(6, 12))
        query = engine.prepare_query_image(image, seg)
        box = query.provenance.crop_box
        source_crop = image.pixels[box.y0 : box.y1, box.x0 : box.x1]
        assert np.array_equal(
            query.pixels.pixels[query.mask], source_crop[query.mask]
        )

    def test_corner_blob_clamps_crop(self):
        # blob at the image corner; 10% padding must clamp, not run out of bounds
        image = blob_image(size=50, box=(0, 0, 20, 30))
        engine = engine_with(ColorRegionSegmentation())
        seg = engine.segment_region(image, RegionSelection.at_point(0, 0))
        query = engine.prepare_query_image(image, seg)
        box = query.provenance.crop_box

        pad = int(0.1 * max(20, 30))  # independent dimension oracle
        assert box.as_tuple() == (0, 0, min(50, 20 + pad), min(50, 30 + pad))
        assert query.pixels.height == box.height and query.pixels.width == box.width

    def test_floor_darkening_every_value(self):
        # all 256 channel values at once: out = floor(0.2 * in) outside mask
        gradient = np.arange(256, dtype=np.uint8).reshape(16, 16)
        px = np.stack([gradient, gradient, gradient], axis=2)
        image = ImageData(px)
        mask = np.zeros((16, 16), dtype=bool)
        mask[0, 0] = True
        engine = engine_with(StaticSegmentation(mask))
        seg = engine.segment_region(image, RegionSelection.at_point(0, 0))
        query = engine.prepare_query_image(image, seg)
        box = query.provenance.crop_box
        src = image.pixels[box.y0 : box.y1, box.x0 : box.x1]
        expected = np.where(
            query.mask[:, :, None], src, np.floor(src * 0.2).astype(np.uint8)
        )
        assert np.array_equal(query.pixels.pixels, expected)


class TestResolveLabels:
    def make_query(self, engine, image, point):
        seg = engine.segment_region(image, RegionSelection.at_point(*point))
        return engine.prepare_query_image(image, seg)

    def test_planted_one_hot_ranks_first(self):
        labels = [f"label {i}" for i in range(5)]
        embedding = BasisEmbedding(labels, image_index=3)
        engine = CorrespondenceEngine(ColorRegionSegmentation(), embedding)
        query = self.make_query(engine, blob_image(), (15, 25))
        scores = engine.resolve_labels(query, labels)
        # cosine oracle: dot products against e_3 are exactly 1 and 0
        assert scores[0].label == "label 3"
        assert scores[0].score == 1.0
        assert all(s.score == 0.0 for s in scores[1:])

    def test_single_candidate(self):
        embedding = BasisEmbedding(["only"], image_index=0)
        engine = CorrespondenceEngine(ColorRegionSegmentation(), embedding)
        query = self.make_query(engine, blob_image(), (15, 25))
        scores = engine.resolve_labels(query, ["only"])
        assert [s.label for s in scores] == ["only"]

    def test_eight_candidates_returns_five(self):
        labels = [f"thing {i}" for i in range(8)]
        embedding = BasisEmbedding(labels, image_index=2)
        engine = CorrespondenceEngine(ColorRegionSegmentation(), embedding)
        query = self.make_query(engine, blob_image(), (15, 25))
        scores = engine.resolve_labels(query, labels)
        assert len(scores) == 5
        assert scores[0].label == "thing 2"

    def test_sorted_descending_with_stable_ties(self):
        labels = ["a", "b", "c", "d"]
        embedding = BasisEmbedding(labels, image_index=1)
        engine = CorrespondenceEngine(ColorRegionSegmentation(), embedding)
        query = self.make_query(engine, blob_image(), (15, 25))
        scores = engine.resolve_labels(query, labels)
        values = [s.score for s in scores]
        assert values == sorted(values, reverse=True)
        # the three zero-scored labels keep prompt order
        assert [s.label for s in scores[1:]] == ["a", "c", "d"]

    def test_empty_label_set(self):
        engine = engine_with(ColorRegionSegmentation())
        query = self.make_query(engine, blob_image(), (15, 25))
        with pytest.raises(EmptyLabelSet):
            engine.resolve_labels(query, [])

    def test_text_query_uses_exact_template(self):
        seen: list[str] = []

        class RecordingEmbedding(BasisEmbedding):
            def embed_text(self, text):
                seen.append(text)
                return super().embed_text(text)

        embedding = RecordingEmbedding(["Vintage Cars"], image_index=0)
        engine = CorrespondenceEngine(ColorRegionSegmentation(), embedding)
        query = self.make_query(engine, blob_image(), (15, 25))
        engine.resolve_labels(query, ["Vintage Cars"])
        assert seen == ["The bright part is a segmentation of Vintage Cars"]
        assert QUERY_TEXT_TEMPLATE == "The bright part is a segmentation of {label}"


class TestEmbeddingContext:
    def test_cached_context_encodes_once(self):
        labels = ["a", "b"]
        embedding = BasisEmbedding(labels, image_index=0)
        engine = CorrespondenceEngine(ColorRegionSegmentation(), embedding)
        image = blob_image()
        engine.precompute_image_embedding_context("img-1", image)

        for _ in range(2):
            engine.resolve_selection(
                image, RegionSelection.at_point(15, 25), labels, image_id="img-1"
            )
        assert embedding.image_calls == 1

    def test_replaced_image_re_encodes(self):
        labels = ["a"]
        embedding = BasisEmbedding(labels, image_index=0)
        engine = CorrespondenceEngine(ColorRegionSegmentation(), embedding)
        first = blob_image(color=(200, 40, 40))
        engine.precompute_image_embedding_context("img-1", first)
        engine.resolve_selection(first, RegionSelection.at_point(15, 25), labels, image_id="img-1")

        second = blob_image(color=(40, 200, 40))  # same id, new content
        engine.resolve_selection(second, RegionSelection.at_point(15, 25), labels, image_id="img-1")
        assert embedding.image_calls == 2

    def test_uncached_resolution_still_correct(self):
        labels = ["a", "b"]
        embedding = BasisEmbedding(labels, image_index=1)
        engine = CorrespondenceEngine(ColorRegionSegmentation(), embedding)
        image = blob_image()
        result = engine.resolve_selection(image, RegionSelection.at_point(15, 25), labels)
        assert result.scores[0].label == "b"
        # no precompute: nothing memoized, each resolve re-encodes
        engine.resolve_selection(image, RegionSelection.at_point(15, 25), labels)
        assert embedding.image_calls == 2


class TestBboxTightness:
    def test_shrinking_any_side_excludes_a_true_pixel(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            mask = np.zeros((24, 24), dtype=bool)
            n = rng.integers(1, 20)
            ys = rng.integers(0, 24, size=n)
            xs = rng.integers(0, 24, size=n)
            mask[ys, xs] = True
            box = tight_bbox(mask)
            assert mask[box.y0 : box.y1, box.x0 : box.x1].any()
            assert mask[:, box.x0].any() and mask[:, box.x1 - 1].any()
            assert mask[box.y0, :].any() and mask[box.y1 - 1, :].any()
            assert not mask[:, : box.x0].any() and not mask[:, box.x1 :].any()
            assert not mask[: box.y0, :].any() and not mask[box.y1 :, :].any()
