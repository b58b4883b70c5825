"""Vocabulary ordering, label one-hot expansion, and round-trip properties."""

import numpy as np
import pytest

from avloc.core import (
    SCOPE_FULL,
    SCOPE_SEEN_ONLY,
    ClassVocabulary,
    LabelSequence,
    PredictionSequence,
    SegmentEmbeddings,
    VideoSample,
    class_index,
    expand_one_hot,
    label_indices,
)
from avloc.errors import ScopeError, ShapeError, VocabularyError


@pytest.fixture
def tiny_vocab():
    return ClassVocabulary(seen=("a", "b"), unseen=("c",), special="other")


class TestClassVocabulary:
    def test_index_order_is_seen_unseen_special(self, tiny_vocab):
        assert tiny_vocab.classes(SCOPE_FULL) == ("a", "b", "c", "other")
        assert tiny_vocab.classes(SCOPE_SEEN_ONLY) == ("a", "b", "other")

    def test_unseen_class_indexes_after_seen(self, tiny_vocab):
        assert class_index(tiny_vocab, "c", SCOPE_FULL) == 2

    def test_special_index_per_scope(self, tiny_vocab):
        assert tiny_vocab.class_index("other", SCOPE_FULL) == 3
        assert tiny_vocab.class_index("other", SCOPE_SEEN_ONLY) == 2

    def test_missing_name_raises(self, tiny_vocab):
        with pytest.raises(VocabularyError):
            tiny_vocab.class_index("z")

    def test_unseen_name_missing_from_seen_only_scope(self, tiny_vocab):
        with pytest.raises(VocabularyError):
            tiny_vocab.class_index("c", SCOPE_SEEN_ONLY)

    def test_duplicate_names_rejected(self):
        with pytest.raises(VocabularyError):
            ClassVocabulary(seen=("a", "a"))
        with pytest.raises(VocabularyError):
            ClassVocabulary(seen=("a",), unseen=("a",))

    def test_special_collision_rejected(self):
        with pytest.raises(VocabularyError):
            ClassVocabulary(seen=("other",), special="other")

    def test_needs_at_least_one_seen_class(self):
        with pytest.raises(VocabularyError):
            ClassVocabulary(seen=())

    def test_benchmark_shape_widths(self):
        """46 seen + 21 unseen + special gives widths 68 and 47."""
        vocab = ClassVocabulary(
            seen=tuple(f"s{i}" for i in range(46)),
            unseen=tuple(f"u{i}" for i in range(21)),
        )
        assert vocab.size(SCOPE_FULL) == 68
        assert vocab.size(SCOPE_SEEN_ONLY) == 47

    def test_json_round_trip(self, tiny_vocab, tmp_path):
        path = tmp_path / "vocab.json"
        tiny_vocab.save(path)
        assert ClassVocabulary.load(path) == tiny_vocab

    def test_configurable_special_string(self):
        vocab = ClassVocabulary(seen=("a",), special="background")
        assert vocab.classes()[-1] == "background"


class TestExpandOneHot:
    def test_all_background_special_label(self, tiny_vocab):
        label = LabelSequence("v", "other", (0, 0, 0))
        hot = expand_one_hot(label, tiny_vocab, SCOPE_FULL)
        expected = np.zeros((3, 4))
        expected[:, 3] = 1.0
        np.testing.assert_array_equal(hot, expected)

    def test_flagged_segments_hit_event_column(self, tiny_vocab):
        label = LabelSequence("v", "b", (1, 1, 0, 0))
        hot = expand_one_hot(label, tiny_vocab, SCOPE_FULL)
        assert hot[0, 1] == 1.0 and hot[1, 1] == 1.0
        assert hot[2, 3] == 1.0 and hot[3, 3] == 1.0

    def test_rows_sum_to_exactly_one(self, tiny_vocab):
        label = LabelSequence("v", "a", (1, 0, 1, 0, 1))
        for scope in (SCOPE_FULL, SCOPE_SEEN_ONLY):
            hot = expand_one_hot(label, tiny_vocab, scope)
            np.testing.assert_array_equal(hot.sum(axis=1), np.ones(5))

    def test_seen_only_rejects_unseen_event(self, tiny_vocab):
        label = LabelSequence("v", "c", (1, 0))
        with pytest.raises(ScopeError):
            expand_one_hot(label, tiny_vocab, SCOPE_SEEN_ONLY)

    def test_unknown_class_rejected(self, tiny_vocab):
        label = LabelSequence("v", "zebra", (1, 0))
        with pytest.raises(VocabularyError):
            expand_one_hot(label, tiny_vocab)

    def test_special_label_with_flags_rejected(self, tiny_vocab):
        label = LabelSequence("v", "other", (1, 0))
        with pytest.raises(VocabularyError):
            expand_one_hot(label, tiny_vocab)

    def test_round_trip_argmax_recovers_assignment(self, tiny_vocab):
        """expand_one_hot then row-argmax equals label_indices, always."""
        rng = np.random.default_rng(7)
        names = ("a", "b", "c", "other")
        for _ in range(200):
            cls = names[rng.integers(0, 4)]
            t = int(rng.integers(1, 12))
            flags = tuple(int(f) for f in rng.integers(0, 2, t)) if cls != "other" else (0,) * t
            label = LabelSequence("v", cls, flags)
            hot = expand_one_hot(label, tiny_vocab, SCOPE_FULL)
            np.testing.assert_array_equal(
                np.argmax(hot, axis=1), label_indices(label, tiny_vocab, SCOPE_FULL)
            )

    def test_seen_only_equals_full_with_unseen_columns_deleted(self, tiny_vocab):
        rng = np.random.default_rng(11)
        keep = [0, 1, 3]  # seen columns plus the special column
        for _ in range(100):
            cls = ("a", "b", "other")[rng.integers(0, 3)]
            flags = tuple(int(f) for f in rng.integers(0, 2, 6)) if cls != "other" else (0,) * 6
            label = LabelSequence("v", cls, flags)
            full = expand_one_hot(label, tiny_vocab, SCOPE_FULL)
            seen_only = expand_one_hot(label, tiny_vocab, SCOPE_SEEN_ONLY)
            np.testing.assert_array_equal(seen_only, full[:, keep])


class TestValueTypes:
    def test_label_flags_must_be_binary(self):
        with pytest.raises(VocabularyError):
            LabelSequence("v", "a", (0, 2, 1))

    def test_prediction_validate_bounds(self, tiny_vocab):
        PredictionSequence("v", (0, 3, 2)).validate(tiny_vocab)
        with pytest.raises(VocabularyError):
            PredictionSequence("v", (0, 4)).validate(tiny_vocab)

    def test_embeddings_reject_non_finite(self):
        bad = np.ones((2, 3))
        bad[1, 2] = np.nan
        with pytest.raises(ShapeError):
            SegmentEmbeddings("audio", bad)

    def test_embeddings_reject_wrong_rank(self):
        with pytest.raises(ShapeError):
            SegmentEmbeddings("audio", np.ones(5))

    def test_unknown_modality_rejected(self):
        with pytest.raises(ShapeError):
            SegmentEmbeddings("smell", np.ones((2, 2)))

    def test_video_sample_requires_matching_shapes(self):
        a = SegmentEmbeddings("audio", np.ones((3, 4)))
        v = SegmentEmbeddings("visual", np.ones((2, 4)))
        with pytest.raises(ShapeError):
            VideoSample("v", a, v)

    def test_video_sample_checks_label_length(self):
        a = SegmentEmbeddings("audio", np.ones((3, 4)))
        v = SegmentEmbeddings("visual", np.ones((3, 4)))
        with pytest.raises(ShapeError):
            VideoSample("v", a, v, LabelSequence("v", "x", (1, 0)))
