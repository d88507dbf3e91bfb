import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdnn_audio import hierarchy, mlp
from hdnn_audio.errors import DimensionMismatch
from hdnn_audio.features import FeatureKind, FeatureSequence
from hdnn_audio.hierarchy import (CascadeModel, SparseContextConfig, classify,
                                  load_cascade, posteriorgram, save_cascade,
                                  second_stage_inputs, sparse_stack,
                                  train_cascade)


def make_cascade(rng, num_classes=3, in_dim=5):
    offsets = SparseContextConfig(offsets=(-2, 0, 2))
    stage1 = mlp.init_random([in_dim, 6, num_classes], rng)
    stage2 = mlp.init_random([3 * num_classes, 4, num_classes], rng)
    return CascadeModel(first_stage=stage1, sparse=offsets, second_stage=stage2)


class TestSparseConfig:
    def test_defaults(self):
        assert SparseContextConfig().offsets == (-10, -5, 0, 5, 10)

    def test_must_increase(self):
        with pytest.raises(ValueError):
            SparseContextConfig(offsets=(0, -5, 5))

    def test_must_contain_zero(self):
        with pytest.raises(ValueError):
            SparseContextConfig(offsets=(-5, 5))


class TestSparseStack:
    def test_hand_enumerated_with_clamping(self):
        post = np.array([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]])
        out = sparse_stack(post, SparseContextConfig(offsets=(-1, 0, 1)))
        assert out.shape == (3, 6)
        np.testing.assert_allclose(out[0], [0, 1, 0, 1, 2, 3])  # left clamp
        np.testing.assert_allclose(out[1], [0, 1, 2, 3, 4, 5])
        np.testing.assert_allclose(out[2], [2, 3, 4, 5, 4, 5])  # right clamp

    def test_zero_offset_only_is_identity(self, rng):
        post = rng.random((7, 4))
        out = sparse_stack(post, SparseContextConfig(offsets=(0,)))
        np.testing.assert_allclose(out, post)

    @given(t=st.integers(1, 40))
    @settings(max_examples=20, deadline=None)
    def test_center_block_is_input(self, t):
        rng = np.random.default_rng(t)
        post = rng.random((t, 3))
        config = SparseContextConfig(offsets=(-10, -5, 0, 5, 10))
        out = sparse_stack(post, config)
        assert out.shape == (t, 15)
        np.testing.assert_allclose(out[:, 6:9], post)


class TestCascadeModel:
    def test_dimension_validation(self, rng):
        stage1 = mlp.init_random([5, 4, 3], rng)
        stage2 = mlp.init_random([7, 3], rng)  # should be 3*3=9
        with pytest.raises(DimensionMismatch):
            CascadeModel(first_stage=stage1,
                         sparse=SparseContextConfig(offsets=(-2, 0, 2)),
                         second_stage=stage2)

    def test_posteriorgram_shape_and_kind(self, rng):
        cascade = make_cascade(rng)
        seq = FeatureSequence(frames=rng.standard_normal((12, 5)),
                              feature_kind=FeatureKind.DCT_REDUCED)
        post = posteriorgram(cascade.first_stage, seq)
        assert post.feature_kind is FeatureKind.POSTERIOR
        assert post.frames.shape == (12, 3)
        np.testing.assert_allclose(post.frames.sum(axis=1), 1.0)

    def test_classify_equals_composed_stages(self, rng):
        cascade = make_cascade(rng)
        seq = FeatureSequence(frames=rng.standard_normal((15, 5)),
                              feature_kind=FeatureKind.DCT_REDUCED)
        pred = classify(cascade, seq)
        # oracle: compose the pieces explicitly
        post = posteriorgram(cascade.first_stage, seq).frames
        x2 = sparse_stack(post, cascade.sparse)
        _, post2 = mlp.forward(cascade.second_stage, x2)
        np.testing.assert_array_equal(pred, post2.argmax(axis=1))
        np.testing.assert_array_equal(
            x2, second_stage_inputs(cascade.first_stage, cascade.sparse, seq))


class TestTrainCascade:
    def separable_clips(self, rng, num_classes=2, clips_per_class=4, t=30, d=4):
        clips = []
        for c in range(num_classes):
            for _ in range(clips_per_class):
                frames = rng.standard_normal((t, d)) + 3.0 * c
                clips.append((FeatureSequence(frames=frames,
                                              feature_kind=FeatureKind.DCT_REDUCED), c))
        return clips

    def schedule(self):
        return mlp.TrainSchedule(initial_lr=0.5, minibatch_frames=32,
                                 max_epochs=5, rng_seed=0)

    def test_learns_separable_clips(self, rng):
        clips = self.separable_clips(rng)
        cascade = train_cascade(clips, num_classes=2, stage1_hidden=[8],
                                stage2_hidden=[6],
                                schedule_first=self.schedule(),
                                schedule_second=self.schedule(),
                                sparse=SparseContextConfig(offsets=(-2, 0, 2)))
        correct = total = 0
        for seq, label in clips:
            pred = classify(cascade, seq)
            correct += int(np.sum(pred == label))
            total += len(pred)
        assert correct / total > 0.9

    def test_deterministic(self, rng):
        clips = self.separable_clips(rng)
        outs = []
        for _ in range(2):
            cascade = train_cascade(clips, num_classes=2, stage1_hidden=[8],
                                    stage2_hidden=[6],
                                    schedule_first=self.schedule(),
                                    schedule_second=self.schedule(),
                                    sparse=SparseContextConfig(offsets=(-1, 0, 1)))
            outs.append(mlp.model_to_bytes(cascade.first_stage)
                        + mlp.model_to_bytes(cascade.second_stage))
        assert outs[0] == outs[1]


class TestCascadeFiles:
    def test_round_trip(self, tmp_path, rng):
        cascade = make_cascade(rng)
        save_cascade(cascade, tmp_path / "c.achd")
        loaded = load_cascade(tmp_path / "c.achd")
        assert loaded.sparse.offsets == cascade.sparse.offsets
        np.testing.assert_array_equal(loaded.first_stage.layers[0].weights,
                                      cascade.first_stage.layers[0].weights)
        np.testing.assert_array_equal(loaded.second_stage.layers[-1].bias,
                                      cascade.second_stage.layers[-1].bias)

    def test_bad_magic(self, tmp_path):
        (tmp_path / "bad.achd").write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(DimensionMismatch):
            load_cascade(tmp_path / "bad.achd")
