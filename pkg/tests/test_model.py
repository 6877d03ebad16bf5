"""Model assembly: seeding, frozen weights, forward-pass contracts."""

import numpy as np
import pytest

from cocolora.backbone import Classifier, FrozenBackbone, FusionNetwork
from cocolora.errors import ConfigError, ShapeError
from cocolora.model import Model, ModelConfig
from cocolora.numerics import SeededRng

SMALL = dict(text_dim=6, audio_dim=5, n_layers=2, rank=3, context_dim=4, n_classes=3)


def make_model(family, seed=0, **overrides):
    cfg = ModelConfig(family=family, **{**SMALL, **overrides})
    return Model(cfg, seed=seed)


def batch(n=4, text_dim=6, audio_dim=5, key=0):
    rng = SeededRng(key)
    return rng.derive("t").normal((n, text_dim)), rng.derive("a").normal((n, audio_dim))


def test_config_validation():
    with pytest.raises(ConfigError, match="family"):
        ModelConfig(family="resnet")
    with pytest.raises(ConfigError, match="n_classes"):
        ModelConfig(n_classes=1)
    with pytest.raises(ConfigError, match="rank"):
        ModelConfig(text_dim=4, rank=8)
    with pytest.raises(ConfigError, match="alpha"):
        ModelConfig(alpha=0.0)
    assert ModelConfig(rank=8, alpha=32.0).scale == 4.0


def test_backbone_is_frozen_and_seed_stable():
    bb1 = FrozenBackbone(6, 3, SeededRng(5))
    bb2 = FrozenBackbone(6, 3, SeededRng(5))
    for (_, w1), (_, w2) in zip(bb1.tensors(), bb2.tensors()):
        assert not w1.requires_grad
        np.testing.assert_array_equal(w1.data, w2.data)
    # Distinct layers draw from distinct streams.
    assert not np.array_equal(bb1.weights[0].data, bb1.weights[1].data)


def test_initial_logits_are_zero_for_all_families():
    text, audio = batch()
    for family in ("lora", "blob", "clora", "coco", "fusion"):
        model = make_model(family)
        logits = model.mean_logits(text, audio)
        assert logits.shape == (4, 3)
        np.testing.assert_array_equal(logits, np.zeros((4, 3)))


def test_same_seed_rebuild_is_bitwise_identical():
    for family in ("lora", "blob", "clora", "coco", "fusion"):
        m1 = make_model(family, seed=9)
        m2 = make_model(family, seed=9)
        for name, t1 in m1.named_tensors().items():
            np.testing.assert_array_equal(t1.data, m2.named_tensors()[name].data)
        m3 = make_model(family, seed=10)
        assert any(
            not np.array_equal(t.data, m3.named_tensors()[name].data)
            for name, t in m1.named_tensors().items()
            if t.data.size and t.data.any()
        )


def test_trainable_split_excludes_backbone():
    model = make_model("coco")
    trainable = dict(model.trainable_tensors())
    assert not any(name.startswith("backbone.") for name in trainable)
    frozen = set(model.named_tensors()) - set(trainable)
    assert frozen == {"backbone.w0", "backbone.w1"}


def test_trainable_parameter_count_matches_shapes():
    model = make_model("coco")
    expected = sum(
        t.data.size for name, t in model.named_tensors().items()
        if not name.startswith("backbone.")
    )
    assert model.trainable_parameter_count() == expected


def test_forward_shape_validation():
    model = make_model("coco")
    text, audio = batch()
    with pytest.raises(ShapeError, match="text features"):
        model.forward(text[:, :3], audio)
    with pytest.raises(ShapeError, match="audio features"):
        model.forward(text, audio[:, :2])
    with pytest.raises(ShapeError, match="rows"):
        model.forward(text[:2], audio)
    with pytest.raises(ConfigError, match="mode"):
        model.forward(text, audio, mode="map")


def test_sample_mode_requires_rng_for_stochastic_families():
    text, audio = batch()
    for family in ("blob", "clora", "coco"):
        with pytest.raises(ConfigError, match="rng"):
            make_model(family).forward(text, audio, mode="sample")
    # Deterministic lora ignores the missing rng.
    make_model("lora").forward(text, audio, mode="sample")


def test_posterior_stats_reported_per_layer():
    text, audio = batch()
    result = make_model("coco").forward(text, audio)
    assert len(result.posteriors) == 2
    for mean, std in result.posteriors:
        assert mean.data.shape == (4, 9)
        assert std.data.shape == (4, 9)
    result = make_model("blob").forward(text, audio)
    for mean, std in result.posteriors:
        assert mean.data.shape == (1, 18)
    assert make_model("lora").forward(text, audio).posteriors == []
    assert make_model("fusion").forward(text, audio).posteriors == []


def test_sampling_is_rng_keyed_and_replayable():
    text, audio = batch()
    model = make_model("coco", seed=3)
    # Open the noise path: zero b and a zero classifier would hide sampling.
    model.layers[0].lora.b.data[:] = SeededRng(7).normal((6, 3))
    model.classifier.w.data[:] = SeededRng(8).normal((3, 6))
    out1 = model.forward(text, audio, mode="sample", rng=SeededRng(42))
    out2 = model.forward(text, audio, mode="sample", rng=SeededRng(42))
    np.testing.assert_array_equal(out1.logits.data, out2.logits.data)
    out3 = model.forward(text, audio, mode="sample", rng=SeededRng(43))
    assert not np.array_equal(out1.logits.data, out3.logits.data)


def test_sample_mode_collapses_to_mean_at_std_floor():
    # Forcing raw std to -800 drives softplus to exactly 0, leaving only the
    # tiny additive floor, so sampling is indistinguishable from the mean path.
    text, audio = batch()
    model = make_model("clora", seed=1)
    model.layers[0].lora.b.data[:] = SeededRng(7).normal((6, 3))
    model.classifier.w.data[:] = SeededRng(8).normal((3, 6))
    for layer in model.layers:
        layer.head.w.data[:] = 0.0
        layer.head.b.data[9:] = -800.0
        layer.head.b.data[:9] = SeededRng(9).normal(9)
    mean_logits = model.mean_logits(text, audio)
    sampled = model.forward(text, audio, mode="sample", rng=SeededRng(0)).logits.data
    np.testing.assert_allclose(sampled, mean_logits, atol=1e-4)
    assert not np.array_equal(sampled, mean_logits)


def test_fusion_model_has_no_backbone_pieces():
    model = make_model("fusion")
    names = set(model.named_tensors())
    assert names == {"fusion.w1", "fusion.b1", "fusion.w2", "fusion.b2",
                     "fusion.w3", "fusion.b3"}
    assert model.backbone is None and model.classifier is None


def test_classifier_and_fusion_validation():
    with pytest.raises(ConfigError):
        Classifier(4, 1)
    with pytest.raises(ConfigError):
        FusionNetwork(4, 4, 1, SeededRng(0))
    with pytest.raises(ConfigError):
        FrozenBackbone(0, 1, SeededRng(0))
    with pytest.raises(ConfigError):
        FrozenBackbone(4, 0, SeededRng(0))


def test_forward_observes_adapter_updates():
    # Nudging b off zero must change the logits through the delta path.
    text, audio = batch()
    model = make_model("coco", seed=2)
    model.classifier.w.data[:] = SeededRng(11).normal((3, 6))
    base = model.mean_logits(text, audio)
    model.layers[0].lora.b.data[:] = 0.05
    moved = model.mean_logits(text, audio)
    assert not np.array_equal(base, moved)
