import numpy as np
import pytest

from regionlab.models.errors import InputShapeError, NodeIndexError, NumericError
from regionlab.models.network import (
    ActivationPattern,
    DenseLayer,
    NetworkModel,
    forward,
    forward_batch,
    forward_explicit_bn,
    hidden_node_affine,
    pattern_digest,
    predict_classes,
    region_affine_map,
)
from regionlab.models.regions import contains, extract_region
from tests.helpers import affine_model, random_network


def test_forward_shapes_and_pattern():
    model = random_network((5, 4), input_dim=3, class_count=2, seed=1)
    result = forward(model, np.zeros(3))
    assert result.logits.shape == (2,)
    assert len(result.pattern) == 9
    assert result.pattern.widths == (5, 4)
    assert np.array_equal(result.pattern.layer_bits(1), result.preacts[1] >= 0)


def test_forward_rejects_wrong_shape():
    model = random_network(input_dim=2)
    with pytest.raises(InputShapeError):
        forward(model, np.zeros(3))


def test_non_finite_parameters_are_rejected():
    with pytest.raises(NumericError) as info:
        NetworkModel([DenseLayer([[np.nan, 0.0]], [0.0])], 2, 1)
    assert info.value.layer == 0


def test_overflowing_layer_is_reported_by_both_passes():
    huge = 1e200 * np.eye(2)
    model = NetworkModel(
        [DenseLayer(huge, np.zeros(2)), DenseLayer(huge, np.zeros(2)), DenseLayer([[1.0, 1.0]], [0.0])], 2, 1
    )
    with np.errstate(over="ignore"):
        with pytest.raises(NumericError) as info:
            forward(model, np.ones(2))
        assert info.value.layer == 1
        with pytest.raises(NumericError) as info:
            forward_batch(model, np.ones((3, 2)))
        assert info.value.layer == 1


def test_batch_forward_matches_single_forward():
    model = random_network((6, 6), seed=3)
    inputs = np.random.default_rng(0).uniform(-1, 1, size=(50, 2))
    logits, bits = forward_batch(model, inputs)
    for x, row_logits, row_bits in zip(inputs, logits, bits):
        result = forward(model, x)
        assert np.allclose(result.logits, row_logits, atol=1e-12)
        assert np.array_equal(result.pattern.bits, row_bits)
    assert np.array_equal(predict_classes(model, inputs), logits.argmax(axis=1))


def test_affine_map_matches_logits_inside_region():
    rng = np.random.default_rng(0)
    for seed in range(10):
        model = random_network((8, 8), seed=seed)
        x_star = rng.uniform(-0.8, 0.8, size=2)
        affine = region_affine_map(model, x_star)
        system = extract_region(model, x_star)
        samples = x_star + rng.normal(scale=1e-3, size=(400, 2))
        inside = [x for x in samples if contains(system, x, tol=0.0)]
        for x in inside[:100]:
            assert np.allclose(forward(model, x).logits, affine(x), atol=1e-6)


def test_affine_map_matches_finite_differences():
    model = random_network((8, 8), seed=4)
    x_star = np.array([0.3, -0.2])
    affine = region_affine_map(model, x_star)
    base = forward(model, x_star).pattern
    h = 1e-6
    for i in range(2):
        step = np.zeros(2)
        step[i] = h
        if forward(model, x_star + step).pattern != base or forward(model, x_star - step).pattern != base:
            continue
        fd = (forward(model, x_star + step).logits - forward(model, x_star - step).logits) / (2 * h)
        assert np.allclose(fd, affine.J[:, i], atol=1e-4)


def test_pure_affine_model_has_one_region():
    model = affine_model([[1.0, 2.0], [-1.0, 0.5]], [0.1, 0.0])
    assert model.depth == 0
    affine = region_affine_map(model, np.array([0.2, 0.4]))
    assert np.allclose(affine.J, [[1.0, 2.0], [-1.0, 0.5]])
    assert np.allclose(affine.c, [0.1, 0.0])
    assert len(forward(model, np.zeros(2)).pattern) == 0


def test_batchnorm_folding_matches_explicit_path():
    model = random_network((6, 5), input_dim=3, class_count=3, seed=7, batchnorm=True)
    for x in np.random.default_rng(1).uniform(-1, 1, size=(20, 3)):
        assert np.allclose(forward(model, x).logits, forward_explicit_bn(model, x), atol=1e-6)


def test_hidden_node_affine_matches_preactivation():
    model = random_network((5, 5), seed=2)
    x = np.array([0.1, 0.7])
    w, b = hidden_node_affine(model, x, 1, 3)
    assert np.isclose(w @ x + b, forward(model, x).preacts[1][3], atol=1e-12)
    with pytest.raises(NodeIndexError):
        hidden_node_affine(model, x, 2, 0)
    with pytest.raises(NodeIndexError):
        hidden_node_affine(model, x, 0, 5)


def test_pattern_hex_and_digest():
    bits = np.array([1, 0, 1, 1, 0, 0, 1, 0, 1], dtype=bool)
    pattern = ActivationPattern(bits, (4, 5))
    assert ActivationPattern.from_hex(pattern.to_hex(), (4, 5)) == pattern
    assert pattern.digest() == pattern_digest(bits)
    assert pattern.digest() != pattern_digest(~bits)
    assert pattern.activation_rate() == pytest.approx(5 / 9)


def test_save_load_is_bit_exact(tmp_path):
    model = random_network((4, 4), seed=5, batchnorm=True)
    path = tmp_path / "model.json"
    model.save(path)
    loaded = NetworkModel.load(path)
    for index in range(model.depth + 1):
        assert np.array_equal(model.effective(index)[0], loaded.effective(index)[0])
        assert np.array_equal(model.effective(index)[1], loaded.effective(index)[1])
