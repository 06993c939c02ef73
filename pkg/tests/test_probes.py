import numpy as np
import pytest

from regionlab.models.network import forward, region_affine_map
from regionlab.models.polytope import insphere
from regionlab.models.probes import ClassProbe, class_probe, probe_region, region_summary
from regionlab.models.regions import contains, contains_batch, extract_region
from regionlab.models.utils import log_softmax
from tests.helpers import affine_model, pixel_grid, random_network


def probe_inputs(model, x_star):
    x_star = np.asarray(x_star, dtype=np.float64)
    return extract_region(model, x_star), region_affine_map(model, x_star), x_star


def test_identical_logit_rows_do_not_move():
    model = affine_model([[0.4, -0.2], [0.4, -0.2]], [0.0, 0.0])
    system, affine, x_star = probe_inputs(model, [0.3, 0.1])
    probe = class_probe(system, affine, x_star, 1)
    assert np.array_equal(probe.x_t, x_star)
    assert probe.gap == 0.0
    assert probe.iterations == 0
    assert probe.log_prob == pytest.approx(-np.log(2.0))


@pytest.mark.parametrize("step_rule", ["open_loop", "line_search"])
def test_linear_model_reaches_the_box_vertex(step_rule):
    # z0 - z1 = x1 + 2 x2, maximized at (1, 1) and minimized at (-1, -1)
    model = affine_model([[0.5, 1.0], [-0.5, -1.0]], [0.0, 0.0])
    system, affine, x_star = probe_inputs(model, [0.2, -0.4])
    to_zero = class_probe(system, affine, x_star, 0, step_rule=step_rule)
    to_one = class_probe(system, affine, x_star, 1, step_rule=step_rule)
    assert np.allclose(to_zero.x_t, [1.0, 1.0])
    assert np.allclose(to_one.x_t, [-1.0, -1.0])
    assert to_zero.realized and to_one.realized
    assert to_zero.distortion == pytest.approx(np.linalg.norm([0.8, 1.4]))


def test_probe_matches_grid_search():
    points = pixel_grid(400)
    rng = np.random.default_rng(0)
    checked = 0
    for seed in range(10):
        model = random_network((6, 6), seed=seed)
        system, affine, x_star = probe_inputs(model, rng.uniform(-0.8, 0.8, size=2))
        inside = points[contains_batch(system, points, tol=0.0)]
        if not inside.size:
            continue
        logits = inside @ affine.J.T + affine.c
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        for t in range(model.class_count):
            probe = class_probe(system, affine, x_star, t, tol=1e-8, max_iters=300, step_rule="line_search")
            assert probe.log_prob >= log_probs[:, t].max() - max(1e-6, probe.gap)
            assert probe.log_prob <= 0.0
            assert probe.log_prob == pytest.approx(log_softmax(affine(probe.x_t))[t])
            checked += 1
    assert checked > 0


def test_line_search_never_loses_ground():
    model = random_network((8, 8), input_dim=3, class_count=3, seed=7)
    rng = np.random.default_rng(7)
    for _ in range(10):
        system, affine, x_star = probe_inputs(model, rng.uniform(-0.9, 0.9, size=3))
        start = log_softmax(affine(x_star))
        for t in range(3):
            probe = class_probe(system, affine, x_star, t, step_rule="line_search")
            assert probe.log_prob >= start[t] - 1e-12
            assert contains(system, probe.x_t, tol=1e-7)


def test_unknown_step_rule():
    model = affine_model([[1.0, 0.0], [-1.0, 0.0]], [0.0, 0.0])
    system, affine, x_star = probe_inputs(model, [0.0, 0.0])
    with pytest.raises(ValueError):
        class_probe(system, affine, x_star, 0, step_rule="exact")


def test_region_summary_counts_realized_classes():
    def probe(t, realized, distortion):
        return ClassProbe(t, np.zeros(2), -1.0, realized, distortion, 0.0, 3)

    summary = region_summary([probe(0, True, 0.1), probe(1, False, 0.5), probe(2, True, 0.3)])
    assert summary.class_region_count == 2
    assert summary.distortion == pytest.approx(0.5)
    assert region_summary([]).class_region_count == 0


def test_own_class_is_always_realized_with_two_classes():
    model = random_network((8, 8), seed=3)
    rng = np.random.default_rng(3)
    for x_star in rng.uniform(-0.9, 0.9, size=(10, 2)):
        logits = forward(model, x_star).logits
        if abs(logits[0] - logits[1]) < 1e-3:
            continue
        probes, summary = probe_region(model, x_star, step_rule="line_search")
        assert len(probes) == 2
        assert probes[int(np.argmax(logits))].realized
        assert 1 <= summary.class_region_count <= 2


def test_objective_is_concave_on_region_segments():
    model = random_network((8, 8), input_dim=3, class_count=4, seed=11)
    rng = np.random.default_rng(11)
    system, affine, _ = probe_inputs(model, rng.uniform(-0.5, 0.5, size=3))
    ball = insphere(system)
    offsets = rng.normal(size=(400, 3))
    offsets *= rng.uniform(0, ball.inradius, size=(400, 1)) / np.linalg.norm(offsets, axis=1, keepdims=True)
    inside = ball.center + offsets
    for a, b in zip(inside[::2], inside[1::2]):
        ends = 0.5 * (log_softmax(affine(a)) + log_softmax(affine(b)))
        assert np.all(log_softmax(affine(0.5 * (a + b))) >= ends - 1e-9)


def face_distance(system, x):
    norms = np.linalg.norm(system.W, axis=1)
    live = norms > 0
    facets = system.slacks(x)[live] / norms[live]
    box = np.minimum(x - system.box_lo, system.box_hi - x)
    return min(facets.min(initial=np.inf), box.min())


@pytest.mark.parametrize("step_rule", ["open_loop", "line_search"])
def test_unrealized_class_optimum_lies_on_a_face(step_rule):
    rng = np.random.default_rng(12)
    unrealized = 0
    for seed in range(30):
        model = random_network((6, 6), seed=seed)
        system, affine, x_star = probe_inputs(model, rng.uniform(-0.8, 0.8, size=2))
        for t in range(model.class_count):
            search = class_probe(system, affine, x_star, t, tol=1e-10, max_iters=2000, step_rule=step_rule)
            if search.realized:
                continue
            unrealized += 1
            assert contains(system, search.x_t, tol=1e-7)
            assert face_distance(system, search.x_t) <= 1e-6 * max(1.0, np.abs(search.x_t).max())
    assert unrealized > 0
