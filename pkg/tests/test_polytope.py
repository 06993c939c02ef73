import itertools
import time

import numpy as np
import pytest

from regionlab.models.errors import SolverFailureError
from regionlab.models.polytope import (
    BoundedDualSimplex,
    LinearProgram,
    LpStatus,
    RevisedSimplex,
    insphere,
    make_solver,
    remove_redundant,
    solve_lp,
)
from regionlab.models.regions import contains, contains_batch, extract_region
from tests.helpers import box_system, pixel_grid, random_network, random_system


def vertex_oracle(objective, A, rhs, lo, hi):
    """Best objective over all feasible intersections of two constraint lines"""
    rows = np.vstack([A, np.eye(2), -np.eye(2)])
    bounds = np.concatenate([rhs, hi, -lo])
    best = None
    for i, j in itertools.combinations(range(rows.shape[0]), 2):
        M = rows[[i, j]]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        y = np.linalg.solve(M, bounds[[i, j]])
        if np.all(rows @ y <= bounds + 1e-9):
            value = objective @ y
            best = value if best is None else max(best, value)
    return best


def test_box_lp():
    solution = solve_lp(LinearProgram([1.0, 0.0], np.zeros((0, 2)), np.zeros(0), [-1.0, -1.0], [1.0, 1.0]))
    assert solution.status is LpStatus.OPTIMAL
    assert solution.objective_value == pytest.approx(1.0)
    assert solution.y[0] == pytest.approx(1.0)


def test_infeasible_lp():
    lp = LinearProgram([0.0, 0.0], [[-1.0, 0.0], [1.0, 0.0]], [-1.0, 0.0])
    assert solve_lp(lp).status is LpStatus.INFEASIBLE


def test_unbounded_lp():
    lp = LinearProgram([1.0, 0.0], [[0.0, 1.0]], [1.0], [0.0, 0.0], None)
    assert solve_lp(lp).status is LpStatus.UNBOUNDED


def test_random_lps_match_vertex_enumeration():
    rng = np.random.default_rng(0)
    lo, hi = np.full(2, -2.0), np.full(2, 2.0)
    for _ in range(500):
        count = rng.integers(1, 9)
        A = rng.normal(size=(count, 2))
        anchor = rng.uniform(-1.5, 1.5, size=2)
        rhs = A @ anchor + rng.uniform(0.0, 1.0, size=count)
        objective = rng.normal(size=2)
        solution = solve_lp(LinearProgram(objective, A, rhs, lo, hi))
        assert solution.status is LpStatus.OPTIMAL
        assert np.all(A @ solution.y <= rhs + 1e-7 * np.maximum(1.0, np.linalg.norm(A, axis=1)))
        assert solution.objective_value == pytest.approx(vertex_oracle(objective, A, rhs, lo, hi), abs=1e-8)


def test_warm_resolve_matches_fresh_solve():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(6, 2))
    rhs = rng.uniform(0.2, 1.0, size=6)
    lo, hi = np.full(2, -1.0), np.full(2, 1.0)
    solver = RevisedSimplex(LinearProgram([1.0, 0.0], A, rhs, lo, hi))
    solver.solve()
    for _ in range(10):
        objective = rng.normal(size=2)
        warm = solver.resolve(objective)
        fresh = solve_lp(LinearProgram(objective, A, rhs, lo, hi))
        assert warm.objective_value == pytest.approx(fresh.objective_value, abs=1e-9)


def test_iteration_cap_raises_solver_failure():
    lp = LinearProgram([1.0, 1.0], [[1.0, 1.0]], [1.0], [0.0, 0.0], None)
    with pytest.raises(SolverFailureError):
        RevisedSimplex(lp, max_iterations=1).solve()


def test_insphere_trivial_cases():
    empty = box_system(np.zeros((0, 2)), np.zeros(0))
    assert insphere(empty).inradius == pytest.approx(1.0)
    half = box_system([[1.0, 0.0]], [0.0])
    result = insphere(half)
    assert result.inradius == pytest.approx(0.5)
    assert half.slacks(result.center)[0] >= 0.5 - 1e-9


def test_insphere_matches_grid_brute_force():
    points = pixel_grid(400)
    cell = 2.0 / 400 * np.sqrt(2.0)
    rng = np.random.default_rng(2)
    for seed in range(50):
        model = random_network((6, 6), seed=seed)
        system = extract_region(model, rng.uniform(-0.9, 0.9, size=2))
        result = insphere(system)
        norms = np.linalg.norm(system.W, axis=1)
        live = norms > 0
        assert np.all(system.slacks(result.center)[live] >= result.inradius * norms[live] - 1e-6)
        assert np.all(result.center - system.box_lo >= result.inradius - 1e-6)
        assert np.all(system.box_hi - result.center >= result.inradius - 1e-6)

        inside = points[contains_batch(system, points, tol=0.0)]
        distances = np.minimum(inside - system.box_lo, system.box_hi - inside).min(axis=1)
        if live.any():
            facet = (inside @ system.W[live].T + system.b[live]) / norms[live]
            distances = np.minimum(distances, facet.min(axis=1))
        grid_radius = distances.max() if distances.size else 0.0
        assert result.inradius >= grid_radius - 1e-9
        assert result.inradius <= grid_radius + cell


def test_insphere_scale_invariance():
    system = random_system(6, seed=3)
    scaled = box_system(system.W * 7.5, system.b * 7.5)
    assert insphere(scaled).inradius == pytest.approx(insphere(system).inradius, abs=1e-8)


def test_redundant_domination():
    system = box_system([[1.0, 0.0], [1.0, 0.0]], [0.0, 1.0])
    reduced, verdicts = remove_redundant(system)
    assert [verdict.redundant for verdict in verdicts] == [False, True]
    assert verdicts[0].minimum < 0 and verdicts[1].minimum >= 0
    assert reduced.count == 1


def test_exact_duplicates_keep_one():
    system = box_system([[0.3, -1.0], [0.3, -1.0]], [0.2, 0.2])
    reduced, verdicts = remove_redundant(system)
    assert reduced.count == 1
    assert sum(verdict.redundant for verdict in verdicts) == 1


def test_reduction_preserves_membership():
    rng = np.random.default_rng(4)
    points = rng.uniform(-1, 1, size=(10000, 2))
    for seed in range(20):
        system = random_system(10, seed=seed)
        reduced, verdicts = remove_redundant(system)
        assert reduced.count <= system.count
        assert np.array_equal(contains_batch(system, points), contains_batch(reduced, points))
        for verdict in verdicts:
            assert verdict.redundant == (verdict.minimum >= 0)


def test_redundancy_verdicts_are_scale_invariant():
    system = random_system(8, seed=5)
    scales = np.random.default_rng(5).uniform(0.1, 10.0, size=8)
    scaled = box_system(system.W * scales[:, None], system.b * scales)
    _, verdicts = remove_redundant(system)
    _, scaled_verdicts = remove_redundant(scaled)
    assert [v.redundant for v in verdicts] == [v.redundant for v in scaled_verdicts]


def random_bounded_lp(rng, count):
    A = rng.normal(size=(count, 3))
    rhs = A @ rng.uniform(-0.5, 0.5, size=3) + rng.uniform(0.0, 1.0, size=count)
    return A, rhs, np.full(3, -1.0), np.full(3, 1.0)


def test_solver_choice_follows_bounds():
    A, rhs = np.ones((1, 2)), np.ones(1)
    assert isinstance(make_solver(LinearProgram([1.0, 0.0], A, rhs, [-1.0, -1.0], [1.0, 1.0])), BoundedDualSimplex)
    assert isinstance(make_solver(LinearProgram([1.0, 0.0], A, rhs, [-1.0, -1.0], None)), RevisedSimplex)
    with pytest.raises(ValueError):
        BoundedDualSimplex(LinearProgram([1.0, 0.0], A, rhs))


def test_bounded_dual_matches_standard_form():
    rng = np.random.default_rng(6)
    for _ in range(200):
        A, rhs, lo, hi = random_bounded_lp(rng, rng.integers(1, 30))
        objective = rng.normal(size=3)
        objective[rng.uniform(size=3) < 0.3] = 0.0
        lp = LinearProgram(objective, A, rhs, lo, hi)
        dual, primal = BoundedDualSimplex(lp).solve(), RevisedSimplex(lp).solve()
        assert dual.status is primal.status is LpStatus.OPTIMAL
        assert dual.objective_value == pytest.approx(primal.objective_value, abs=1e-8)
        assert np.all(A @ dual.y <= rhs + 1e-7 * np.maximum(1.0, np.linalg.norm(A, axis=1)))
        assert np.all(dual.y >= lo - 1e-9) and np.all(dual.y <= hi + 1e-9)


def test_bounded_dual_reports_infeasible_rows():
    lp = LinearProgram([1.0, 0.0], [[-1.0, 0.0], [1.0, 0.0]], [-0.5, 0.0], [-1.0, -1.0], [1.0, 1.0])
    assert BoundedDualSimplex(lp).solve().status is LpStatus.INFEASIBLE
    assert BoundedDualSimplex(lp).resolve([0.0, 1.0]).status is LpStatus.INFEASIBLE
    crossed = LinearProgram([1.0, 0.0], np.zeros((0, 2)), np.zeros(0), [1.0, 0.0], [0.0, 1.0])
    assert BoundedDualSimplex(crossed).solve().status is LpStatus.INFEASIBLE


def test_bounded_dual_warm_resolve_matches_fresh_solve():
    rng = np.random.default_rng(7)
    A, rhs, lo, hi = random_bounded_lp(rng, 40)
    solver = BoundedDualSimplex(LinearProgram([0.0, 0.0, 1.0], A, rhs, lo, hi))
    solver.solve()
    for _ in range(20):
        objective = rng.normal(size=3)
        warm = solver.resolve(objective)
        fresh = RevisedSimplex(LinearProgram(objective, A, rhs, lo, hi)).solve()
        assert warm.status is LpStatus.OPTIMAL
        assert warm.objective_value == pytest.approx(fresh.objective_value, abs=1e-8)


def test_insphere_on_an_mnist_sized_region_finishes_within_budget():
    model = random_network((1024, 1024, 1024), input_dim=784, class_count=10, seed=0)
    x_star = np.random.default_rng(0).uniform(-0.5, 0.5, size=784)
    system = extract_region(model, x_star)
    assert system.inequality_count == 4640

    start = time.perf_counter()
    result = insphere(system)
    assert time.perf_counter() - start < 120.0

    norms = np.linalg.norm(system.W, axis=1)
    facet_margin = system.slacks(result.center) - result.inradius * norms
    box_margin = np.minimum(result.center - system.box_lo, system.box_hi - result.center) - result.inradius
    assert facet_margin.min() >= -1e-6 and box_margin.min() >= -1e-6
    live = norms > 0
    ball_at_x_star = min(
        (system.slacks(x_star)[live] / norms[live]).min(),
        np.minimum(x_star - system.box_lo, system.box_hi - x_star).min(),
    )
    assert result.inradius >= ball_at_x_star - 1e-9
    # a largest ball touches the boundary
    assert min((facet_margin / np.maximum(1.0, norms)).min(), box_margin.min()) <= 1e-6


def test_retained_constraints_are_necessary_and_dropped_ones_implied():
    for seed in range(20):
        system = random_system(10, seed=seed)
        reduced, verdicts = remove_redundant(system)
        kept = [verdict.index for verdict in verdicts if not verdict.redundant]
        for verdict in verdicts:
            k = verdict.index
            others = [i for i in kept if i != k]
            lp = LinearProgram(-system.W[k], -system.W[others], system.b[others], system.box_lo, system.box_hi)
            solution = solve_lp(lp)
            assert solution.status is LpStatus.OPTIMAL
            minimum = system.W[k] @ solution.y + system.b[k]
            if verdict.redundant:
                assert minimum >= -1e-7
                continue
            # without constraint k the region would admit its minimizer
            assert minimum <= verdict.minimum + 1e-8 and verdict.minimum < 0
            assert contains(system.subset(others), solution.y, tol=1e-7)
            assert not contains(reduced, solution.y, tol=0.0)
