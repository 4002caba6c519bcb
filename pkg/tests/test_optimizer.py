import numpy as np
import pytest

from ontrack.core.exceptions import ConvergedError, ShapeError, SingularSystemError
from ontrack.core.optimizer import (
    GramProblem,
    LsqProblem,
    SupervisionPoint,
    closed_form_solve,
    gradient,
    loss,
    step_length,
    steepest_descent,
)
from ontrack.core.tensor_ops import LinearFilter
from tests.conftest import make_problem

SHAPE = (4, 2, 3, 3)


def scalar_problem(x, t, eta=0.0):
    point = SupervisionPoint(patch=np.full((1, 1, 1), x), target=[t])
    return LsqProblem.from_points([point], eta=eta)


def test_scalar_step_length_and_one_step_solution():
    x, t = 2.0, 3.0
    prob = scalar_problem(x, t)
    f0 = LinearFilter.zeros((1, 1, 1, 1))
    g = gradient(f0, prob)
    assert g.reshape(-1)[0] == pytest.approx(-2 * x * t)
    assert step_length(g, prob) == pytest.approx(1 / (2 * x ** 2))
    f1 = steepest_descent(f0, prob, 1)
    assert f1.weights.reshape(-1)[0] == pytest.approx(t / x)
    assert loss(f1, prob) == pytest.approx(0.0, abs=1e-24)


def test_gradient_matches_central_differences(rng):
    prob = make_problem(rng)
    f = rng.standard_normal(SHAPE)
    analytic = gradient(f, prob)
    h = 1e-6
    for index in [(0, 0, 0, 0), (1, 1, 2, 1), (3, 0, 1, 2), (2, 1, 0, 0)]:
        plus, minus = f.copy(), f.copy()
        plus[index] += h
        minus[index] -= h
        numeric = (loss(plus, prob) - loss(minus, prob)) / (2 * h)
        assert analytic[index] == pytest.approx(numeric, rel=1e-6, abs=1e-8)


def test_step_is_line_minimum(rng):
    prob = make_problem(rng)
    f = rng.standard_normal(SHAPE)
    g = gradient(f, prob)
    alpha = step_length(g, prob)
    best = loss(f - alpha * g, prob)
    assert best < loss(f, prob)
    assert best <= loss(f - 0.95 * alpha * g, prob)
    assert best <= loss(f - 1.05 * alpha * g, prob)


def test_descent_trace_is_monotone(rng):
    prob = make_problem(rng)
    trace = []
    steepest_descent(LinearFilter(rng.standard_normal(SHAPE)), prob, 10, trace=trace)
    assert len(trace) == 11
    assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))


def test_zero_iterations_returns_initial_filter(rng):
    prob = make_problem(rng)
    f0 = LinearFilter(rng.standard_normal(SHAPE))
    assert steepest_descent(f0, prob, 0) is f0
    with pytest.raises(ValueError):
        steepest_descent(f0, prob, -1)


def test_descent_converges_to_closed_form(rng):
    prob = make_problem(rng, points=200, eta=0.5)
    exact = closed_form_solve(prob)
    found = steepest_descent(LinearFilter.zeros(SHAPE), prob, 300)
    np.testing.assert_allclose(found.weights, exact.weights, atol=1e-8)
    assert np.max(np.abs(gradient(exact, prob))) < 1e-10


def test_descent_stops_at_stationary_point(rng):
    prob = make_problem(rng, eta=0.3)
    exact = closed_form_solve(prob)
    again = steepest_descent(exact, prob, 5)
    np.testing.assert_allclose(again.weights, exact.weights, atol=1e-10)


def test_gram_problem_matches_explicit_points(rng):
    prob = make_problem(rng)
    gram = prob.to_gram()
    f = rng.standard_normal(SHAPE)
    assert loss(f, gram) == pytest.approx(loss(f, prob), rel=1e-10)
    np.testing.assert_allclose(gradient(f, gram), gradient(f, prob), atol=1e-10)
    g = gradient(f, prob)
    assert step_length(g, gram) == pytest.approx(step_length(g, prob), rel=1e-10)


def test_gram_combine_sums_accumulators(rng):
    a, b = make_problem(rng).to_gram(), make_problem(rng).to_gram()
    combined = GramProblem.combine([a, b], eta=0.2)
    assert combined.total_weight == pytest.approx(a.total_weight + b.total_weight)
    assert combined.target_energy == pytest.approx(a.target_energy + b.target_energy)
    assert combined.eta == 0.2
    np.testing.assert_allclose(combined.gram, a.gram + b.gram)


def test_zero_gradient_raises_converged():
    prob = scalar_problem(1.0, 1.0)
    with pytest.raises(ConvergedError):
        step_length(np.zeros((1, 1, 1, 1)), prob)


def test_rank_deficient_without_regularization_raises():
    prob = LsqProblem(
        patches=np.array([[1.0, 1.0], [2.0, 2.0]]),
        targets=np.array([[1.0], [2.0]]),
        weights=np.ones(2),
        eta=0.0,
        filter_shape=(1, 2, 1, 1),
    )
    with pytest.raises(SingularSystemError):
        closed_form_solve(prob)


def test_too_many_unknowns_for_dense_solve(rng):
    shape = (4, 64, 7, 7)
    prob = LsqProblem(
        patches=rng.standard_normal((2, 64 * 49)),
        targets=rng.standard_normal((2, 4)),
        weights=np.ones(2),
        eta=0.1,
        filter_shape=shape,
    )
    with pytest.raises(ShapeError):
        closed_form_solve(prob)


def test_invalid_problems_raise(rng):
    with pytest.raises(ValueError):
        LsqProblem(np.ones((2, 1)), np.ones((2, 1)), np.array([1.0, -1.0]), 0.1, (1, 1, 1, 1))
    with pytest.raises(ShapeError):
        LsqProblem(np.ones((2, 3)), np.ones((2, 1)), np.ones(2), 0.1, (1, 1, 1, 1))
    with pytest.raises(ShapeError):
        loss(np.zeros((1, 1, 2, 2)), scalar_problem(1.0, 1.0))


def random_shape(rng):
    return (int(rng.integers(1, 5)), int(rng.integers(1, 17)), *([3, 3] if rng.random() < 0.5 else [1, 1]))


def test_gradient_matches_directional_differences_on_mixed_shapes(rng):
    h = 1e-4
    for _ in range(100):
        shape = random_shape(rng)
        prob = make_problem(rng, points=int(rng.integers(5, 60)), shape=shape, eta=float(rng.uniform(0.0, 1.0)))
        f = rng.standard_normal(shape)
        g = gradient(f, prob)
        for v in (g / np.linalg.norm(g), rng.standard_normal(shape)):
            numeric = (loss(f + h * v, prob) - loss(f - h * v, prob)) / (2 * h)
            analytic = float(np.sum(g * v))
            assert abs(numeric - analytic) <= 1e-5 * max(abs(analytic), np.linalg.norm(g))


def test_step_beats_a_line_grid(rng):
    for _ in range(10):
        shape = random_shape(rng)
        prob = make_problem(rng, shape=shape)
        f = rng.standard_normal(shape)
        g = gradient(f, prob)
        alpha = step_length(g, prob)
        best = loss(f - alpha * g, prob)
        for t in np.linspace(0.0, 2.0 * alpha, 101):
            assert best <= loss(f - t * g, prob) + 1e-12 * loss(f, prob)


def test_descent_is_monotone_on_many_instances(rng):
    for _ in range(1000):
        shape = random_shape(rng)
        prob = make_problem(rng, points=int(rng.integers(2, 20)), shape=shape, eta=float(rng.uniform(0.0, 1.0)))
        trace = []
        steepest_descent(LinearFilter(rng.standard_normal(shape)), prob, 5, trace=trace)
        assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))


def test_descent_reaches_the_closed_form_loss_with_light_regularization(rng):
    for _ in range(20):
        prob = make_problem(rng, points=200, eta=0.1)
        optimum = loss(closed_form_solve(prob), prob)
        found = steepest_descent(LinearFilter.zeros(SHAPE), prob, 200)
        assert (loss(found, prob) - optimum) / optimum < 1e-6
