"""Numerical self-checks of the optimizer, the box geometry and model fusion.

Each suite compares an operation against an independent oracle (finite
differences, a golden-section line search, a dense solve) on seeded random
problems and reports a :class:`CheckResult`.
"""
import time
from typing import Callable, List

import numpy as np
from scipy.optimize import minimize_scalar

from ontrack.core.geometry import decode_box, encode_targets, nearest_grid
from ontrack.core.optimizer import LsqProblem, closed_form_solve, gradient, loss, step_length, steepest_descent
from ontrack.core.tensor_ops import LinearFilter
from ontrack.logging_config import get_logger
from ontrack.models.boxes import BBox
from ontrack.models.configs import RmgConfig
from ontrack.models.reports import CheckResult
from ontrack.services.rmg import fuse

logger = get_logger(__name__)

SHAPE = (4, 2, 3, 3)


def random_problem(rng: np.random.Generator, points: int = 60, eta: float = 0.1, shape=SHAPE) -> LsqProblem:
    d = shape[1] * shape[2] * shape[3]
    return LsqProblem(
        patches=rng.standard_normal((points, d)),
        targets=rng.standard_normal((points, shape[0])),
        weights=rng.uniform(0.5, 1.5, size=points),
        eta=eta,
        filter_shape=shape,
    )


def random_filter(rng: np.random.Generator, shape=SHAPE) -> LinearFilter:
    return LinearFilter(rng.standard_normal(shape))


def check_gradient(rng: np.random.Generator) -> str:
    """Central differences on every filter coordinate."""
    prob = random_problem(rng)
    f = random_filter(rng)
    analytic = gradient(f, prob)
    numeric = np.zeros(SHAPE)
    h = 1e-6
    for index in np.ndindex(*SHAPE):
        plus, minus = f.weights.copy(), f.weights.copy()
        plus[index] += h
        minus[index] -= h
        numeric[index] = (loss(plus, prob) - loss(minus, prob)) / (2 * h)
    error = float(np.max(np.abs(analytic - numeric)) / max(np.max(np.abs(analytic)), 1e-12))
    assert error < 1e-6, f"relative gradient error {error:.3g}"
    return f"relative error {error:.3g}"


def check_line_minimality(rng: np.random.Generator) -> str:
    """The exact step matches a golden-section minimization along the gradient."""
    prob = random_problem(rng)
    f = random_filter(rng)
    g = gradient(f, prob)
    alpha = step_length(g, prob)
    result = minimize_scalar(
        lambda t: loss(f.weights - t * g, prob),
        bracket=(0.0, alpha, 3.0 * alpha),
        method="golden",
        tol=1e-10,
    )
    gap = abs(result.x - alpha) / alpha
    assert gap < 1e-4, f"step {alpha:.6g} vs line search {result.x:.6g}"
    best = loss(f.weights - alpha * g, prob)
    for factor in (0.99, 1.01):
        assert best <= loss(f.weights - factor * alpha * g, prob), "step is not a line minimum"
    return f"alpha {alpha:.6g}, relative gap {gap:.2g}"


def check_monotone_descent(rng: np.random.Generator) -> str:
    prob = random_problem(rng)
    trace: List[float] = []
    steepest_descent(random_filter(rng), prob, 25, trace=trace)
    increases = [b - a for a, b in zip(trace, trace[1:]) if b > a + 1e-12 * abs(a)]
    assert not increases, f"loss increased {len(increases)} times"
    return f"loss {trace[0]:.4g} -> {trace[-1]:.4g} in {len(trace) - 1} steps"


def check_convergence(rng: np.random.Generator) -> str:
    """Many descent steps reach the dense normal-equations solution."""
    prob = random_problem(rng, points=200, eta=0.5)
    exact = closed_form_solve(prob)
    found = steepest_descent(LinearFilter.zeros(SHAPE), prob, 500)
    distance = float(np.linalg.norm(found.weights - exact.weights) / np.linalg.norm(exact.weights))
    assert distance < 1e-6, f"relative distance to the dense solution {distance:.3g}"
    return f"relative distance {distance:.3g}"


def check_geometry(rng: np.random.Generator) -> str:
    """Encoding a box and decoding it at any cell gives the box back."""
    worst = 0.0
    grid, stride = 18, 4.0
    for _ in range(20):
        w, h = rng.uniform(8.0, 40.0, size=2)
        cx, cy = rng.uniform(20.0, 52.0, size=2)
        box = BBox.from_center(cx, cy, w, h)
        offsets = encode_targets(box, grid, grid, stride)
        cells = [nearest_grid(box.center, stride, grid, grid), (0, 0), (grid - 1, grid - 1)]
        for cell in cells:
            decoded = decode_box(offsets.at(cell), cell, stride)
            worst = max(worst, float(np.max(np.abs(np.subtract(decoded.to_xywh(), box.to_xywh())))))
    assert worst < 1e-9, f"round trip error {worst:.3g}"
    return f"max round trip error {worst:.3g}"


def check_fusion(rng: np.random.Generator) -> str:
    """lambda = 0 keeps the static model, lambda = 1 takes the online one on the updated half."""
    on, st = random_filter(rng), random_filter(rng)
    half = SHAPE[1] // 2
    for half_update in (True, False):
        low = fuse(on, st, RmgConfig(lambda_reg=0.0, half_update=half_update))
        high = fuse(on, st, RmgConfig(lambda_reg=1.0, half_update=half_update))
        assert np.array_equal(low.weights, st.weights), "lambda 0 differs from the static model"
        span = slice(0, half) if half_update else slice(None)
        assert np.array_equal(high.weights[:, span], on.weights[:, span]), "lambda 1 differs from the online model"
        if half_update:
            assert np.array_equal(high.weights[:, half:], st.weights[:, half:]), "frozen half was updated"
    same = fuse(on, on, RmgConfig(lambda_reg=0.3))
    assert np.array_equal(same.weights, on.weights), "fusing a model with itself changed it"
    return "endpoints exact"


SUITES: List[tuple] = [
    ("gradient", check_gradient),
    ("line_minimality", check_line_minimality),
    ("monotone_descent", check_monotone_descent),
    ("convergence", check_convergence),
    ("geometry", check_geometry),
    ("fusion", check_fusion),
]


def run_check(name: str, check: Callable[[np.random.Generator], str], seed: int = 0) -> CheckResult:
    start = time.perf_counter()
    try:
        detail = check(np.random.default_rng(seed))
        passed = True
    except AssertionError as e:
        detail, passed = str(e), False
    except Exception as e:
        detail, passed = f"{type(e).__name__}: {e}", False
    result = CheckResult(name=name, passed=passed, detail=detail, elapsed_s=time.perf_counter() - start)
    if passed:
        logger.info(f"[Selftest] {name}: ok ({detail})")
    else:
        logger.error(f"[Selftest] {name}: FAILED ({detail})")
    return result


def run_selftest(seed: int = 0) -> List[CheckResult]:
    return [run_check(name, check, seed) for name, check in SUITES]
