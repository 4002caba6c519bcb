"""Regularized least-squares filter fitting.

Both problem types minimize

    L(f) = (1/N) * sum_p w_p * ||t_p - apply(x_p, f)||^2 + eta^2 * ||f||^2

with ``N = sum_p w_p``. :class:`LsqProblem` keeps the supervision points and
evaluates residuals directly; :class:`GramProblem` keeps only the
accumulated normal equations, which is what the classification branch needs
when every grid position of every sample is a supervision point.

Filters are handled internally as (D, C_out) matrices, D = C_in*k_h*k_w, in
the column order of :meth:`LinearFilter.matrix`.
"""
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ontrack.core.exceptions import ConvergedError, ShapeError, SingularSystemError
from ontrack.core.tensor_ops import LinearFilter
from ontrack.logging_config import get_logger

logger = get_logger(__name__)

# Gradient norm below which steepest descent stops
GRAD_TOL = 1e-12
# Largest unknown count closed_form_solve accepts
MAX_DENSE_UNKNOWNS = 10_000

FilterShape = Tuple[int, int, int, int]


@dataclass(frozen=True)
class SupervisionPoint:
    """One (patch, target, weight) triple."""

    patch: np.ndarray
    target: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        patch = np.array(self.patch, dtype=np.float64)
        target = np.atleast_1d(np.array(self.target, dtype=np.float64))
        if patch.ndim != 3:
            raise ShapeError(f"patch must be (C_in, k, k), got shape {patch.shape}")
        if target.ndim != 1:
            raise ShapeError(f"target must be a vector, got shape {target.shape}")
        if not (np.all(np.isfinite(patch)) and np.all(np.isfinite(target)) and np.isfinite(self.weight)):
            raise ValueError("supervision point contains non-finite values")
        if self.weight < 0:
            raise ValueError(f"weight must be non-negative, got {self.weight}")
        patch.setflags(write=False)
        target.setflags(write=False)
        object.__setattr__(self, "patch", patch)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "weight", float(self.weight))


def _check_weights(weights: np.ndarray) -> float:
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ValueError("weights must be finite and non-negative")
    total = float(weights.sum())
    if total <= 0:
        raise ValueError("total supervision weight must be positive")
    return total


@dataclass(frozen=True)
class LsqProblem:
    """Explicit supervision: patches (n, D), targets (n, C_out), weights (n,)."""

    patches: np.ndarray
    targets: np.ndarray
    weights: np.ndarray
    eta: float
    filter_shape: FilterShape

    def __post_init__(self):
        patches = np.array(self.patches, dtype=np.float64)
        targets = np.array(self.targets, dtype=np.float64)
        weights = np.array(self.weights, dtype=np.float64)
        shape = tuple(int(v) for v in self.filter_shape)
        if patches.ndim != 2 or patches.shape[0] == 0:
            raise ShapeError("problem needs at least one supervision point")
        if len(shape) != 4 or patches.shape[1] != shape[1] * shape[2] * shape[3]:
            raise ShapeError(f"patch length {patches.shape[1]} does not match filter shape {shape}")
        if targets.shape != (patches.shape[0], shape[0]) or weights.shape != (patches.shape[0],):
            raise ShapeError(
                f"targets {targets.shape} / weights {weights.shape} do not match "
                f"{patches.shape[0]} points with {shape[0]} outputs"
            )
        if self.eta < 0:
            raise ValueError(f"eta must be non-negative, got {self.eta}")
        _check_weights(weights)
        for arr in (patches, targets, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "patches", patches)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "filter_shape", shape)
        object.__setattr__(self, "eta", float(self.eta))

    @classmethod
    def from_points(
        cls,
        points: Sequence[SupervisionPoint],
        eta: float,
        filter_shape: Optional[FilterShape] = None,
    ) -> "LsqProblem":
        """Build from supervision points; the filter shape defaults to (len(target), *patch.shape)."""
        points = list(points)
        if not points:
            raise ShapeError("problem needs at least one supervision point")
        first = points[0]
        shape = filter_shape or (first.target.shape[0],) + first.patch.shape
        if any(p.patch.shape != first.patch.shape or p.target.shape != first.target.shape for p in points):
            raise ShapeError("all supervision points must share patch and target shapes")
        return cls(
            patches=np.stack([p.patch.reshape(-1) for p in points]),
            targets=np.stack([p.target for p in points]),
            weights=np.array([p.weight for p in points]),
            eta=eta,
            filter_shape=shape,
        )

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def data_loss(self, F: np.ndarray) -> float:
        """sum_p w_p ||t_p - x_p F||^2."""
        r = self.targets - self.patches @ F
        return float(np.sum(self.weights[:, None] * r * r))

    def data_descent(self, F: np.ndarray) -> np.ndarray:
        """sum_p w_p x_p^T (t_p - x_p F), shape (D, C_out)."""
        r = self.targets - self.patches @ F
        return self.patches.T @ (self.weights[:, None] * r)

    def data_curvature(self, G: np.ndarray) -> float:
        """sum_p w_p ||x_p G||^2."""
        q = self.patches @ G
        return float(np.sum(self.weights[:, None] * q * q))

    def normal_equations(self) -> Tuple[np.ndarray, np.ndarray]:
        wp = self.weights[:, None] * self.patches
        return self.patches.T @ wp, wp.T @ self.targets

    def to_gram(self) -> "GramProblem":
        gram, cross = self.normal_equations()
        energy = float(np.sum(self.weights[:, None] * self.targets ** 2))
        return GramProblem(
            gram=gram,
            cross=cross,
            target_energy=energy,
            total_weight=self.total_weight,
            eta=self.eta,
            filter_shape=self.filter_shape,
        )


@dataclass(frozen=True)
class GramProblem:
    """Accumulated normal equations: G = sum w x^T x, B = sum w x^T t, c = sum w ||t||^2, N = sum w."""

    gram: np.ndarray
    cross: np.ndarray
    target_energy: float
    total_weight: float
    eta: float
    filter_shape: FilterShape

    def __post_init__(self):
        shape = tuple(int(v) for v in self.filter_shape)
        d = shape[1] * shape[2] * shape[3]
        gram = np.array(self.gram, dtype=np.float64)
        cross = np.array(self.cross, dtype=np.float64)
        if gram.shape != (d, d) or cross.shape != (d, shape[0]):
            raise ShapeError(f"gram {gram.shape} / cross {cross.shape} do not match filter shape {shape}")
        if self.total_weight <= 0:
            raise ValueError("total supervision weight must be positive")
        if self.eta < 0:
            raise ValueError(f"eta must be non-negative, got {self.eta}")
        gram.setflags(write=False)
        cross.setflags(write=False)
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "cross", cross)
        object.__setattr__(self, "filter_shape", shape)
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "target_energy", float(self.target_energy))
        object.__setattr__(self, "total_weight", float(self.total_weight))

    @classmethod
    def combine(cls, problems: Iterable["GramProblem"], eta: Optional[float] = None) -> "GramProblem":
        """Sum of accumulated problems; ``eta`` defaults to the first problem's."""
        problems = list(problems)
        if not problems:
            raise ShapeError("nothing to combine")
        shape = problems[0].filter_shape
        if any(p.filter_shape != shape for p in problems):
            raise ShapeError("cannot combine problems with different filter shapes")
        return cls(
            gram=sum(p.gram for p in problems),
            cross=sum(p.cross for p in problems),
            target_energy=sum(p.target_energy for p in problems),
            total_weight=sum(p.total_weight for p in problems),
            eta=problems[0].eta if eta is None else eta,
            filter_shape=shape,
        )

    def data_loss(self, F: np.ndarray) -> float:
        value = self.target_energy - 2.0 * np.sum(F * self.cross) + np.sum(F * (self.gram @ F))
        return float(max(value, 0.0))

    def data_descent(self, F: np.ndarray) -> np.ndarray:
        return self.cross - self.gram @ F

    def data_curvature(self, G: np.ndarray) -> float:
        return float(np.sum(G * (self.gram @ G)))

    def normal_equations(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.gram, self.cross

    def to_gram(self) -> "GramProblem":
        return self


Problem = Union[LsqProblem, GramProblem]
FilterLike = Union[LinearFilter, np.ndarray]


def _as_matrix(f: FilterLike, prob: Problem) -> np.ndarray:
    weights = f.weights if isinstance(f, LinearFilter) else np.asarray(f, dtype=np.float64)
    if weights.shape != prob.filter_shape:
        raise ShapeError(f"filter shape {weights.shape} does not match problem shape {prob.filter_shape}")
    return weights.reshape(prob.filter_shape[0], -1).T


def _from_matrix(F: np.ndarray, shape: FilterShape) -> np.ndarray:
    return np.ascontiguousarray(F.T).reshape(shape)


def loss(f: FilterLike, prob: Problem) -> float:
    """Weighted mean squared residual plus eta^2 ||f||^2."""
    F = _as_matrix(f, prob)
    return prob.data_loss(F) / prob.total_weight + prob.eta ** 2 * float(np.sum(F * F))


def gradient(f: FilterLike, prob: Problem) -> np.ndarray:
    """Exact gradient of :func:`loss`, in filter shape.

    ``-(2/N) sum_p w_p x_p^T (t_p - x_p f) + 2 eta^2 f``
    """
    F = _as_matrix(f, prob)
    G = -2.0 / prob.total_weight * prob.data_descent(F) + 2.0 * prob.eta ** 2 * F
    return _from_matrix(G, prob.filter_shape)


def step_length(g: FilterLike, prob: Problem) -> float:
    """Exact minimizer of t -> loss(f - t g) for the quadratic loss.

    ``alpha = ||g||^2 / (g^T H g)`` with
    ``g^T H g = 2 [(1/N) sum_p w_p ||x_p g||^2 + eta^2 ||g||^2]``.
    Raises :class:`ConvergedError` for a zero gradient.
    """
    G = _as_matrix(g, prob)
    gg = float(np.sum(G * G))
    if gg == 0.0:
        raise ConvergedError("zero gradient")
    curvature = 2.0 * (prob.data_curvature(G) / prob.total_weight + prob.eta ** 2 * gg)
    if curvature <= 0.0:
        raise ConvergedError("no curvature along the gradient")
    return gg / curvature


def steepest_descent(
    f0: LinearFilter,
    prob: Problem,
    iters: int,
    trace: Optional[List[float]] = None,
) -> LinearFilter:
    """``iters`` steps of f <- f - alpha * grad L(f) with the exact step length.

    Stops early once the gradient norm drops below 1e-12. When ``trace`` is
    given, the initial loss and the loss after every step are appended to it.
    """
    if iters < 0:
        raise ValueError(f"iters must be non-negative, got {iters}")
    if trace is not None:
        trace.append(loss(f0, prob))
    else:
        _as_matrix(f0, prob)
    if iters == 0:
        return f0

    shape = prob.filter_shape
    weights = f0.weights
    done = 0
    for done in range(1, iters + 1):
        g = gradient(weights, prob)
        if float(np.linalg.norm(g)) < GRAD_TOL:
            logger.debug(f"[Optimizer] Converged after {done - 1} iterations")
            break
        try:
            alpha = step_length(g, prob)
        except ConvergedError:
            break
        weights = weights - alpha * g
        if trace is not None:
            trace.append(loss(weights, prob))
    logger.debug(f"[Optimizer] {done} steps on filter {shape}, final loss {loss(weights, prob):.6g}")
    return LinearFilter(weights)


def closed_form_solve(prob: Problem) -> LinearFilter:
    """Unique minimizer via the dense normal equations (G + N eta^2 I) f = B."""
    c_out, c_in, kh, kw = prob.filter_shape
    d = c_in * kh * kw
    if d * c_out > MAX_DENSE_UNKNOWNS:
        raise ShapeError(f"{d * c_out} unknowns exceed the dense solver limit {MAX_DENSE_UNKNOWNS}")
    gram, cross = prob.normal_equations()
    system = gram + prob.total_weight * prob.eta ** 2 * np.eye(d)
    if prob.eta == 0.0 and np.linalg.matrix_rank(system) < d:
        raise SingularSystemError(f"normal equations of rank < {d} with eta = 0")
    try:
        F = np.linalg.solve(system, cross)
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(str(e)) from e
    return LinearFilter(_from_matrix(F, prob.filter_shape))
