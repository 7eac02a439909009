"""Box-constrained smooth minimization with analytic gradients and multi-start.

The single-start routine wraps scipy's L-BFGS-B (limited-memory quasi-Newton
with gradient projection), which is the algorithm family required here. The
multi-start layer adds seeded start sampling and a deterministic reduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .exceptions import AllStartsFailed, ObjectiveNonFinite

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]

# Finite stand-in for +inf objective values: keeps the Fortran line search sane
# while still forcing a retreat.
_BIG = 1e25


@dataclass(frozen=True)
class BoxBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("bounds must be two vectors of equal length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("bounds must be finite")
        if not np.all(lower < upper):
            raise ValueError("each lower bound must be strictly below its upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def ndim(self) -> int:
        return self.lower.size

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)


@dataclass(frozen=True)
class MultiStartConfig:
    n_starts: int = 10
    max_iterations: int = 200
    gradient_tolerance: float = 1e-6
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient_tolerance must be positive")


@dataclass
class StartResult:
    start: np.ndarray
    x: np.ndarray
    value: float
    converged: bool
    failed: bool = False
    message: str = ""


def minimize_box(
    objective: Objective,
    bounds: BoxBounds,
    start: np.ndarray,
    max_iterations: int = 200,
    gradient_tolerance: float = 1e-6,
) -> tuple[np.ndarray, float, bool]:
    """Minimize a smooth objective over a box from a feasible start.

    Returns (argmin, value, converged). The returned value never exceeds the
    value at the start point. Raises ObjectiveNonFinite when the objective is
    not finite at the start itself.
    """
    start = bounds.clip(np.asarray(start, dtype=float))

    best: dict = {"x": None, "f": np.inf}

    def wrapped(x):
        value, grad = objective(x)
        grad = np.asarray(grad, dtype=float)
        if not np.isfinite(value):
            return _BIG, np.zeros_like(grad)
        if value < best["f"]:
            best["f"] = float(value)
            best["x"] = np.array(x)
        if not np.all(np.isfinite(grad)):
            grad = np.zeros_like(grad)
        return float(value), grad

    f0, _ = objective(start)
    if not np.isfinite(f0):
        raise ObjectiveNonFinite("objective is not finite at the start point")

    res = _scipy_minimize(
        wrapped,
        start,
        jac=True,
        method="L-BFGS-B",
        bounds=list(zip(bounds.lower, bounds.upper)),
        options={
            "maxiter": max_iterations,
            "gtol": gradient_tolerance,
            "ftol": 1e-14,
            "maxcor": 10,
        },
    )
    x, f = bounds.clip(res.x), float(res.fun)
    if best["x"] is not None and best["f"] < f:
        x, f = bounds.clip(best["x"]), best["f"]
    converged = bool(res.success) and np.isfinite(f)
    return x, f, converged


def sample_starts(bounds: BoxBounds, n: int, rng: np.random.Generator) -> np.ndarray:
    """Start points inside the box: log-uniform when all bounds are positive,
    uniform otherwise."""
    if np.all(bounds.lower > 0):
        lo, hi = np.log(bounds.lower), np.log(bounds.upper)
        return np.exp(rng.uniform(lo, hi, size=(n, bounds.ndim)))
    return rng.uniform(bounds.lower, bounds.upper, size=(n, bounds.ndim))


def multi_start_minimize(
    objective: Objective,
    bounds: BoxBounds,
    config: MultiStartConfig,
    extra_starts: Sequence[np.ndarray] = (),
) -> tuple[np.ndarray, float, list[StartResult]]:
    """Run minimize_box from seeded random starts plus any caller-provided ones.

    Deterministic for a fixed seed; the best value wins, ties broken by the
    lowest start index (extra starts come first).
    """
    rng = np.random.default_rng(config.rng_seed)
    starts = [np.asarray(s, dtype=float) for s in extra_starts]
    starts.extend(sample_starts(bounds, config.n_starts, rng))

    log: list[StartResult] = []
    best_idx = -1
    for i, start in enumerate(starts):
        try:
            x, f, conv = minimize_box(
                objective,
                bounds,
                start,
                max_iterations=config.max_iterations,
                gradient_tolerance=config.gradient_tolerance,
            )
        except ObjectiveNonFinite as exc:
            log.append(
                StartResult(start=start, x=start, value=np.inf, converged=False,
                            failed=True, message=str(exc))
            )
            continue
        log.append(StartResult(start=start, x=x, value=f, converged=conv))
        if best_idx < 0 or f < log[best_idx].value:
            best_idx = i
    if best_idx < 0:
        raise AllStartsFailed("every start point raised ObjectiveNonFinite")
    winner = log[best_idx]
    return winner.x, winner.value, log
