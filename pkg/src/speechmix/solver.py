"""Fixed-step explicit midpoint ODE integration on t in [0, 1].

Mirrors flow-matching inference numerics: a fixed number of uniform steps
(default 15) and optional averaging over several runs.  The time interval
is fixed to [0, 1] by convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

DEFAULT_STEPS = 15
DEFAULT_RUNS = 10


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class OdeProblem:
    dimension: int
    vector_field: Callable[[float, np.ndarray], np.ndarray]
    y0: np.ndarray
    n_steps: int = DEFAULT_STEPS

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise SolverError(f"dimension must be positive, got {self.dimension}")
        if self.n_steps < 1:
            raise SolverError(f"n_steps must be positive, got {self.n_steps}")
        y0 = np.asarray(self.y0, dtype=np.float64)
        if y0.shape != (self.dimension,):
            raise SolverError(f"y0 shape {y0.shape} does not match dimension {self.dimension}")
        object.__setattr__(self, "y0", y0)


def _eval_field(problem: OdeProblem, t: float, y: np.ndarray, step: int) -> np.ndarray:
    out = np.asarray(problem.vector_field(t, y), dtype=np.float64)
    if out.shape != (problem.dimension,):
        raise SolverError(
            f"vector field returned shape {out.shape}, expected ({problem.dimension},) at step {step}"
        )
    return out


def integrate_midpoint(problem: OdeProblem) -> np.ndarray:
    """State at t=1 via the explicit midpoint method (second order).

    y <- y + h * f(t + h/2, y + (h/2) * f(t, y)), with h = 1 / n_steps.
    """
    h = 1.0 / problem.n_steps
    y = problem.y0.copy()
    for step in range(problem.n_steps):
        t = step * h
        k1 = _eval_field(problem, t, y, step)
        k2 = _eval_field(problem, t + h / 2.0, y + (h / 2.0) * k1, step)
        y = y + h * k2
        if not np.all(np.isfinite(y)):
            raise SolverError(f"non-finite state after step {step}")
    return y


def average_runs(problems: Sequence[OdeProblem], k: int = DEFAULT_RUNS) -> np.ndarray:
    """Componentwise mean of ``integrate_midpoint`` over k problems.

    The problems are expected to differ only in their (stochastic) initial
    conditions, which the caller supplies.
    """
    if len(problems) != k:
        raise SolverError(f"expected {k} problems, got {len(problems)}")
    dims = {p.dimension for p in problems}
    if len(dims) != 1:
        raise SolverError(f"problems must share one dimension, got {sorted(dims)}")
    results = np.stack([integrate_midpoint(p) for p in problems])
    return results.mean(axis=0)
