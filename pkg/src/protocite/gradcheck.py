"""Central finite-difference checking of analytic gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np


def finite_diff_check(
    fn: Callable[[np.ndarray], float],
    params: np.ndarray,
    grad: np.ndarray,
    step: float = 1e-5,
    num_coords: int = 64,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks a seeded random coordinate subset (at least 64 coordinates,
    or all of them when the parameter vector is smaller). The relative
    error denominator is floored at 1e-12 so exact zero agreement scores
    zero instead of dividing by zero.
    """
    if step <= 0.0:
        raise ValueError(f"step must be positive, got {step}")
    params = np.asarray(params, dtype=np.float64).ravel()
    grad = np.asarray(grad, dtype=np.float64).ravel()
    if params.shape != grad.shape:
        raise ValueError("params and grad must have the same size")
    size = params.size
    if size <= num_coords:
        coords = np.arange(size)
    else:
        coords = np.random.default_rng(seed).choice(size, size=num_coords, replace=False)

    worst = 0.0
    for c in coords:
        probe = params.copy()
        probe[c] = params[c] + step
        f_plus = float(fn(probe))
        probe[c] = params[c] - step
        f_minus = float(fn(probe))
        fd = (f_plus - f_minus) / (2.0 * step)
        denom = max(abs(fd), abs(grad[c]), 1e-12)
        worst = max(worst, abs(fd - grad[c]) / denom)
    return worst


def check_gradient_blocks(
    blocks: dict[str, tuple[np.ndarray, np.ndarray, Callable[[np.ndarray], float]]],
    step: float = 1e-5,
    num_coords: int = 64,
    seed: int = 0,
) -> dict[str, float]:
    """Run finite_diff_check per named block; returns max error per block.

    Each block maps name -> (params, analytic_grad, loss_of_params).
    """
    return {
        name: finite_diff_check(fn, params, grad, step=step, num_coords=num_coords, seed=seed)
        for name, (params, grad, fn) in blocks.items()
    }
