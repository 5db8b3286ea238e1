"""Dense numerical kernel: deterministic matrix product, activation,
weight initialization, seeded RNG construction, and a finite-difference
gradient oracle used to validate analytic gradients.

All public operations work on 64-bit float arrays ("matrices" are 2-D,
C-contiguous, row-major) and are bit-reproducible: the matrix product
accumulates over the shared dimension in ascending order, so repeated
runs and independent reimplementations with the same summation order
agree exactly.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NumericError


def make_rng(seed) -> np.random.Generator:
    """Create the run-owned PCG64 generator for ``seed``.

    Every stochastic entry point takes either a seed or a generator
    produced here. One generator is created per run and threaded through
    the pipeline stages in order; it must not be shared across threads.
    """
    return np.random.default_rng(seed)


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce ``x`` to a 2-D float64 C-order array, validating rank."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with a fixed summation order.

    Each output entry accumulates ``a[i, k] * b[k, j]`` for ascending k,
    exactly matching a naive triple loop, so results are bit-identical
    across runs and to the elementwise oracle. BLAS-backed products do
    not guarantee this ordering and are deliberately not used.
    """
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"matmul shape mismatch: {a.shape[0]}x{a.shape[1]} @ "
            f"{b.shape[0]}x{b.shape[1]}"
        )
    out = np.zeros((a.shape[0], b.shape[1]))
    tmp = np.empty_like(out)
    for k in range(a.shape[1]):
        np.multiply(a[:, k, None], b[None, k, :], out=tmp)
        out += tmp
    return out


def relu(x) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    """Weight matrix with entries i.i.d. uniform on [-L, L],
    L = sqrt(6 / (fan_in + fan_out)).
    """
    if fan_in < 1 or fan_out < 1:
        raise ValueError(f"fan_in and fan_out must be >= 1, got ({fan_in}, {fan_out})")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def finite_diff_grad(
    f: Callable[[np.ndarray], float], theta, h: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector.

    Returns ``(f(theta + h*e_i) - f(theta - h*e_i)) / (2h)`` per
    coordinate. Used as the independent oracle against analytic
    gradients; never used in training itself.
    """
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    theta = np.asarray(theta, dtype=np.float64).ravel()
    grad = np.empty_like(theta)
    probe = theta.copy()
    for i in range(theta.size):
        probe[i] = theta[i] + h
        up = float(f(probe))
        probe[i] = theta[i] - h
        down = float(f(probe))
        probe[i] = theta[i]
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NumericError(
                f"non-finite function value while probing coordinate {i}"
            )
        grad[i] = (up - down) / (2.0 * h)
    return grad
