"""Dense float64 numeric primitives shared by every learning module.

Matrices are plain C-order ``numpy.ndarray`` of dtype float64; sequences are
(T, D) arrays, vectors are 1-D. All stochastic operations take an explicit
:class:`Rng`, never global state.
"""

from __future__ import annotations

from typing import Callable

import numpy as np


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit shape check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Elementwise logistic function, stable for arbitrarily large |x|.

    Uses exp(-|x|), which never overflows, and branches on the sign.
    """
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def tanh(x: np.ndarray) -> np.ndarray:
    """Elementwise hyperbolic tangent."""
    return np.tanh(np.asarray(x, dtype=np.float64))


def softmax(v: np.ndarray) -> np.ndarray:
    """Softmax of a vector (or of each row of a 2-D array), max-subtracted."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("softmax of empty input")
    shifted = v - v.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum-of-squares loss and its gradient w.r.t. ``pred``.

    loss = sum((pred - target)^2), gradient = 2 * (pred - target).
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"mse_loss shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    return float((diff * diff).sum()), 2.0 * diff


def finite_diff_grad(
    f: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of a scalar function, entry by entry.

    The universal oracle every analytic gradient in the package is checked
    against. O(2 * x.size) evaluations of ``f``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + eps
        f_plus = f(x)
        flat_x[i] = orig - eps
        f_minus = f(x)
        flat_x[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise ValueError(f"non-finite f evaluation at entry {i}")
        flat_g[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max relative error |a-n| / max(|a|, |n|, 1e-8) over all entries."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
    if a.size == 0:
        return 0.0
    return float((np.abs(a - n) / denom).max())


class Rng:
    """Deterministic random stream backed by numpy's PCG64 bit generator.

    Seeding goes through ``SeedSequence(seed, spawn_key=key)``, so the same
    64-bit seed yields the same draw sequence on every platform, and
    :meth:`child` derives independent streams keyed by small integers without
    shifting the parent stream. Normal deviates come from numpy's documented
    ziggurat transform.
    """

    def __init__(self, seed: int, _key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in _key)
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.key))
        )

    def child(self, *key: int) -> "Rng":
        """Independent stream for a sub-purpose (noise, init, tree #i, ...)."""
        return Rng(self.seed, self.key + tuple(int(k) for k in key))

    def normal(self, shape, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        return self._gen.normal(mean, std, size=shape)

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)

    def __repr__(self) -> str:  # pragma: no cover
        return f"Rng(seed={self.seed}, key={self.key})"


def gaussian(
    rng: Rng, rows: int, cols: int, mean: float = 0.0, std: float = 1.0
) -> np.ndarray:
    """(rows, cols) matrix of i.i.d. N(mean, std^2) draws from ``rng``."""
    if std < 0:
        raise ValueError("std must be >= 0")
    return rng.normal((rows, cols), mean, std)
