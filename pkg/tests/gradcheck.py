"""
有限差分梯度檢查工具 (float64 中心差分)
"""

import itertools

import numpy as np

SEEDS = range(20)
STEP = 1e-6


def numeric_grad(loss, target: np.ndarray, indices) -> np.ndarray:
    """對 target 的指定座標做中心差分"""
    grads = []
    for index in indices:
        original = target[index]
        target[index] = original + STEP
        plus = loss()
        target[index] = original - STEP
        minus = loss()
        target[index] = original
        grads.append((plus - minus) / (2 * STEP))
    return np.array(grads)


def sample_indices(rng: np.random.Generator, shape, count: int = 12):
    all_indices = list(itertools.product(*(range(s) for s in shape)))
    picks = rng.choice(len(all_indices), size=min(count, len(all_indices)), replace=False)
    return [all_indices[i] for i in picks]


def assert_grad_close(analytic: np.ndarray, numeric: np.ndarray, rtol: float = 1e-6) -> None:
    np.testing.assert_allclose(analytic, numeric, rtol=rtol, atol=1e-8)
