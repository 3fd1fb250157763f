#!/usr/bin/env python3
"""
測試張量核心運算與可重現亂數來源
"""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.errors import ArgumentError, DimensionError
from src.tensor import core
from src.tensor.core import DType
from src.tensor.random import RandomSource


def test_matmul_values_and_inner_mismatch():
    """矩陣乘法與內部維度檢查"""
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([[5.0], [6.0]])
    np.testing.assert_array_equal(core.matmul(a, b), [[17.0], [39.0]])

    with pytest.raises(DimensionError, match=r"\(2, 2\).*\(3, 1\)"):
        core.matmul(a, np.ones((3, 1)))


def test_elementwise_ops_reject_broadcasting():
    """逐元素運算不做 broadcasting"""
    a = core.ones((2, 3))
    with pytest.raises(DimensionError):
        core.add(a, core.ones((3,)))
    with pytest.raises(DimensionError):
        core.sub(a, core.ones((3, 2)))
    with pytest.raises(DimensionError):
        core.multiply(a, core.ones((1, 3)))
    np.testing.assert_array_equal(core.multiply(a, core.scale(a, 2.0)), np.full((2, 3), 2.0))


def test_zeros_ones_shapes():
    assert core.zeros((2, 3)).shape == (2, 3)
    assert core.ones(4, DType.FLOAT64).dtype == np.float64
    with pytest.raises(DimensionError):
        core.zeros((2, 0))


def test_reshape_kernel_flattening_order():
    """[d_out, d_in, k, k, k] → [d_out, d_in·k³] 的索引對應"""
    k = 2
    w = np.arange(2 * 3 * k ** 3, dtype=np.float64).reshape(2, 3, k, k, k)
    flat = core.reshape(w, (2, 3 * k ** 3))
    for o, i, a, b, c in [(0, 0, 0, 0, 0), (1, 2, 1, 0, 1), (0, 1, 1, 1, 0), (1, 0, 0, 1, 1)]:
        assert flat[o, i * k ** 3 + a * k ** 2 + b * k + c] == w[o, i, a, b, c]

    with pytest.raises(DimensionError):
        core.reshape(w, (5, 5))


@given(st.lists(st.integers(min_value=1, max_value=4), min_size=1, max_size=4))
def test_reshape_roundtrip_preserves_elements(dims):
    """任意形狀攤平再還原，元素與順序不變"""
    t = np.arange(int(np.prod(dims)), dtype=np.float32).reshape(dims)
    flat = core.reshape(t, (t.size,))
    np.testing.assert_array_equal(core.reshape(flat, dims), t)


def test_sum_and_mean():
    t = np.array([[1.0, 2.0], [3.0, 6.0]], dtype=np.float32)
    assert core.tensor_sum(t) == 12.0
    assert core.tensor_mean(t) == 3.0


def test_gaussian_fill_validation_and_determinism():
    """負標準差報錯；相同 seed 產生相同張量"""
    t = core.zeros((3, 4))
    with pytest.raises(ArgumentError):
        core.gaussian_fill(t, RandomSource(0), std=-1.0)

    first = core.gaussian_fill(t, RandomSource(5), mean=1.0, std=2.0)
    second = core.gaussian_fill(t, RandomSource(5), mean=1.0, std=2.0)
    np.testing.assert_array_equal(first, second)
    assert first.dtype == np.float32

    constant = core.gaussian_fill(t, RandomSource(5), mean=3.0, std=0.0)
    np.testing.assert_array_equal(constant, np.full((3, 4), 3.0))


@pytest.mark.parametrize("seed", [0, 1, 2023])
def test_gaussian_fill_sample_statistics(seed):
    """10⁵ 個樣本的平均與標準差落在 ±0.02 內"""
    samples = core.gaussian_fill(core.zeros((100_000,), DType.FLOAT64), RandomSource(seed))
    assert abs(samples.mean()) <= 0.02
    assert abs(samples.std() - 1.0) <= 0.02


def test_box_muller_uses_both_outputs():
    """高斯樣本由成對均勻亂數產生，兩個輸出都使用"""
    samples = RandomSource(42).gaussian(4)
    u = RandomSource(42).uniform(4)
    for pair in range(2):
        u1, u2 = u[2 * pair], u[2 * pair + 1]
        radius = np.sqrt(-2.0 * np.log(1.0 - u1))
        assert samples[2 * pair] == pytest.approx(radius * np.cos(2 * np.pi * u2), rel=1e-9)
        assert samples[2 * pair + 1] == pytest.approx(radius * np.sin(2 * np.pi * u2), rel=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3, 7])
def test_gaussian_consumes_even_number_of_uniforms(n):
    """n 個樣本固定消耗 2·ceil(n/2) 個均勻亂數"""
    rng = RandomSource(9)
    rng.gaussian(n)
    reference = RandomSource(9)
    reference.uniform(2 * ((n + 1) // 2))
    np.testing.assert_array_equal(rng.uniform(5), reference.uniform(5))


def test_random_source_seed_range_and_permutation():
    with pytest.raises(ArgumentError):
        RandomSource(-1)
    with pytest.raises(ArgumentError):
        RandomSource(2 ** 64)

    perm = RandomSource(3).permutation(20)
    assert sorted(perm.tolist()) == list(range(20))
    np.testing.assert_array_equal(perm, RandomSource(3).permutation(20))
    assert RandomSource(3).spawn(2).seed == 5


def test_dtype_codes():
    """dtype code 與檔案格式共用"""
    assert DType.FLOAT32.code == 0
    assert DType.FLOAT64.code == 1
    assert DType.from_code(1) is DType.FLOAT64
    assert DType.from_numpy(np.dtype(np.float32)) is DType.FLOAT32
    with pytest.raises(ArgumentError):
        DType.from_code(7)
    with pytest.raises(ArgumentError):
        DType.from_numpy(np.dtype(np.int16))
