"""
Counter-based random substreams for DelayLab

Все случайные потоки выводятся из (master seed, ключ...) через SeedSequence
и генератор Philox, поэтому результат не зависит от порядка выполнения.
"""
from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]


def seed_sequence(seed: SeedLike, *key: int) -> np.random.SeedSequence:
    """
    Дочерняя последовательность для ключа (cell, trial, chunk, ...)

    Args:
        seed: Целое зерно или уже выведенная SeedSequence
        key: Компоненты ключа, дописываются к spawn_key

    Returns:
        np.random.SeedSequence: Независимая подпоследовательность
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key))
    if int(seed) < 0:
        raise ValueError(f"Seed must be non-negative, got {seed}")
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))


def substream(seed: SeedLike, *key: int) -> np.random.Generator:
    """Генератор Philox для подпотока (seed, key)"""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *key)))
