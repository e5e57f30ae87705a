"""
Воспроизводимые потоки случайных чисел

Счётчиковый генератор Philox с ключом (seed, номер блока): шум пути
зависит только от (seed, индекс пути) и не зависит от числа воркеров.
"""
import logging
import zlib
from typing import Any, Iterator, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Размер блока путей фиксирован: от него зависит раскладка потоков
BLOCK_SIZE = 4096


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Генератор для блока путей [block·BLOCK_SIZE, (block+1)·BLOCK_SIZE)"""
    key = np.array([seed, block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def iter_blocks(n_paths: int, block_size: int = BLOCK_SIZE) -> Iterator[Tuple[int, int, int]]:
    """(номер блока, начало, конец) в фиксированном порядке"""
    for block, start in enumerate(range(0, n_paths, block_size)):
        yield block, start, min(start + block_size, n_paths)


def block_normals(seed: int, block: int, n_paths: int, n_steps: int, dim: int) -> np.ndarray:
    """
    Гауссовы приращения (n_paths, n_steps, dim) для блока.

    Всегда генерируется полный блок BLOCK_SIZE путей и берутся первые
    n_paths, поэтому префикс выборки не зависит от N.
    """
    gen = block_generator(seed, block)
    draws = gen.standard_normal((BLOCK_SIZE, n_steps, dim))
    return draws[:n_paths]


def tag_seed(seed: int, *tags: Any) -> int:
    """Детерминированный подсид по меткам (crc32 от repr)"""
    return zlib.crc32(repr((seed,) + tags).encode()) & 0xFFFFFFFF


def tagged_generator(seed: int, *tags: Any) -> np.random.Generator:
    return block_generator(seed, tag_seed(seed, *tags))
