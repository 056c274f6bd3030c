"""Small argument-checking helpers shared across modules."""
from __future__ import annotations

import math
from typing import Iterable

import numpy as np


def check_probability(value: float, name: str) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_fraction(value: float, name: str) -> float:
    return check_probability(value, name)


def check_positive_int(value: int, name: str, minimum: int = 1) -> int:
    if int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value}")
    return int(value)


def make_rng(seed) -> np.random.Generator:
    """Return a PCG64 generator; ``seed`` may be an int, SeedSequence or Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def check_node_set(nodes: Iterable[int], n: int, name: str = "action") -> frozenset[int]:
    out = frozenset(int(v) for v in nodes)
    for v in out:
        if not 0 <= v < n:
            raise ValueError(f"{name} contains node {v} outside [0, {n})")
    return out


def check_vector(x, n: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    return arr
