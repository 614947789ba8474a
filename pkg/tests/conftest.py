"""Shared fixtures and small grid factories used across the suite."""

import numpy as np
import pytest

from qpattern import BackgroundSpec, CellGrid, LinePatternSpec, generate_grid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_grid(n: int, m: int, rho: float, seed: int) -> CellGrid:
    """Bernoulli grid with no line pattern."""
    return generate_grid(2**n, 2**m, BackgroundSpec(rho=rho, seed=seed))


def exact_half_grid(n: int, m: int, seed: int) -> CellGrid:
    """Grid whose white count is exactly half the cells (not Bernoulli)."""
    size = 2 ** (n + m)
    cells = np.zeros(size, dtype=np.uint8)
    idx = np.random.default_rng(seed).permutation(size)[: size // 2]
    cells[idx] = 1
    return CellGrid(n=n, m=m, cells=cells)


def grating_grid(n: int, m: int, d: float, theta: float, seed: int = 0,
                 rho: float = 0.5, delta_rho: float = 0.5) -> CellGrid:
    """Full-array line pattern over a Bernoulli background."""
    return generate_grid(
        2**n, 2**m,
        BackgroundSpec(rho=rho, seed=seed),
        LinePatternSpec(d=d, theta=theta, region=(0, 0, 2**n, 2**m),
                        delta_rho=delta_rho),
    )
