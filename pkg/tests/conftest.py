from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def random_close_matrix(rng: np.random.Generator, n_symbols: int, minutes: int,
                        vol: float = 2e-3, base: float = 100.0) -> np.ndarray:
    """Positive geometric random-walk close rows for quick dataset tests."""
    steps = rng.normal(0.0, vol, size=(n_symbols, minutes))
    steps[:, 0] = rng.uniform(-0.5, 0.5, size=n_symbols)
    return base * np.exp(np.cumsum(steps, axis=1))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260808)
