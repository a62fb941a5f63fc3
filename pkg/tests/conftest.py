from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from maist import PlantSpec, TabuadaSigma, build_system
from maist.config import load

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

A = [[0.0, 1.0], [-2.0, 3.0]]
B = [[0.0], [1.0]]
K = [[0.0, -5.0]]
H = 0.05
KBAR = 20


@lru_cache(maxsize=None)
def plant_system(sigma: float):
    spec = PlantSpec(A=A, B=B, K=K, trigger=TabuadaSigma(sigma), h=H, kbar=KBAR)
    return build_system(spec, name=f"sigma={sigma}")


@lru_cache(maxsize=None)
def fixture_system(name: str):
    return load(CONFIGS / f"{name}.yaml").systems[0][1]


@pytest.fixture
def sys05():
    return plant_system(0.5)


@pytest.fixture
def fig2():
    return fixture_system("fig2")


@pytest.fixture
def rotation():
    return fixture_system("rotation")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def unit_vectors(rng, count, dim=2):
    x = rng.standard_normal((count, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
