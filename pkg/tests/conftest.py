"""
Общие фикстуры тестов
"""
from fractions import Fraction

import pytest

from core.pathspace import Path, PathKind, TimeGrid
from core.settings import reset_settings


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: долгие проверки на деревьях глубины 3")


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch, tmp_path):
    """Каждый тест видит настройки из чистого окружения, вывод - во временный каталог"""
    monkeypatch.setenv("TCDPP_OUTPUT_DIR", str(tmp_path / "results"))
    monkeypatch.delenv("TCDPP_WORKERS", raising=False)
    monkeypatch.delenv("TCDPP_MAX_LAWS", raising=False)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def grid4() -> TimeGrid:
    return TimeGrid.unit(4)


@pytest.fixture
def staircase(grid4) -> Path:
    """0, 1, 2, 1, 3 на сетке {0..4}"""
    return Path(grid4, PathKind.CADLAG_STEP, (0, 1, 2, 1, 3))


@pytest.fixture
def half_grid() -> TimeGrid:
    return TimeGrid(Fraction(1), Fraction(1, 4))
