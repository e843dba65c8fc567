from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def root():
    return ROOT


@pytest.fixture
def scenarios_dir():
    return ROOT / "scenarios"


@pytest.fixture
def fixtures_dir():
    return ROOT / "fixtures"
