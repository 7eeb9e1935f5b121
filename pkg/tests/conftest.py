from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return REPO_ROOT


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return REPO_ROOT / "tests" / "fixtures"


@pytest.fixture()
def repo_cwd(monkeypatch) -> Path:
    """Run the test from the repository root so the shipped configs'
    relative data paths resolve."""
    monkeypatch.chdir(REPO_ROOT)
    return REPO_ROOT
