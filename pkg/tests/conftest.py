# tests/conftest.py
"""
Pytest configuration and fixtures.
"""
import pytest
import sys
from pathlib import Path
import tempfile

# Add parent directory to Python path so imports work
sys.path.insert(0, str(Path(__file__).parent.parent))

from db import ResultsDB
from tuples import build_context


@pytest.fixture
def temp_db():
    """Create a temporary results database for testing."""
    with tempfile.TemporaryDirectory() as tmpdir:
        db_path = Path(tmpdir) / "test.db"
        db = ResultsDB(db_url=f"sqlite:///{db_path}")
        yield db
        db.engine.dispose()


@pytest.fixture
def triple_ctx():
    """The {0, 2, 6} tuple at R = 50: support of 25 vectors."""
    return build_context((0, 2, 6), x=10 ** 5, R=50)


@pytest.fixture
def twin_ctx():
    """The {0, 2} tuple at R = 12: support {(1,1), (1,11), (11,1)}."""
    return build_context((0, 2), x=10 ** 4, R=12)


@pytest.fixture
def sample_config():
    """Small experiment configuration for testing."""
    return {
        "offsets": [0, 2, 6],
        "B": 1,
        "R": 300,
        "x_grid": [2000, 4000],
        "m": 1,
        "indices": [1, 2],
        "integral_method": "monte-carlo",
        "integral_budget": 20000,
        "seed": 7,
        "series_pmax": 10000,
        "block_size": 1000,
    }
