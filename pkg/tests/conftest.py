import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scenarioforge.bootstrap import initialize_store
from scenarioforge.pipeline import PipelineEngine
from scenarioforge.taxonomy import default_taxonomy


@pytest.fixture(scope="session")
def taxonomy():
    return default_taxonomy()


@pytest.fixture
def store(tmp_path):
    store = initialize_store(tmp_path / "store")
    yield store
    store.close()


@pytest.fixture
def engine(store):
    return PipelineEngine(store)
