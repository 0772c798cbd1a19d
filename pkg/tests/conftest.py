import os
import sys
from pathlib import Path

import pytest

# Keep test runs out of logs/
os.environ.setdefault("GHZ_FIDELITY_LOG_TO_FILE", "0")

# Add the project root directory to Python path so imports work
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from core.config_manager import ConfigManager  # noqa: E402
from utils.helpers import make_rng  # noqa: E402


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path):
    """Every test starts from the built-in defaults, never from config/settings.json."""
    ConfigManager.reset_instance()
    ConfigManager.get_instance(str(tmp_path / "settings.json"))
    yield
    ConfigManager.reset_instance()


@pytest.fixture
def rng():
    return make_rng(12345)
