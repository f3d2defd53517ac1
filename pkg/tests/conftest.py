import json
from pathlib import Path

import pytest

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="session")
def config_dir() -> Path:
    return CONFIG_DIR


def load_config(name: str) -> dict:
    with open(CONFIG_DIR / name) as fh:
        return json.load(fh)
