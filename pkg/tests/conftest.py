import pytest

from littermap.config import PipelineConfig


@pytest.fixture
def cfg():
    return PipelineConfig()


@pytest.fixture
def fixed_now_env(monkeypatch):
    monkeypatch.setenv("LITTERMAP_NOW", "2026-08-08T12:00:00+00:00")
    return "2026-08-08T12:00:00+00:00"
