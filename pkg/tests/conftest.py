"""
Test configuration and fixtures for staticdeps tests.
"""
import pytest
import os
from pathlib import Path

from staticdeps.core.asmmodel import parse_kernel
from staticdeps.core.depcore import DepConfig
from staticdeps.core.oracle import OracleConfig, RegInit
from staticdeps.utils.config import Config
from staticdeps.utils.mock_data import (
    ALIASING_KERNEL,
    DURBIN_KERNEL,
    FIBONACCI_KERNEL,
    MockDataGenerator,
)


@pytest.fixture(autouse=True)
def isolated_environment(monkeypatch, tmp_path):
    """Keep developer env vars and config files out of the tests."""
    for name in list(os.environ):
        if name.startswith("STATICDEPS_") or name in ("LOG_LEVEL", "LOG_DIR", "LOG_STRUCTURED"):
            monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("ENVIRONMENT", "test")
    monkeypatch.chdir(tmp_path)


@pytest.fixture(scope="session")
def test_config():
    """Create test configuration."""
    return Config(debug=True)


@pytest.fixture
def fibonacci_kernel():
    return parse_kernel(FIBONACCI_KERNEL)


@pytest.fixture
def aliasing_kernel():
    return parse_kernel(ALIASING_KERNEL)


@pytest.fixture
def durbin_kernel():
    return parse_kernel(DURBIN_KERNEL)


@pytest.fixture
def dep_config():
    """Default analysis settings (Skylake ROB, seeds 1,2,3)."""
    return DepConfig()


@pytest.fixture
def oracle_config():
    return OracleConfig(iterations=50, reg_init=RegInit.distinct(7))


@pytest.fixture
def mock_generator():
    return MockDataGenerator(seed=1234)


@pytest.fixture
def write_file(tmp_path):
    """Write text to a file under tmp_path and return its path as a string."""
    def _write(name: str, text: str) -> str:
        path = Path(tmp_path) / name
        path.write_text(text)
        return str(path)
    return _write


@pytest.fixture
def prediction_csv(write_file):
    return write_file("predictions.csv", (
        "benchmark,block,occurrences,tool,pred_cycles\n"
        "gemm,b0,100,mca,2.0\n"
        "gemm,b1,10,mca,5.0\n"
        "gemm,b0,100,uica,2.5\n"
        "gemm,b1,10,uica,FAIL\n"
        "lu,b0,50,mca,4.0\n"
        "lu,b0,50,uica,3.0\n"
        "durbin,b0,20,mca,10.0\n"
        "durbin,b0,20,uica,9.0\n"
    ))


@pytest.fixture
def baseline_csv(write_file):
    return write_file("baselines.csv", (
        "benchmark,baseline_cycles\n"
        "gemm,250.0\n"
        "lu,160.0\n"
        "durbin,220.0\n"
    ))


# Pytest markers
pytest.mark.unit = pytest.mark.unit
pytest.mark.integration = pytest.mark.integration
pytest.mark.slow = pytest.mark.slow


def pytest_configure(config):
    """Configure pytest markers."""
    config.addinivalue_line(
        "markers", "unit: marks tests as unit tests (fast, isolated)"
    )
    config.addinivalue_line(
        "markers", "integration: marks tests as integration tests (run the CLI or several modules)"
    )
    config.addinivalue_line(
        "markers", "slow: marks tests as slow (may take several seconds)"
    )
