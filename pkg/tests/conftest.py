import pytest

from vie_parareal.configuration import THREADS_ENV_VAR


@pytest.fixture(autouse=True)
def _no_thread_override(monkeypatch):
    """Keep a developer's VIE_PARAREAL_THREADS out of the tests."""
    monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
