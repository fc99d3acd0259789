import pytest

from keyreconf.app_profiles import build_registry
from keyreconf.layout import load_bundled_layout


@pytest.fixture(scope="session")
def iso():
    return load_bundled_layout("iso105")


@pytest.fixture(scope="session")
def ansi():
    return load_bundled_layout("ansi104")


@pytest.fixture(scope="session")
def registry(iso):
    return build_registry(iso)
