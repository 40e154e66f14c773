import pytest

from helpers import FIXTURES
from higemine.corpus import load_taxonomy


@pytest.fixture
def fixtures():
    return FIXTURES


@pytest.fixture
def taxonomy():
    return load_taxonomy(FIXTURES / "taxonomy.json")


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(module.RESULTS, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
