import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from qlink.driver import Driver  # noqa: E402


@pytest.fixture
def driver():
    drv = Driver().initialize([
        {"name": "vppu0", "kind": "vppu"},
        {"name": "decoder", "kind": "decoder"},
    ])
    yield drv
    drv.shutdown()


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.result_lines():
        terminalreporter.write_line(line)
