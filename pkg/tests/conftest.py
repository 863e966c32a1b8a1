import sys
from pathlib import Path

import pytest
from hypothesis import settings

from spectrum_subsidy import GovernmentPolicy, MarketConfig

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def table2():
    return MarketConfig(populations=(26, 744), beta=76, gamma=0.05), GovernmentPolicy((262, 738))


@pytest.fixture
def table5():
    return MarketConfig(populations=(40, 80), beta=30, gamma=0.05), GovernmentPolicy((400, 600))


@pytest.fixture
def configs_dir():
    return ROOT / "configs"


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance.RESULTS:
        terminalreporter.write_line(line)
