import time

import pytest

from modellife import arx
from modellife.plant import wood_berry_nominal

# one PASS/FAIL line per acceptance criterion, echoed after the run
CRITERIA = {}
# wall-clock seconds of shared slow steps
TIMING = {}


@pytest.fixture(scope="session")
def converted():
    """The sparse ARX fit of the nominal column at the default settings."""
    t0 = time.perf_counter()
    model = arx.convert_from_plant(wood_berry_nominal(), arx.ConversionConfig())
    TIMING["conversion"] = time.perf_counter() - t0
    return model


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[n])
