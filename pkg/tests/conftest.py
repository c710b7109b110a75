import os
from pathlib import Path

import hypothesis
import numpy as np
import pytest

np.seterr(all="warn", under="ignore")

hypothesis.settings.register_profile("default", deadline=None, max_examples=60)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA_ENV = "ENERGYSCEN_DATA_DIR"

# filled by the acceptance module, printed at the end of the run
ACCEPTANCE_RESULTS: dict[str, tuple[str, str]] = {}


@pytest.fixture
def data_dir():
    d = os.environ.get(DATA_ENV)
    if not d or not Path(d).is_dir():
        pytest.skip(f"requires-data: set {DATA_ENV} to the public dataset directory")
    return Path(d)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split()[0])):
        status, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{status:4s}  criterion {key}: {detail}")
