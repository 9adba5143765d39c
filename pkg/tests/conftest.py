import warnings

import numpy as np
import pytest

from diracbie.geometry import arc_length_reparametrize, circle, ellipse, star


@pytest.fixture(scope="session")
def unit_circle():
    return arc_length_reparametrize(circle())


@pytest.fixture(scope="session")
def presets():
    return {
        "circle": arc_length_reparametrize(circle()),
        "ellipse": arc_length_reparametrize(ellipse(2.0, 1.0)),
        "star": arc_length_reparametrize(star(1.0, 0.2, 5)),
    }


@pytest.fixture(autouse=True)
def _quiet_scan_notices():
    # coarse-grid notices from the eigenvalue scan are informational
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="grid too coarse", category=RuntimeWarning)
        yield


def set_gap(a, b):
    a, b = np.sort(np.asarray(a, float)), np.sort(np.asarray(b, float))
    assert a.size == b.size, (a, b)
    return float(np.abs(a - b).max()) if a.size else 0.0


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE: dict = {}


def record_criterion(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")
