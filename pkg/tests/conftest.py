import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rascal.data import ResponseMatrix, ScoringKey, apply_scoring, trim_extremes  # noqa: E402
from rascal.estimate import jmle_calibrate  # noqa: E402
from rascal.fit import fit_statistics, standardized_residuals  # noqa: E402
from rascal.simulate import REPORTED_DELTA, REPORTED_TAU, simulate_rsm  # noqa: E402


def scored_matrix(cells, m=1, person_ids=None, item_ids=None):
    cells = np.asarray(cells, dtype=float)
    n, length = cells.shape
    item_ids = item_ids or [f"I{i + 1}" for i in range(length)]
    person_ids = person_ids or [f"P{v + 1}" for v in range(n)]
    keys = [ScoringKey(i, "forward", 0, m) for i in item_ids]
    return ResponseMatrix(person_ids, item_ids, cells, keys, scored=True)


@pytest.fixture(scope="session")
def rsm_calibration():
    """1000-person calibration of data generated from the reported structure."""
    raw, _ = simulate_rsm(1000, REPORTED_DELTA, REPORTED_TAU, seed=5)
    trimmed, log = trim_extremes(apply_scoring(raw))
    return jmle_calibrate(trimmed, trim_log=log)


@pytest.fixture(scope="session")
def rsm_fit(rsm_calibration):
    cal = rsm_calibration
    return fit_statistics(standardized_residuals(cal.matrix, cal), cal)


# Acceptance criteria record their outcome here; printed in the terminal summary.
ACCEPTANCE_LINES = {}


def record(criterion, ok, detail):
    ACCEPTANCE_LINES.setdefault(criterion, []).append((bool(ok), detail))
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE_LINES):
        parts = ACCEPTANCE_LINES[criterion]
        ok = all(p for p, _ in parts)
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
