from collections import defaultdict

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_runtest_setup(item):
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        item.user_properties.append(("criterion", int(mark.args[0])))


def _criterion(report):
    for key, value in report.user_properties:
        if key == "criterion":
            return int(value)
    return None


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion (all of its tests must pass)."""
    outcome = defaultdict(list)
    details = defaultdict(list)
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if not hasattr(rep, "user_properties"):
                continue
            num = _criterion(rep)
            if num is None:
                continue
            if rep.when == "call" or rep.outcome != "passed":
                outcome[num].append(rep.outcome)
            for key, value in rep.user_properties:
                if key == "detail" and rep.when == "call":
                    details[num].append(str(value))
    if not outcome:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(outcome):
        ok = all(o == "passed" for o in outcome[num])
        extra = "; ".join(details[num])
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {extra}")
