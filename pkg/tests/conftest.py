import textwrap

import numpy as np
import pytest

from fairkit.cohort import CATEGORICAL, NUMERIC, OUTCOME, PROTECTED, ColumnSpec, load_csv

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Collect one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def record(label, ok, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {label}" + (f"  ({detail})" if detail else ""))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_schema():
    return [
        ColumnSpec("age", NUMERIC),
        ColumnSpec("sex", CATEGORICAL, PROTECTED, ("F", "M")),
        ColumnSpec("dep", NUMERIC, OUTCOME),
    ]


@pytest.fixture
def small_csv(tmp_path):
    path = tmp_path / "small.csv"
    path.write_text(textwrap.dedent("""\
        age,sex,dep
        34,F,1
        51,M,0
        29,F,0
        62,M,1
        """))
    return path


@pytest.fixture
def small_cohort(small_csv, small_schema):
    return load_csv(small_csv, small_schema)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
