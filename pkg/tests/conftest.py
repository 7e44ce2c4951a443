import sys
from pathlib import Path

import pytest

from ptrecon.logio import EventLog, load_log
from ptrecon.ptree import load_tree, parse_tree

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).resolve().parents[1] / "src" / "ptrecon" / "data"

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def choice_loop_tree():
    return parse_tree("->( +( 'a', X( 'b', 'c' ) ), *( 'd', tau ) )")


@pytest.fixture
def patients_tree():
    return load_tree(DATA / "patients.tree")


@pytest.fixture
def patients_log():
    return load_log(DATA / "patients.csv")


@pytest.fixture
def loop_tree():
    return parse_tree("*( 'a', tau )")


@pytest.fixture
def loop_log():
    return EventLog({("a",) * 10: 1000})


@pytest.fixture
def annotated_loop():
    return parse_tree("*( 'a':10000, tau:9000 ):1000")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
