from importlib import resources

import pytest

from mauc.model import load_case_file

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def bundled(name: str):
    return load_case_file(str(resources.files("mauc") / "cases" / f"{name}.json"))


@pytest.fixture(scope="session")
def micro2():
    return bundled("micro2")


@pytest.fixture(scope="session")
def demo4():
    return bundled("demo4")


@pytest.fixture(scope="session")
def demo14():
    return bundled("demo14")


@pytest.fixture(scope="session")
def demo3area():
    return bundled("demo3area")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
