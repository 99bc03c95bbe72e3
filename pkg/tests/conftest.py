import pytest

from pseudostress import build_lame, generate_mesh

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def square2():
    return generate_mesh("square", 2)


@pytest.fixture(scope="session")
def steel_like():
    return build_lame(1.0, 0.35)


@pytest.fixture
def criterion():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def record(label, ok, detail=""):
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
