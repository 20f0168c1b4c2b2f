import pytest

ACCEPTANCE_LINES: list = []


@pytest.fixture
def acceptance_report():
    def report(number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}" + (f" | {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
