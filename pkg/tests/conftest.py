import pytest

_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance(request, capsys):
    """Record and print one PASS/FAIL/SKIP line for an acceptance criterion."""

    def emit(number: int, ok: bool | None, detail: str) -> None:
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"[acceptance {number:>2}] {status}  {detail}"
        _ACCEPTANCE.append(line)
        with capsys.disabled():
            print("\n" + line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("]")[0].split()[-1])):
            terminalreporter.write_line(line)
