import pytest

# criterion number -> list of (check name, passed, detail); shared across tests
_PARTS: dict[int, list[tuple[str, bool, str]]] = {}


class CriterionLog:
    def __init__(self, number: int):
        self.number = number
        self.parts = _PARTS.setdefault(number, [])
        self.mine: list[tuple[str, bool, str]] = []

    def check(self, name: str, ok, detail: str = "") -> bool:
        entry = (name, bool(ok), detail)
        self.parts.append(entry)
        self.mine.append(entry)
        return bool(ok)

    def assert_all(self):
        bad = [f"{n} ({d})" for n, ok, d in self.mine if not ok]
        assert not bad, "failed: " + "; ".join(bad)


@pytest.fixture
def criterion():
    return CriterionLog


def pytest_terminal_summary(terminalreporter):
    if not _PARTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_PARTS):
        parts = _PARTS[n]
        bad = [f"{name}: {detail}" for name, ok, detail in parts if not ok]
        if bad:
            terminalreporter.write_line(f"criterion {n}: FAIL ({'; '.join(bad)})")
        else:
            terminalreporter.write_line(f"criterion {n}: PASS ({len(parts)} checks)")
