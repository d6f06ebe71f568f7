import pytest

_KEY = pytest.StashKey()


class AcceptanceBoard:
    """Collects per-criterion outcomes; a criterion passes when all its parts pass."""

    def __init__(self):
        self.parts = {}

    def record(self, number, title, passed, detail):
        self.parts.setdefault(number, (title, []))[1].append((bool(passed), detail))
        return passed

    def lines(self, expected=range(1, 11)):
        out = []
        for n in expected:
            if n not in self.parts:
                out.append(f"criterion {n:2d} [NOT RUN]")
                continue
            title, parts = self.parts[n]
            status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
            out.append(f"criterion {n:2d} [{status}] {title}: " + " | ".join(d for _, d in parts))
        return out


def pytest_configure(config):
    config.stash[_KEY] = AcceptanceBoard()


@pytest.fixture(scope="session")
def board(request):
    return request.config.stash[_KEY]


def pytest_terminal_summary(terminalreporter, config):
    board = config.stash[_KEY]
    if not board.parts:
        return
    terminalreporter.section("acceptance criteria")
    for line in board.lines():
        terminalreporter.write_line(line)
