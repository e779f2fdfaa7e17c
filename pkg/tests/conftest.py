import pytest

from spillover_lab.network import build_network


@pytest.fixture
def four_cycle():
    return build_network({"clusters": [{"n": 4, "edges": [[1, 2], [2, 3], [3, 4], [4, 1]], "undirected": True}]})


def pytest_terminal_summary(terminalreporter):
    """Collect the one-line verdicts the acceptance tests attach to their reports."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when == "call":
                lines += [v for k, v in getattr(rep, "user_properties", ()) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
