import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vpmap.graph import AdjacencyGraph

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_connected_graph(n: int, rng: np.random.Generator, extra: float = 0.3) -> AdjacencyGraph:
    """Random spanning tree plus extra random edges."""
    order = rng.permutation(n)
    edges = {(int(order[i]), int(order[rng.integers(0, i)])) for i in range(1, n)}
    for k in range(n):
        for l in range(k + 1, n):
            if rng.uniform() < extra / n:
                edges.add((k, l))
    return AdjacencyGraph.from_edges(n, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record and print one PASS/FAIL line per acceptance criterion."""

    def report(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        print(line)
        _ACCEPTANCE.append(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
