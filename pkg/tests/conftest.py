import numpy as np
import pytest

from agelab.rng import SplitMix64


class ScriptedRng:
    """Returns queued uniforms, then falls back to a real generator."""

    def __init__(self, values, fallback_seed=0):
        self.values = list(values)
        self.fallback = SplitMix64(fallback_seed)

    def random(self, size=None):
        if size is None and self.values:
            return self.values.pop(0)
        return self.fallback.random(size)

    def integers(self, high, size=None):
        if size is None:
            return min(int(self.random() * high), high - 1)
        return self.fallback.integers(high, size)

    def categorical(self, probs):
        u = self.random()
        acc = 0.0
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                return i
        return len(probs) - 1


@pytest.fixture
def rng():
    return SplitMix64(12345)


def within_sigmas(count, n, p, k=4.0):
    """Binomial count within k standard deviations of n*p."""
    sd = np.sqrt(n * p * (1 - p))
    return abs(count - n * p) <= k * max(sd, 1e-12)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Print one ``ACCEPTANCE <n> PASS|FAIL`` line and keep it for the summary."""

    def report(number, passed, detail):
        line = f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
