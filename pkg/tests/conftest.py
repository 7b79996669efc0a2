import numpy as np
import pytest


def random_symmetric(rng, n, density=None):
    """Uniform weights, or a binary graph with the given edge density."""
    if density is None:
        X = rng.random((n, n))
        return (X + X.T) / 2
    X = (rng.random((n, n)) < density).astype(float)
    A = np.triu(X, 1)
    return A + A.T


def two_block(rng, n=40, p_in=0.6, p_out=0.05):
    half = n // 2
    labels = np.repeat([0, 1], [half, n - half])
    P = np.where(labels[:, None] == labels[None, :], p_in, p_out)
    A = np.triu((rng.random((n, n)) < P).astype(float), 1)
    return A + A.T, labels


def same_partition(a, b) -> bool:
    """True when two label vectors differ only by a renaming of labels."""
    a, b = np.asarray(a), np.asarray(b)
    fwd, back = {}, {}
    for x, y in zip(a.tolist(), b.tolist()):
        if fwd.setdefault(x, y) != y or back.setdefault(y, x) != x:
            return False
    return True


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
