import numpy as np
import pytest
from hypothesis import strategies as st

from spdsparse.spd import SpdMatrix


def make_spd(rng, n, lo=0.2, hi=5.0):
    """Random SPD matrix with eigenvalues log-uniform in [lo, hi].

    Built from a random orthogonal basis, independent of the package's own
    generators.
    """
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.exp(rng.uniform(np.log(lo), np.log(hi), n))
    return SpdMatrix((q * w) @ q.T)


def make_sym(rng, n):
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def spd_matrices(draw, n=None, lo=0.2, hi=5.0):
    dim = draw(st.integers(1, 6)) if n is None else n
    seed = draw(st.integers(0, 2**32 - 1))
    return make_spd(np.random.default_rng(seed), dim, lo, hi)


@st.composite
def spd_pairs(draw, max_n=6):
    dim = draw(st.integers(1, max_n))
    return draw(spd_matrices(dim)), draw(spd_matrices(dim))


ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: int(r[0].split()[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
