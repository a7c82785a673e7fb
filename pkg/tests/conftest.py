import math
from fractions import Fraction

import pytest

from kindep.adversarial import S1, S2, S3, S4

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for the acceptance summary, then assert it."""

    def record(criterion: str, ok: bool, detail: str):
        line = f"{criterion:<4} {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s[1:4].strip() or 0)):
            terminalreporter.write_line(line)


def exact_mixture_win(prm):
    """Pr(key 0 is the strict minimum) under the mixture, by cases on the strategy."""
    ell, z = prm.ell, prm.z_size
    used = (prm.n - z) // prm.s  # coarse values other than g(0) that S3 occupies
    s3 = sum(Fraction(math.comb(ell - g0, used), math.comb(ell, used)) for g0 in range(ell + 1))
    s3 /= (ell + 1) * (z + 1)
    pr = prm.strategy_probabilities()
    return pr[S1] * Fraction(1, ell + 1) + pr[S2] / 2 + pr[S3] * s3 + pr[S4] * Fraction(1, prm.n + 1)
