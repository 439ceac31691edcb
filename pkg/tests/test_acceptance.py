"""Acceptance criteria 1-12 at their stated tolerances, one line each."""
import pytest

from spinlab import acceptance


@pytest.mark.parametrize("n", sorted(acceptance.CRITERIA))
def test_criterion(n, capsys):
    res = acceptance.run_one(n)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()
