"""Acceptance criteria at their stated tolerances, one line per criterion."""

import pytest

from freqbin.acceptance import CRITERIA


@pytest.mark.parametrize("check", CRITERIA, ids=lambda c: c.__name__.removeprefix("check_"))
def test_criterion(check, capsys):
    result = check()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail
