"""Acceptance criteria at full resolution, one pass/fail line per criterion.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines as they
complete; the same battery at reduced resolution backs the CLI
``kppfronts verify``.
"""

import pytest

from kppfronts import verify


@pytest.fixture(scope="module")
def ctx():
    return verify.AcceptanceContext(verify.FULL)


@pytest.mark.parametrize("number", sorted(verify.CRITERIA))
def test_criterion(ctx, number):
    result = verify.CRITERIA[number](ctx)
    print(result.line())
    assert result.passed, result.line()
