"""Acceptance suite: one pass/fail line per criterion, then a hard assert."""
import pytest

from sgflow import acceptance as A


@pytest.fixture(scope="module")
def outcomes():
    results = A.run_all(stream=None)
    return {r.number: r for r in results}


def test_summary(outcomes, capsys):
    with capsys.disabled():
        print()
        for num in sorted(outcomes):
            print(outcomes[num].line())
    assert len(outcomes) == len(A.CRITERIA)


@pytest.mark.parametrize("number,name", [(c[0], c[1]) for c in A.CRITERIA],
                         ids=[f"{c[0]:02d}-{c[1].replace(' ', '_')}" for c in A.CRITERIA])
def test_criterion(outcomes, number, name):
    res = outcomes[number]
    assert res.name == name
    assert res.passed, f"{res.line()} {res.details}"
