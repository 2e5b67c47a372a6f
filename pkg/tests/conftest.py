"""Session-wide stability audit.

Both matchers are wrapped so that every matching produced anywhere in the
suite goes through ``verify_stability``. The tally is checked by the
acceptance suite and printed in the terminal summary.
"""

import functools

import pytest

import balloons
from balloons import matching as mt

AUDIT = {"outputs": 0, "blocking_pairs": 0, "failures": []}
ACCEPTANCE = []


def _audited(fn):
    @functools.wraps(fn)
    def wrapper(points, space=None, *args, **kwargs):
        result = fn(points, space, *args, **kwargs)
        bad = _verify(points, result, space)
        AUDIT["outputs"] += 1
        AUDIT["blocking_pairs"] += len(bad)
        if bad:
            AUDIT["failures"].append((fn.__name__, result.n, bad[:5]))
        return result
    wrapper.audited = True
    return wrapper


_verify = mt.verify_stability
mt.greedy_stable_matching = _audited(mt.greedy_stable_matching)
mt.brute_force_matching = _audited(mt.brute_force_matching)
balloons.greedy_stable_matching = mt.greedy_stable_matching


@pytest.fixture
def stability_audit():
    return AUDIT


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE


def pytest_collection_modifyitems(items):
    # the acceptance suite goes last so the stability audit covers everything
    items.sort(key=lambda item: item.path.name == "test_acceptance.py")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
    terminalreporter.write_line(
        f"stability audit: {AUDIT['outputs']} matcher outputs verified, "
        f"{AUDIT['blocking_pairs']} blocking pairs")
