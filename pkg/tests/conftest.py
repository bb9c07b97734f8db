import numpy as np
import pytest

from drive import rng

_CRITERIA: dict[str, list[bool]] = {}
_TITLES: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): acceptance criterion a test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    cid, title = marker.args
    _TITLES[cid] = title
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _CRITERIA.setdefault(cid, []).append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=lambda c: int(c[1:])):
        status = "PASS" if all(_CRITERIA[cid]) else "FAIL"
        terminalreporter.write_line(f"{cid} {status}  {_TITLES[cid]}")


def seed_where_diag_is_identity(dim: int) -> int:
    """Smallest seed whose Rademacher diagonal is all +1, so the rotation is plain H / sqrt(dim)."""
    for s in range(100000):
        if not rng.bits([s], dim, rng.TAG_RADEMACHER).any():
            return s
    raise AssertionError("no identity diagonal found")


@pytest.fixture
def identity_seed():
    return seed_where_diag_is_identity


@pytest.fixture
def gen():
    return np.random.default_rng(20240601)
