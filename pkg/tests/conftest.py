import pytest

from nclab.config import make_rng


@pytest.fixture
def rng():
    return make_rng(20240)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import IDS, RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in IDS:
        if label in RESULTS:
            ok, detail = RESULTS[label]
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
    n_ok = sum(ok for ok, _ in RESULTS.values())
    terminalreporter.write_line(f"{n_ok}/{len(RESULTS)} criteria pass")
