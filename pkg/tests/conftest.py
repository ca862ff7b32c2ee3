import pytest

_acceptance_results = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if "test_acceptance" not in str(item.fspath):
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome == "skipped"):
        label = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(
            rep.outcome, rep.outcome.upper()
        )
        _acceptance_results.append((item.name, label))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, label in _acceptance_results:
        terminalreporter.write_line(f"{label:5s} {name}")
