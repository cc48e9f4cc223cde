from collections import OrderedDict

_titles = OrderedDict()
_owner = {}
_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion the test belongs to")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            n, title = mark.args
            _titles.setdefault(n, title)
            _owner[item.nodeid] = n


def pytest_runtest_logreport(report):
    n = _owner.get(report.nodeid)
    if n is None:
        return
    # a setup error or a call failure both count against the criterion
    if report.when == "call" or report.outcome != "passed":
        _outcomes.setdefault(n, {})[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _titles:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_titles):
        results = list(_outcomes.get(n, {}).values())
        if not results:
            status = "NOT RUN"
        elif all(r == "passed" for r in results):
            status = "PASS"
        else:
            status = f"FAIL ({sum(r != 'passed' for r in results)}/{len(results)} checks)"
        terminalreporter.write_line(f"criterion {n:>2}: {status:<22} {_titles[n]}")
