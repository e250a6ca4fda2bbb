"""Collects acceptance-criterion outcomes and prints one line per criterion."""

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion test")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", tuple(m.args)))


def pytest_runtest_logreport(report):
    for key, value in report.user_properties:
        if key == "criterion":
            ok = not report.failed and not (report.when == "call" and report.skipped)
            _outcomes[value] = _outcomes.get(value, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), ok in sorted(_outcomes.items()):
        terminalreporter.write_line(f"criterion {number} {title}: {'PASS' if ok else 'FAIL'}")
