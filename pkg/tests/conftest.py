"""Collects the acceptance criterion lines and prints them after the run."""
_LINES = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    status = "PASS" if report.passed else "FAIL"
    _LINES.append((props["criterion"], f"{status}  {props['criterion']:>2}. {props['title']}  "
                                       f"[{report.duration:.1f}s] {props.get('detail', '')}".rstrip()))


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_LINES):
        terminalreporter.write_line(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties += [("criterion", mark.args[0]), ("title", mark.args[1])]
