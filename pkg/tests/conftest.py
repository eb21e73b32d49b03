"""Suite-wide hooks: an acceptance-criterion summary printed per run."""

_acceptance_reports: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        _acceptance_reports[report.nodeid] = report.outcome.upper()


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_reports:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_acceptance_reports):
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"{_acceptance_reports[nodeid]:>6}  {name}")
