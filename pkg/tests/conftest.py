"""Shared test plumbing: the acceptance suite's per-criterion summary."""


def pytest_terminal_summary(terminalreporter):
    try:
        from . import test_acceptance
    except ImportError:
        try:
            import test_acceptance
        except ImportError:
            return
    lines = getattr(test_acceptance, "REPORT_LINES", [])
    if not lines:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
