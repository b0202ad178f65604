import sys


def pytest_terminal_summary(terminalreporter):
    # repeat the per-criterion lines from the acceptance module, if it ran
    module = next((m for name, m in list(sys.modules.items()) if name.endswith("test_acceptance")), None)
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
