import sys


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    numbered = sorted((k, v) for k, v in results.items() if isinstance(k, int))
    for _, line in numbered:
        terminalreporter.write_line(line)
    for key, line in results.items():
        if not isinstance(key, int):
            terminalreporter.write_line(line)
