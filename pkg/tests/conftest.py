import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for i in sorted(test_acceptance.RESULTS):
        ok, detail = test_acceptance.RESULTS[i]
        terminalreporter.write_line(test_acceptance._line(i, ok, detail))
