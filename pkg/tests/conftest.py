import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import acceptance_log  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for tag in sorted(acceptance_log.RESULTS, key=lambda t: int(t[2:])):
        ok, title, elapsed, budget, detail = acceptance_log.RESULTS[tag]
        tr.write_line(f"{tag} {'PASS' if ok else 'FAIL'} {title} [{elapsed:.2f}s / {budget:g}s] {detail}")
