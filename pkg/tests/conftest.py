import pathlib
import re
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_")


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if m and rep.when == "call":
                detail = dict(rep.user_properties).get("detail", "")
                lines.append((int(m.group(1)), f"criterion {m.group(1)}: {outcome[:4].upper()}  {detail}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
