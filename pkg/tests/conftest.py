import re

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    key = (int(m.group(1)), m.group(2))
    entry = _ACCEPTANCE.setdefault(key, {"ok": True, "time": 0.0})
    entry["time"] += report.duration
    if report.failed:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (num, name), entry in sorted(_ACCEPTANCE.items()):
        status = "PASS" if entry["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {num} {status} ({entry['time']:.1f}s) {name.replace('_', ' ')}")
