import pytest

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion number and summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    n, text = m.args
    slot = _CRITERIA.setdefault(n, {"text": text, "ok": True, "seen": False, "notes": []})
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        slot["seen"] = True
        xfail = hasattr(rep, "wasxfail")
        if rep.failed or rep.skipped or xfail:
            slot["ok"] = False
            if xfail:
                slot["notes"].append(f"{item.name}: expected failure")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        s = _CRITERIA[n]
        status = "PASS" if s["ok"] and s["seen"] else "FAIL"
        note = f"  ({'; '.join(s['notes'])})" if s["notes"] else ""
        tr.write_line(f"criterion {n}: {status}  {s['text']}{note}")
