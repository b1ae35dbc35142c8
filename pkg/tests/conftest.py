import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    number, text = mark.args
    measured = "; ".join(v for k, v in item.user_properties if k == "measured")
    entry = _CRITERIA.setdefault(number, {"text": text, "ok": True, "measured": []})
    if rep.failed:
        entry["ok"] = False
    if rep.when == "call" and measured:
        entry["measured"].append(measured)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        tail = f" [{'; '.join(e['measured'])}]" if e["measured"] else ""
        terminalreporter.write_line(f"{'PASS' if e['ok'] else 'FAIL'} criterion {number}: {e['text']}{tail}")
