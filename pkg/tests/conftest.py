"""Collects acceptance-criterion outcomes and prints one line per criterion at the end of the run."""

_outcomes: dict[int, dict] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", (m.args[0], m.args[1])))


def pytest_runtest_logreport(report):
    # count the call phase, plus setup failures (e.g. a fixture that raised)
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    info = dict(report.user_properties).get("criterion")
    if info is None:
        return
    number, title = info
    entry = _outcomes.setdefault(number, {"title": title, "passed": 0, "failed": []})
    if report.outcome == "passed":
        entry["passed"] += 1
    else:
        entry["failed"].append(report.nodeid.split("::", 1)[-1])


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        e = _outcomes[number]
        status = "PASS" if not e["failed"] else "FAIL"
        detail = f"{e['passed']} passed"
        if e["failed"]:
            detail += f", failed: {', '.join(e['failed'])}"
        terminalreporter.write_line(f"ACCEPTANCE {number} {e['title']}: {status} ({detail})")
