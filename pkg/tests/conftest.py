import pytest
from hypothesis import settings

# The first example of a property test pays for loading compiled kernels, so
# wall-clock deadlines would only measure that.
settings.register_profile("default", deadline=None)
settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")
    config._acceptance = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker is not None:
            number, title = marker.args
            config._acceptance.setdefault(number, {"titles": [], "outcomes": []})
            if title not in config._acceptance[number]["titles"]:
                config._acceptance[number]["titles"].append(title)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        entry = item.config._acceptance[marker.args[0]]
        entry["outcomes"].append((item.name, report.outcome))


def pytest_terminal_summary(terminalreporter, config):
    results = getattr(config, "_acceptance", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        entry = results[number]
        outcomes = entry["outcomes"]
        if not outcomes:
            status = "NOT RUN"
        elif all(o == "passed" for _, o in outcomes):
            status = "PASS"
        else:
            failed = [name for name, o in outcomes if o != "passed"]
            status = "FAIL (" + ", ".join(failed) + ")"
        title = "; ".join(entry["titles"])
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")
