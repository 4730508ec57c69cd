from collections import defaultdict

import pytest


@pytest.fixture
def record_criterion(request):
    """Log one acceptance outcome; the terminal summary groups them per criterion."""
    store = request.config.stash.setdefault(_KEY, [])

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        store.append((number, ok, line))
        return ok

    return record


_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_KEY, [])
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    by_number = defaultdict(list)
    for number, ok, line in store:
        by_number[number].append(ok)
        terminalreporter.write_line("  " + line)
    terminalreporter.write_line("")
    for number in sorted(by_number):
        oks = by_number[number]
        verdict = "PASS" if all(oks) else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {verdict} ({sum(oks)}/{len(oks)} checks)")
