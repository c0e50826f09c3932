from __future__ import annotations

from pathlib import Path

import pytest

from tests.helpers import topical_records, write_jsonl

_results: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(key, text): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    key, text = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        prev = _results.get(key, ("PASS", text))[0]
        # a criterion spread over several tests passes only if all of them do
        if prev == "FAIL" or (prev == "SKIP" and status == "PASS"):
            status = prev
        _results[key] = (status, text)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_results, key=lambda k: int(k)):
        status, text = _results[key]
        terminalreporter.write_line(f"[{status}] criterion {key}: {text}")


@pytest.fixture
def topical_corpus(tmp_path: Path) -> Path:
    return write_jsonl(tmp_path / "raw.jsonl", topical_records())
