import pytest

from ucsjudge.data import PromptFamily, Sample, TaskSpec
from ucsjudge.gateway import Gateway, mock_backend


class Script:
    """Mock plan returning queued replies in order and recording requests."""

    def __init__(self, *replies):
        self.replies = list(replies)
        self.requests = []

    def __call__(self, request):
        self.requests.append(request)
        if len(self.replies) == 1:
            return self.replies[0]
        return self.replies.pop(0)


@pytest.fixture
def script():
    def make(*replies, concurrency=1, cache_dir=None):
        plan = Script(*replies)
        return plan, Gateway(mock_backend(plan), cache_dir=cache_dir, concurrency=concurrency)

    return make


@pytest.fixture
def evidence_task():
    return TaskSpec.for_family(PromptFamily.EVIDENCE_SUPPORT, task_id="rag")


@pytest.fixture
def summary_task():
    return TaskSpec.for_family(PromptFamily.SUMMARY_FAITHFULNESS, task_id="sum")


@pytest.fixture
def summary_sample():
    return Sample("s1", "en", {"article": "The cat sat.", "summary": "A cat sat."}, 1)


ACCEPTANCE_LINES = {}


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
