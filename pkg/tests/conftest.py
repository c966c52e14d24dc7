import contextlib
import json
import threading
import time

import httpx

import pytest

from morphtest.comparators import ComparatorConfig
from morphtest.gateway import Gateway, HashingEmbedder, LlmHandle, MockScript
from morphtest.orchestrator import Runtime
from morphtest.relations import builtin_registry
from morphtest.tasks import builtin_tasks

GLACIER_CONTEXT = "The area in which a glacier forms is called a cirque."
GLACIER_QUESTION = "What geological features formed by glaciers?"

# filled by the acceptance tests, printed at the end of the run
CRITERIA: list[tuple[str, bool, str]] = []


@contextlib.contextmanager
def criterion(label: str):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        CRITERIA.append((label, False, f"{time.perf_counter() - start:.3f}s"))
        raise
    CRITERIA.append((label, True, f"{time.perf_counter() - start:.3f}s"))


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, elapsed in CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  ({elapsed})")


@pytest.fixture(scope="session")
def tasks():
    return builtin_tasks()


@pytest.fixture(scope="session")
def registry():
    return builtin_registry()


@pytest.fixture
def runtime(tasks, registry):
    return Runtime(Gateway(), registry, tasks, ComparatorConfig(embedding_provider=HashingEmbedder()))


def mock_handle(default="ok", rules=(), model_id="mock-llm"):
    return LlmHandle.mock(model_id, MockScript(rules, default_response=default))


def write_json(path, payload):
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


class FakeEndpoint:
    """Chat-completions/embeddings server behind httpx.MockTransport."""

    def __init__(self, reply=lambda prompt: "ok", statuses=()):
        self.reply = reply
        self.statuses = list(statuses)
        self.requests: list[httpx.Request] = []
        self.lock = threading.Lock()

    def __call__(self, request: httpx.Request) -> httpx.Response:
        with self.lock:
            self.requests.append(request)
            status = self.statuses.pop(0) if self.statuses else 200
        if status != 200:
            return httpx.Response(status, json={"error": "nope"})
        body = json.loads(request.content)
        if request.url.path.endswith("/chat/completions"):
            text = self.reply(body["messages"][-1]["content"])
            return httpx.Response(200, json={"choices": [{"message": {"role": "assistant",
                                                                      "content": text}}]})
        vec = HashingEmbedder(16).embed(body["input"]).tolist()
        return httpx.Response(200, json={"data": [{"embedding": vec}]})

    def client(self):
        return httpx.Client(transport=httpx.MockTransport(self))
