import json
import threading

import pytest

from conparse import (
    AuthFailure,
    BackendError,
    CompletionRequest,
    CompletionResponse,
    HTTPBackend,
    RateLimited,
    ScriptedBackend,
    Timeout,
    UnmappedPrompt,
    prompt_sha256,
)


def test_request_validation():
    with pytest.raises(ValueError):
        CompletionRequest(prompt="x", temperature=-1)
    with pytest.raises(ValueError):
        CompletionRequest(prompt="x", max_tokens=0)
    req = CompletionRequest(prompt="x")
    assert req.temperature == 0.0
    assert req.max_tokens == 2048


def test_scripted_replay():
    backend = ScriptedBackend(by_prompt={"P": ["R"]})
    assert backend.complete(CompletionRequest(prompt="P")).text == "R"


def test_scripted_unmapped():
    backend = ScriptedBackend(by_prompt={"P": ["R"]})
    with pytest.raises(UnmappedPrompt):
        backend.complete(CompletionRequest(prompt="Q"))


def test_scripted_multi_response_cursor():
    backend = ScriptedBackend(by_prompt={"P": ["one", "two", "three"]})
    texts = [backend.complete(CompletionRequest(prompt="P")).text for _ in range(5)]
    assert texts == ["one", "two", "three", "three", "three"]


def test_scripted_wildcard_queue():
    backend = ScriptedBackend(by_prompt={"P": ["mapped"]}, default=["d1", "d2"])
    assert backend.complete(CompletionRequest(prompt="anything")).text == "d1"
    assert backend.complete(CompletionRequest(prompt="P")).text == "mapped"
    assert backend.complete(CompletionRequest(prompt="other")).text == "d2"
    assert backend.complete(CompletionRequest(prompt="more")).text == "d2"


def test_scripted_from_file(tmp_path):
    path = tmp_path / "script.jsonl"
    sha = prompt_sha256("hello")
    path.write_text(
        json.dumps({"prompt_sha256": sha, "responses": ["world"]}) + "\n"
        + json.dumps({"prompt_sha256": "*", "responses": ["fallback"]}) + "\n"
    )
    backend = ScriptedBackend.from_file(path)
    assert backend.complete(CompletionRequest(prompt="hello")).text == "world"
    assert backend.complete(CompletionRequest(prompt="bye")).text == "fallback"


def test_scripted_from_file_bad_entry(tmp_path):
    path = tmp_path / "script.jsonl"
    path.write_text("not json\n")
    with pytest.raises(BackendError):
        ScriptedBackend.from_file(path)


def test_request_log_and_write_script(tmp_path):
    backend = ScriptedBackend(by_prompt={"P": ["a", "b"]})
    backend.complete(CompletionRequest(prompt="P"))
    backend.complete(CompletionRequest(prompt="P"))
    assert [r.text for _, r in backend.request_log] == ["a", "b"]

    path = tmp_path / "replay.jsonl"
    backend.write_script(path)
    replayed = ScriptedBackend.from_file(path)
    assert replayed.complete(CompletionRequest(prompt="P")).text == "a"
    assert replayed.complete(CompletionRequest(prompt="P")).text == "b"


def test_scripted_concurrent_cursor_atomicity():
    backend = ScriptedBackend(by_prompt={"P": [str(i) for i in range(8)]})
    results = []
    lock = threading.Lock()

    def worker():
        text = backend.complete(CompletionRequest(prompt="P")).text
        with lock:
            results.append(text)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(results) == [str(i) for i in range(8)]


class FakeResponse:
    def __init__(self, status_code=200, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload
        self.text = text or json.dumps(payload or {})

    def json(self):
        if self._payload is None:
            raise ValueError("no json")
        return self._payload


class FakeSession:
    """Returns queued responses; an Exception instance in the queue is raised."""

    def __init__(self, queue):
        self.queue = list(queue)
        self.calls = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "json": json, "headers": headers})
        item = self.queue.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def _ok(text="(X (A a))", finish="stop"):
    return FakeResponse(payload={
        "choices": [{"message": {"content": text}, "finish_reason": finish}]
    })


def _backend(queue, **kwargs):
    session = FakeSession(queue)
    sleeps = []
    backend = HTTPBackend(
        "http://api.test/v1", api_key="k", model="m",
        session=session, sleep=sleeps.append, **kwargs,
    )
    return backend, session, sleeps


def test_http_success_and_wire_format():
    backend, session, _ = _backend([_ok("out")])
    resp = backend.complete(CompletionRequest(prompt="hi", max_tokens=64))
    assert resp == CompletionResponse(text="out", finish_reason="stop")
    call = session.calls[0]
    assert call["url"] == "http://api.test/v1/chat/completions"
    assert call["json"]["messages"] == [{"role": "user", "content": "hi"}]
    assert call["json"]["model"] == "m"
    assert call["json"]["max_tokens"] == 64
    assert call["headers"]["Authorization"] == "Bearer k"


def test_http_retries_then_succeeds():
    backend, session, sleeps = _backend(
        [FakeResponse(status_code=500), FakeResponse(status_code=502), _ok("fine")]
    )
    resp = backend.complete(CompletionRequest(prompt="hi"))
    assert resp.text == "fine"
    assert len(session.calls) == 3
    assert sleeps == [0.5, 1.0]  # exponential backoff


def test_http_auth_failure_immediate():
    backend, session, _ = _backend([FakeResponse(status_code=401)])
    with pytest.raises(AuthFailure):
        backend.complete(CompletionRequest(prompt="hi"))
    assert len(session.calls) == 1


def test_http_rate_limited_exhausts_retries():
    backend, session, _ = _backend(
        [FakeResponse(status_code=429)] * 4, max_retries=3
    )
    with pytest.raises(RateLimited):
        backend.complete(CompletionRequest(prompt="hi"))
    assert len(session.calls) == 4


def test_http_timeout():
    import requests

    backend, _, _ = _backend([requests.Timeout("slow")] * 4, max_retries=3)
    with pytest.raises(Timeout):
        backend.complete(CompletionRequest(prompt="hi"))


def test_http_malformed_payload():
    backend, _, _ = _backend([FakeResponse(payload={"nope": 1})])
    with pytest.raises(BackendError):
        backend.complete(CompletionRequest(prompt="hi"))


def test_http_non_retryable_status():
    backend, session, _ = _backend([FakeResponse(status_code=400, text="bad request")])
    with pytest.raises(BackendError):
        backend.complete(CompletionRequest(prompt="hi"))
    assert len(session.calls) == 1


def test_from_env(monkeypatch):
    monkeypatch.delenv("CONPARSE_API_BASE", raising=False)
    with pytest.raises(AuthFailure):
        HTTPBackend.from_env()
    monkeypatch.setenv("CONPARSE_API_BASE", "http://api.test")
    monkeypatch.setenv("CONPARSE_API_KEY", "secret")
    monkeypatch.setenv("CONPARSE_MODEL", "m-1")
    backend = HTTPBackend.from_env()
    assert backend.base_url == "http://api.test"
    assert backend.api_key == "secret"
    assert backend.model == "m-1"
