import json

import httpx
import pytest

from codecreativity.client import (
    AuditLog,
    ChatMessage,
    HttpChatClient,
    ModelError,
    ProviderConfig,
    RateLimiter,
    ScriptExhausted,
    StubChatClient,
    load_stub_scripts,
    make_client_factory,
)


# ------------------------------------------------------------------ sessions

def test_stub_replies_in_order_then_exhausts():
    client = StubChatClient(["one", "two"])
    session = client.open_session("sys")
    assert session.send("a") == "one"
    assert session.send("b") == "two"
    assert client.remaining == 0
    with pytest.raises(ScriptExhausted):
        session.send("c")


def test_session_history_alternates_and_is_append_only():
    client = StubChatClient(["r1", "r2"])
    session = client.open_session("sys")
    session.send("q1")
    session.send("q2")
    roles = [m.role for m in session.history]
    assert roles == ["system", "user", "assistant", "user", "assistant"]
    assert session.history[0] == ChatMessage("system", "sys")
    snapshot = session.history
    assert isinstance(snapshot, tuple)  # callers cannot mutate the transcript


def test_sessions_are_independent_threads_of_one_client():
    client = StubChatClient(["r1", "r2", "r3"])
    a = client.open_session("sys-a")
    b = client.open_session("sys-b")
    a.send("q1")
    b.send("q2")
    a.send("q3")
    assert len(a.history) == 5
    assert len(b.history) == 3
    assert a.session_id != b.session_id


def test_one_shot_uses_a_fresh_session_with_single_exchange():
    client = StubChatClient(["only"])
    assert client.one_shot("sys", "query") == "only"
    # A later one_shot cannot see the earlier exchange: its session is new.
    client2 = StubChatClient(["a", "b"])
    client2.one_shot("sys", "first")
    session = client2.open_session("sys")
    assert len(session.history) == 1


def test_audit_log_records_every_exchange_in_wire_order(tmp_path):
    log_path = tmp_path / "audit.jsonl"
    client = StubChatClient(["r1", "r2"], audit_log=AuditLog(log_path))
    session = client.open_session("sys")
    session.send("q1")
    session.send("q2")
    rows = [json.loads(line) for line in log_path.read_text().splitlines()]
    assert [(r["role"], r["content"]) for r in rows] == [
        ("user", "q1"), ("assistant", "r1"), ("user", "q2"), ("assistant", "r2"),
    ]
    assert [r["turn"] for r in rows] == [1, 2, 3, 4]
    assert len({r["session_id"] for r in rows}) == 1
    for row in rows:
        assert set(row) == {"content", "params", "role", "session_id", "timestamp", "turn"}


# -------------------------------------------------------------- rate limiter

def test_rate_limiter_spaces_requests():
    clock_now = [0.0]
    sleeps = []

    def clock():
        return clock_now[0]

    def sleep(seconds):
        sleeps.append(seconds)
        clock_now[0] += seconds

    limiter = RateLimiter(60.0, clock=clock, sleep=sleep)  # one per second
    limiter.acquire()
    limiter.acquire()
    limiter.acquire()
    assert sleeps == [1.0, 1.0]


def test_rate_limiter_does_not_sleep_when_budget_is_free():
    clock_now = [0.0]
    sleeps = []

    def clock():
        return clock_now[0]

    limiter = RateLimiter(60.0, clock=clock, sleep=sleeps.append)
    limiter.acquire()
    clock_now[0] += 10.0
    limiter.acquire()
    assert sleeps == []


def test_rate_limiter_rejects_nonpositive_budget():
    with pytest.raises(ValueError):
        RateLimiter(0)


# ----------------------------------------------------------------- http client

def completion_response(text):
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


def http_client(handler, monkeypatch, **overrides):
    monkeypatch.setenv("OPENAI_API_KEY", "sk-test-credential")
    config = ProviderConfig(provider="openai", model="gpt-test",
                            backoff_seconds=0.01, **overrides)
    return HttpChatClient(config, transport=httpx.MockTransport(handler),
                          sleep=lambda s: None)


def test_http_client_happy_path(monkeypatch):
    seen = {}

    def handler(request):
        seen["payload"] = json.loads(request.content)
        seen["auth"] = request.headers.get("authorization")
        return completion_response("hello there")

    client = http_client(handler, monkeypatch)
    assert client.one_shot("sys", "hi") == "hello there"
    assert seen["auth"] == "Bearer sk-test-credential"
    assert seen["payload"]["model"] == "gpt-test"
    assert seen["payload"]["messages"][0] == {"role": "system", "content": "sys"}
    assert seen["payload"]["messages"][1] == {"role": "user", "content": "hi"}


def test_http_client_retries_transient_failures(monkeypatch):
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) < 3:
            return httpx.Response(500, text="upstream sad")
        return completion_response("recovered")

    client = http_client(handler, monkeypatch)
    assert client.one_shot("sys", "hi") == "recovered"
    assert len(calls) == 3


def test_http_client_retries_rate_limit_responses(monkeypatch):
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) == 1:
            return httpx.Response(429, text="slow down")
        return completion_response("ok")

    client = http_client(handler, monkeypatch)
    assert client.one_shot("sys", "hi") == "ok"
    assert len(calls) == 2


def test_http_client_gives_up_after_max_attempts(monkeypatch):
    def handler(request):
        return httpx.Response(503, text="down")

    client = http_client(handler, monkeypatch, max_attempts=2)
    with pytest.raises(ModelError, match="after 2 attempts"):
        client.one_shot("sys", "hi")


def test_http_client_client_errors_do_not_retry(monkeypatch):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(400, text="bad request")

    client = http_client(handler, monkeypatch)
    with pytest.raises(ModelError, match="HTTP 400"):
        client.one_shot("sys", "hi")
    assert len(calls) == 1


def test_http_client_rejects_malformed_payload(monkeypatch):
    client = http_client(lambda request: httpx.Response(200, json={"nope": True}),
                         monkeypatch)
    with pytest.raises(ModelError, match="malformed"):
        client.one_shot("sys", "hi")


def test_http_client_requires_credential(monkeypatch):
    client = http_client(lambda request: completion_response("x"), monkeypatch)
    monkeypatch.delenv("OPENAI_API_KEY")
    with pytest.raises(ModelError, match="OPENAI_API_KEY"):
        client.one_shot("sys", "hi")


def test_audit_log_never_contains_the_credential(monkeypatch, tmp_path):
    log_path = tmp_path / "audit.jsonl"
    config = ProviderConfig(provider="openai", model="gpt-test")
    monkeypatch.setenv("OPENAI_API_KEY", "sk-super-secret-value")
    client = HttpChatClient(
        config,
        transport=httpx.MockTransport(lambda request: completion_response("fine")),
        sleep=lambda s: None,
        audit_log=AuditLog(log_path),
    )
    client.one_shot("sys", "hi")
    text = log_path.read_text()
    assert "sk-super-secret-value" not in text
    rows = [json.loads(line) for line in text.splitlines()]
    assert rows[0]["params"] == {"model": "gpt-test", "temperature": 0.0,
                                 "max_tokens": 2048}


# ------------------------------------------------------------------ factories

def test_stub_factory_gives_each_problem_its_own_script(tmp_path):
    script_path = tmp_path / "script.json"
    script_path.write_text(json.dumps({
        "problems": {"p1": ["p1-reply"]},
        "default": ["default-reply"],
    }))
    scripts = load_stub_scripts(script_path)
    factory = make_client_factory(ProviderConfig(), scripts=scripts)
    assert factory("p1").one_shot("sys", "q") == "p1-reply"
    assert factory("p2").one_shot("sys", "q") == "default-reply"
    # fresh client per call: scripts do not deplete across problems
    assert factory("p1").one_shot("sys", "q") == "p1-reply"


def test_openai_factory_shares_one_client():
    config = ProviderConfig(provider="openai")
    factory = make_client_factory(config)
    assert factory("p1") is factory("p2")


def test_unknown_provider_is_rejected():
    with pytest.raises(ValueError):
        make_client_factory(ProviderConfig(provider="oracle-9000"))


def test_load_stub_scripts_validates_shape(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nothing": []}))
    with pytest.raises(ValueError):
        load_stub_scripts(bad)
