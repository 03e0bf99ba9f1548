import json

import httpx
import pytest

from ucsjudge.errors import ConfigurationError, FixtureMissingError, GatewayError
from ucsjudge.gateway import (
    API_KEY_ENV,
    CompletionRequest,
    DiskCache,
    Gateway,
    RemoteBackend,
    ReplayBackend,
    cache_key,
    mock_backend,
)

GOLDEN_REQUEST = CompletionRequest("You are a judge.", "Is the sky blue?", "golden-model")
# sha256 of the hand-written canonical JSON of GOLDEN_REQUEST, frozen
GOLDEN_DIGEST = "66b468121b34702887802be80dbeaf5bde871940be00fd1355480c899a0c95da"


def test_cache_key_golden():
    assert cache_key(GOLDEN_REQUEST) == GOLDEN_DIGEST


def test_cache_key_sensitivity():
    base = CompletionRequest("s", "u")
    assert cache_key(base) == cache_key(CompletionRequest("s", "u"))
    variants = [
        CompletionRequest("s", "u", top_p=0.9),
        CompletionRequest("s", "u", temperature=0.5),
        CompletionRequest("s", "u", max_tokens=10),
        CompletionRequest("s", "u", model_id="other"),
        CompletionRequest("s2", "u"),
        CompletionRequest("s", "u2"),
    ]
    digests = {cache_key(v) for v in variants}
    assert len(digests) == len(variants) and cache_key(base) not in digests


def test_request_defaults_and_validation():
    r = CompletionRequest("s", "u")
    assert r.temperature == 0.0 and r.top_p == 1.0 and r.max_tokens == 2048
    for kwargs in ({"temperature": -1}, {"top_p": 0.0}, {"top_p": 1.5}, {"max_tokens": 0}):
        with pytest.raises(ValueError):
            CompletionRequest("s", "u", **kwargs)
    with pytest.raises(ValueError):
        CompletionRequest("", "u")


def test_mock_scripted_text():
    text = "<concepts><concept1>A</concept1></concepts>"
    gw = Gateway(mock_backend(lambda req: text))
    res = gw.ask("s", "u")
    assert res.text == text and res.backend == "mock" and not res.cache_hit


def test_mock_constant_and_non_text():
    gw = Gateway(mock_backend(lambda req: "same"))
    assert gw.ask("a", "b").text == gw.ask("c", "d").text == "same"
    with pytest.raises(ConfigurationError):
        Gateway(mock_backend(lambda req: 42)).ask("s", "u")
    with pytest.raises(ConfigurationError):
        mock_backend("not callable")


def test_cache_hit_is_byte_identical(tmp_path):
    calls = []

    def plan(req):
        calls.append(req)
        return "héllo\nwörld"

    gw = Gateway(mock_backend(plan), cache_dir=tmp_path)
    first = gw.ask("s", "u")
    second = gw.ask("s", "u")
    assert not first.cache_hit and second.cache_hit
    assert first.text == second.text and len(calls) == 1
    assert gw.stats.requests == 2 and gw.stats.backend_calls == 1 and gw.stats.cache_hits == 1


def test_cache_layout_and_meta(tmp_path):
    gw = Gateway(mock_backend(lambda r: "x"), cache_dir=tmp_path, model_id="m")
    gw.ask("s", "u")
    digest = cache_key(gw.request("s", "u"))
    assert (tmp_path / digest[:2] / f"{digest}.txt").read_text() == "x"
    meta = json.loads((tmp_path / digest[:2] / f"{digest}.meta").read_text())
    assert meta["model_id"] == "m" and meta["user_prompt"] == "u"
    assert not list(tmp_path.rglob(".tmp-*"))


def test_replay_serves_fixtures_and_misses(tmp_path):
    req = CompletionRequest("s", "u")
    DiskCache(tmp_path).put(cache_key(req), "fixture", req)
    gw = Gateway(ReplayBackend(tmp_path))
    res = gw.ask("s", "u")
    assert res.text == "fixture" and res.backend == "replay"
    with pytest.raises(FixtureMissingError):
        gw.ask("s", "unseen")


def _remote(handler, **kw):
    sleeps = []
    be = RemoteBackend("http://llm.test/v1/chat/completions", api_key="k",
                       client=httpx.Client(transport=httpx.MockTransport(handler)), sleep=sleeps.append, **kw)
    return be, sleeps


def _ok(text="hi", finish="stop"):
    return httpx.Response(200, json={"choices": [{"message": {"content": text}, "finish_reason": finish}],
                                     "usage": {"prompt_tokens": 3, "completion_tokens": 1}})


def test_remote_payload_and_parse():
    seen = []

    def handler(request):
        seen.append(request)
        return _ok()

    be, _ = _remote(handler)
    res = be.complete(CompletionRequest("sys", "usr", "model-x"))
    body = json.loads(seen[0].content)
    assert body["messages"] == [{"role": "system", "content": "sys"}, {"role": "user", "content": "usr"}]
    assert body["temperature"] == 0.0 and body["top_p"] == 1.0 and body["model"] == "model-x"
    assert seen[0].headers["authorization"] == "Bearer k"
    assert res.text == "hi" and res.prompt_tokens == 3 and res.backend == "remote"


def test_remote_retries_5xx_with_backoff():
    codes = iter([500, 502, 503])

    def handler(request):
        code = next(codes, 200)
        return _ok() if code == 200 else httpx.Response(code)

    be, sleeps = _remote(handler)
    assert be.complete(CompletionRequest("s", "u")).text == "hi"
    assert sleeps == [1.0, 2.0, 4.0]


def test_remote_gives_up_with_attempt_count():
    def handler(request):
        raise httpx.ConnectError("down")

    be, sleeps = _remote(handler)
    with pytest.raises(GatewayError) as ei:
        be.complete(CompletionRequest("s", "u"))
    assert ei.value.attempts == 4 and sleeps == [1.0, 2.0, 4.0]


def test_remote_4xx_fails_fast():
    be, sleeps = _remote(lambda r: httpx.Response(401, text="no"))
    with pytest.raises(GatewayError) as ei:
        be.complete(CompletionRequest("s", "u"))
    assert ei.value.attempts == 1 and sleeps == []


def test_truncated_completion_flagged_not_cached(tmp_path):
    be, _ = _remote(lambda r: _ok("partial", finish="length"))
    gw = Gateway(be, cache_dir=tmp_path)
    res = gw.ask("s", "u")
    assert res.truncated and res.warning
    assert cache_key(gw.request("s", "u")) not in DiskCache(tmp_path)


def test_api_key_from_env(monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "secret")
    assert RemoteBackend("http://x").api_key == "secret"


def test_complete_many_keeps_order():
    gw = Gateway(mock_backend(lambda r: r.user_prompt.upper()), concurrency=4)
    reqs = [gw.request("s", f"u{i}") for i in range(20)]
    assert [r.text for r in gw.complete_many(reqs)] == [f"U{i}" for i in range(20)]


def test_concurrency_bound():
    with pytest.raises(ConfigurationError):
        Gateway(mock_backend(lambda r: ""), concurrency=0)
