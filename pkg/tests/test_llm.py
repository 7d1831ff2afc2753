import math

import pytest

from sopflow.errors import BackendError, ScriptExhaustedError, ValidationError
from sopflow.kb import cosine_similarity
from sopflow.llm import (
    BackendConfig,
    ChatMessage,
    RemoteBackend,
    ScriptEntry,
    hash_embedding,
    make_backend,
)


def msgs(*contents):
    return [ChatMessage("user", c) for c in contents]


class TestChatMessage:
    def test_roles(self):
        with pytest.raises(ValidationError):
            ChatMessage("wizard", "hello")

    def test_empty_user_content_rejected(self):
        with pytest.raises(ValidationError):
            ChatMessage("user", "   ")
        # assistant may be empty (some models return empty strings)
        ChatMessage("assistant", "")


class TestScriptedComplete:
    def test_wildcard_matches_anything(self):
        backend = make_backend(BackendConfig(script=[ScriptEntry("*", "OK")]))
        assert backend.complete(msgs("whatever")) == "OK"

    def test_no_entries_raises_exhausted(self):
        backend = make_backend(BackendConfig())
        with pytest.raises(ScriptExhaustedError):
            backend.complete(msgs("anything"))

    def test_keyed_entries_fire_in_declaration_order(self):
        backend = make_backend(BackendConfig(script=[
            ScriptEntry("alpha", "first"),
            ScriptEntry("beta", "second"),
        ]))
        # the prompt contains only the second key, so the second entry fires
        assert backend.complete(msgs("contains beta only")) == "second"

    def test_first_match_wins(self):
        backend = make_backend(BackendConfig(script=[
            ScriptEntry("alpha", "first"),
            ScriptEntry("beta", "second"),
        ]))
        assert backend.complete(msgs("alpha and beta present")) == "first"

    def test_consume_once_advances(self):
        backend = make_backend(BackendConfig(script=[
            ScriptEntry("key", "one", consume_once=True),
            ScriptEntry("key", "two", consume_once=True),
        ]))
        assert backend.complete(msgs("key")) == "one"
        assert backend.complete(msgs("key")) == "two"
        with pytest.raises(ScriptExhaustedError):
            backend.complete(msgs("key"))

    def test_matches_against_all_message_contents(self):
        backend = make_backend(BackendConfig(script=[ScriptEntry("system marker", "hit")]))
        messages = [ChatMessage("system", "system marker"), ChatMessage("user", "question")]
        assert backend.complete(messages) == "hit"

    def test_replay_is_pure(self):
        script = [ScriptEntry("a", "1", consume_once=True), ScriptEntry("*", "2")]
        transcript = ["has a", "has a", "other"]
        outputs = []
        for _ in range(2):
            backend = make_backend(BackendConfig(script=list(script)))
            outputs.append([backend.complete(msgs(p)) for p in transcript])
        assert outputs[0] == outputs[1] == ["1", "2", "2"]

    def test_empty_messages_rejected(self):
        backend = make_backend(BackendConfig(script=[ScriptEntry("*", "x")]))
        with pytest.raises(ValidationError):
            backend.complete([])


class TestScriptedEmbed:
    def test_deterministic(self):
        backend = make_backend(BackendConfig())
        assert backend.embed("some text").values == backend.embed("some text").values

    def test_unit_norm(self):
        vec = make_backend(BackendConfig()).embed("normalize me")
        assert math.sqrt(sum(v * v for v in vec.values)) == pytest.approx(1.0, abs=1e-6)

    def test_dimension_is_configured(self):
        assert make_backend(BackendConfig(embed_dim=16)).embed("x").dim == 16

    def test_distinct_strings_not_parallel(self):
        # frozen from a hand evaluation of the hash embedding during development
        a = hash_embedding("cpu usage is high", 64, 0)
        b = hash_embedding("memory pressure climbing", 64, 0)
        assert cosine_similarity(a, b) == pytest.approx(-0.03781062646125981, abs=1e-9)
        assert cosine_similarity(a, b) < 1.0

    def test_seed_changes_embedding(self):
        a = hash_embedding("same text", 64, 0)
        b = hash_embedding("same text", 64, 1)
        assert a.values != b.values

    def test_override_takes_precedence(self):
        backend = make_backend(BackendConfig(embed_overrides={"pinned": (1.0, 0.0)},
                                             embed_dim=2))
        assert backend.embed("pinned").values == (1.0, 0.0)

    def test_empty_text_rejected(self):
        with pytest.raises(ValidationError):
            make_backend(BackendConfig()).embed("")


def test_only_the_backend_module_touches_the_network():
    # every prompt and embedding must round-trip through this module; nothing
    # else in the package may import an HTTP client
    import pathlib
    import sopflow
    package_root = pathlib.Path(sopflow.__file__).parent
    offenders = []
    for path in package_root.rglob("*.py"):
        if path.name == "llm.py":
            continue
        text = path.read_text()
        if "import requests" in text or "import httpx" in text or "import urllib" in text:
            offenders.append(path.name)
    assert offenders == []


class TestRemoteBackend:
    def _config(self):
        return BackendConfig(backend_kind="remote", endpoint="https://llm.example/v1",
                             model="test-model")

    def test_missing_credential_is_backend_error(self, monkeypatch):
        monkeypatch.delenv("SOPFLOW_API_KEY", raising=False)
        with pytest.raises(BackendError):
            RemoteBackend(self._config()).complete(msgs("hi"))

    def test_completion_request_shape(self, monkeypatch):
        monkeypatch.setenv("SOPFLOW_API_KEY", "k")
        seen = {}

        class FakeResponse:
            status_code = 200
            headers = {}

            def json(self):
                return {"choices": [{"message": {"content": "reply text"}}]}

        def fake_post(url, json=None, headers=None, timeout=None):
            seen.update(url=url, body=json, headers=headers)
            return FakeResponse()

        monkeypatch.setattr("sopflow.llm.requests.post", fake_post)
        backend = RemoteBackend(self._config())
        reply = backend.complete([ChatMessage("system", "s"), ChatMessage("user", "u")])
        assert reply == "reply text"
        assert seen["url"] == "https://llm.example/v1/chat/completions"
        assert seen["body"]["model"] == "test-model"
        assert seen["body"]["temperature"] == 0.0
        assert seen["body"]["messages"][1] == {"role": "user", "content": "u"}
        assert seen["headers"]["Authorization"] == "Bearer k"

    def test_error_status_carries_retry_hint(self, monkeypatch):
        monkeypatch.setenv("SOPFLOW_API_KEY", "k")

        class FakeResponse:
            status_code = 429
            headers = {"Retry-After": "2.5"}
            text = "slow down"

        monkeypatch.setattr("sopflow.llm.requests.post",
                            lambda *a, **kw: FakeResponse())
        with pytest.raises(BackendError) as excinfo:
            RemoteBackend(self._config()).complete(msgs("hi"))
        assert excinfo.value.retry_after_s == 2.5

    def test_embedding_route(self, monkeypatch):
        monkeypatch.setenv("SOPFLOW_API_KEY", "k")

        class FakeResponse:
            status_code = 200
            headers = {}

            def json(self):
                return {"data": [{"embedding": [0.6, 0.8]}]}

        monkeypatch.setattr("sopflow.llm.requests.post",
                            lambda *a, **kw: FakeResponse())
        vec = RemoteBackend(self._config()).embed("text")
        assert vec.values == (0.6, 0.8)

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            BackendConfig(backend_kind="remote").validate()
        with pytest.raises(ValidationError):
            BackendConfig(temperature=-1).validate()
        with pytest.raises(ValidationError):
            BackendConfig(backend_kind="psychic").validate()
