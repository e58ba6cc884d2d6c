"""Wire-format contract of the HTTP backend, against a local test server."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from crefine.backend import BackendEndpoint, ChatRequest, HttpBackend, SamplingParams
from crefine.errors import (
    BackendRejectedError,
    BackendUnavailableError,
    MalformedResponseError,
)


def chat_response(*contents: str) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": c}} for c in contents]}


class ScriptedServer:
    """HTTP server that replays a scripted list of (status, payload) answers."""

    def __init__(self):
        self.script = []
        self.requests = []
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length)) if length else {}
                with outer._lock:
                    outer.requests.append(
                        {"path": self.path, "headers": dict(self.headers), "body": body}
                    )
                    status, payload = (
                        outer.script.pop(0) if outer.script else (200, chat_response("ok"))
                    )
                data = json.dumps(payload).encode() if isinstance(payload, dict) else payload.encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    @property
    def base_url(self) -> str:
        host, port = self.server.server_address
        return f"http://{host}:{port}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def server():
    srv = ScriptedServer()
    yield srv
    srv.close()


def backend_for(server, **kwargs) -> HttpBackend:
    endpoint = BackendEndpoint(
        base_url=server.base_url,
        model_name="test-model",
        timeout=5.0,
        **kwargs,
    )
    return HttpBackend(endpoint, sleep=lambda _: None)


class TestWireFormat:
    def test_nucleus_request_body(self, server):
        server.script.append((200, chat_response("a", "b", "c")))
        backend = backend_for(server)
        out = backend.complete(
            ChatRequest("sys text", "user text", SamplingParams.nucleus(), 3)
        )
        assert out == ["a", "b", "c"]
        body = server.requests[0]["body"]
        assert server.requests[0]["path"] == "/chat/completions"
        assert body["model"] == "test-model"
        assert body["messages"] == [
            {"role": "system", "content": "sys text"},
            {"role": "user", "content": "user text"},
        ]
        assert body["temperature"] == 0.9
        assert body["top_p"] == 0.95
        assert body["n"] == 3

    def test_greedy_body_has_no_temperature(self, server):
        server.script.append((200, chat_response("only")))
        backend = backend_for(server)
        out = backend.complete(ChatRequest("s", "u", SamplingParams.greedy(), 1))
        assert out == ["only"]
        body = server.requests[0]["body"]
        assert "temperature" not in body
        assert "top_p" not in body
        assert body["n"] == 1

    def test_bearer_token_header(self, server):
        server.script.append((200, chat_response("x")))
        backend = backend_for(server, auth_token="sekrit")
        backend.complete(ChatRequest("s", "u", SamplingParams.greedy(), 1))
        assert server.requests[0]["headers"].get("Authorization") == "Bearer sekrit"

    def test_no_auth_header_without_token(self, server):
        server.script.append((200, chat_response("x")))
        backend_for(server).complete(ChatRequest("s", "u", SamplingParams.greedy(), 1))
        assert "Authorization" not in server.requests[0]["headers"]


class TestRetries:
    def test_retries_5xx_then_succeeds(self, server):
        server.script.extend([(500, {"err": 1}), (503, {"err": 2}), (200, chat_response("ok"))])
        backend = backend_for(server, max_retries=3)
        assert backend.complete(ChatRequest("s", "u", SamplingParams.greedy(), 1)) == ["ok"]
        assert len(server.requests) == 3

    def test_retries_429(self, server):
        server.script.extend([(429, {"err": 1}), (200, chat_response("ok"))])
        backend = backend_for(server, max_retries=1)
        assert backend.complete(ChatRequest("s", "u", SamplingParams.greedy(), 1)) == ["ok"]

    def test_rejected_after_retry_budget(self, server):
        server.script.extend([(500, {"err": 1})] * 3)
        backend = backend_for(server, max_retries=2)
        with pytest.raises(BackendRejectedError) as excinfo:
            backend.complete(ChatRequest("s", "u", SamplingParams.greedy(), 1))
        assert excinfo.value.status == 500
        assert len(server.requests) == 3

    def test_request_not_mutated_between_retries(self, server):
        server.script.extend([(500, {}), (200, chat_response("ok"))])
        backend = backend_for(server, max_retries=1)
        backend.complete(ChatRequest("s", "u", SamplingParams.nucleus(), 2))
        assert server.requests[0]["body"] == server.requests[1]["body"]

    def test_non_retryable_4xx_raises_with_status_and_body(self, server):
        server.script.append((404, {"error": "nope"}))
        backend = backend_for(server)
        with pytest.raises(BackendRejectedError) as excinfo:
            backend.complete(ChatRequest("s", "u", SamplingParams.greedy(), 1))
        assert excinfo.value.status == 404
        assert "nope" in excinfo.value.body
        assert len(server.requests) == 1

    def test_transport_failure_exhausts_to_unavailable(self):
        endpoint = BackendEndpoint(
            base_url="http://127.0.0.1:9",  # discard port: nothing listens
            model_name="m",
            timeout=0.2,
            max_retries=1,
        )
        backend = HttpBackend(endpoint, sleep=lambda _: None)
        with pytest.raises(BackendUnavailableError):
            backend.complete(ChatRequest("s", "u", SamplingParams.greedy(), 1))


class TestMultiCompletion:
    def test_n_rejected_falls_back_to_sequential(self, server):
        server.script.extend(
            [
                (400, {"error": "n not supported"}),
                (200, chat_response("one")),
                (200, chat_response("two")),
                (200, chat_response("three")),
            ]
        )
        backend = backend_for(server)
        out = backend.complete(ChatRequest("s", "u", SamplingParams.nucleus(), 3))
        assert out == ["one", "two", "three"]
        assert [r["body"]["n"] for r in server.requests] == [3, 1, 1, 1]

    def test_short_choice_list_topped_up(self, server):
        server.script.extend(
            [(200, chat_response("only")), (200, chat_response("extra"))]
        )
        backend = backend_for(server)
        out = backend.complete(ChatRequest("s", "u", SamplingParams.nucleus(), 2))
        assert out == ["only", "extra"]

    def test_single_request_400_still_raises(self, server):
        server.script.append((400, {"error": "bad"}))
        backend = backend_for(server)
        with pytest.raises(BackendRejectedError):
            backend.complete(ChatRequest("s", "u", SamplingParams.greedy(), 1))


class TestMalformedResponses:
    def test_empty_choices(self, server):
        server.script.append((200, {"choices": []}))
        with pytest.raises(MalformedResponseError):
            backend_for(server).complete(ChatRequest("s", "u", SamplingParams.greedy(), 1))

    def test_non_json_payload(self, server):
        server.script.append((200, "this is not json"))
        with pytest.raises(MalformedResponseError):
            backend_for(server).complete(ChatRequest("s", "u", SamplingParams.greedy(), 1))

    def test_choice_without_content(self, server):
        server.script.append((200, {"choices": [{"message": {}}]}))
        with pytest.raises(MalformedResponseError):
            backend_for(server).complete(ChatRequest("s", "u", SamplingParams.greedy(), 1))
