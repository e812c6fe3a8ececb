"""Shared fixtures: local stub servers for the chat endpoint and the scorer service."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest


class ChatStubState:
    """Mutable state for the chat-completions stub: request log and fail plans."""

    def __init__(self) -> None:
        self.lock = threading.Lock()
        self.requests: list[dict] = []
        self.fail_plan: dict[str, int] = {}  # question -> number of 500s to serve first
        self.malform: set[str] = set()  # questions answered with a bad body

    @property
    def request_count(self) -> int:
        with self.lock:
            return len(self.requests)


def _make_chat_handler(state: ChatStubState):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # silence test output
            pass

        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length))
            question = body["messages"][-1]["content"]
            with state.lock:
                state.requests.append({"body": body, "headers": dict(self.headers)})
                should_fail = state.fail_plan.get(question, 0) > 0
                if should_fail:
                    state.fail_plan[question] -= 1
            if should_fail:
                self.send_response(500)
                self.end_headers()
                self.wfile.write(b"injected failure")
                return
            if question in state.malform:
                payload = json.dumps({"choices": []}).encode()
            else:
                n = body["n"]
                temp = body["temperature"]
                choices = [
                    {"message": {"content": f"reply to {question} at t{temp} variant {i}"}}
                    for i in range(n)
                ]
                payload = json.dumps({"choices": choices}).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

    return Handler


@pytest.fixture
def chat_stub():
    state = ChatStubState()
    server = ThreadingHTTPServer(("127.0.0.1", 0), _make_chat_handler(state))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield state, f"http://127.0.0.1:{server.server_port}"
    finally:
        server.shutdown()
        server.server_close()


class ScorerStubState:
    """Request counters for the scorer-service stub."""

    def __init__(self) -> None:
        self.lock = threading.Lock()
        self.calls: dict[str, int] = {"/embed": 0, "/nli": 0, "/rerank": 0}
        self.items: dict[str, int] = {"/embed": 0, "/nli": 0, "/rerank": 0}


def stub_embedding(text: str) -> list[float]:
    """Deterministic 2-vector per text (test oracle for order checks)."""
    return [float(len(text) + 1), float(sum(map(ord, text)) % 97 + 1)]


def stub_nli_logits(premise: str, hypothesis: str) -> dict:
    entail = 3.0 if premise == hypothesis else -1.0
    return {"entail": entail, "neutral": 0.0, "contra": -entail}


def stub_rerank_logit(query: str, candidate: str) -> float:
    return float(len(set(query.split()) & set(candidate.split())))


def _make_scorer_handler(state: ScorerStubState):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _reply(self, obj, status=200):
            payload = json.dumps(obj).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def do_GET(self):
            if self.path == "/health":
                self._reply({"models": {"embed": "stub-embed", "nli": "stub-nli", "rerank": "stub-rerank"}})
            else:
                self._reply({"error": "not found"}, status=404)

        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length))
            if self.path == "/embed":
                texts = body["texts"]
                with state.lock:
                    state.calls["/embed"] += 1
                    state.items["/embed"] += len(texts)
                vectors = [stub_embedding(t) for t in texts]
                self._reply({"vectors": vectors, "dim": 2})
            elif self.path == "/nli":
                pairs = body["pairs"]
                with state.lock:
                    state.calls["/nli"] += 1
                    state.items["/nli"] += len(pairs)
                logits = [stub_nli_logits(p["premise"], p["hypothesis"]) for p in pairs]
                self._reply({"logits": logits})
            elif self.path == "/rerank":
                candidates = body["candidates"]
                with state.lock:
                    state.calls["/rerank"] += 1
                    state.items["/rerank"] += len(candidates)
                logits = [stub_rerank_logit(body["query"], c) for c in candidates]
                self._reply({"logits": logits})
            else:
                self._reply({"error": "not found"}, status=404)

    return Handler


@pytest.fixture
def scorer_stub():
    state = ScorerStubState()
    server = ThreadingHTTPServer(("127.0.0.1", 0), _make_scorer_handler(state))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield state, f"http://127.0.0.1:{server.server_port}"
    finally:
        server.shutdown()
        server.server_close()
