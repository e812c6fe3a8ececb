"""
Batch sampling against a chat-completions endpoint
==================================================

Runs the sampling client against a tiny in-process stub that speaks the
chat-completions JSON shape. The stub fails the first request for one
record with an injected 500, which the client absorbs by retrying. A second
run then skips everything: completed records are never re-requested.
"""

import json
import tempfile
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from sementropy import GenerationConfig, QARecord, RetryPolicy, SamplingJob, write_jsonl
from sementropy.sampling import run_sampling

# --- a stub endpoint: echoes the question back, with one planted failure ----
state = {"requests": 0, "fail_remaining": 1, "lock": threading.Lock()}


class StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):  # noqa: N802 (http.server's fixed casing)
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        question = body["messages"][-1]["content"]
        with state["lock"]:
            state["requests"] += 1
            if "question 2" in question and state["fail_remaining"] > 0:
                state["fail_remaining"] -= 1
                self.send_response(500)
                self.end_headers()
                return
        reply = {
            "choices": [
                {"message": {"content": f"echo of {question} ({i})"}}
                for i in range(body["n"])
            ]
        }
        payload = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):  # keep the demo output clean
        pass


server = ThreadingHTTPServer(("127.0.0.1", 0), StubHandler)
threading.Thread(target=server.serve_forever, daemon=True).start()
endpoint = f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"
print(f"stub endpoint listening at {endpoint}")

# --- a five-record dataset ----------------------------------------------------
workdir = Path(tempfile.mkdtemp(prefix="sementropy-sampling-"))
records = [
    QARecord(id=f"rec-{i}", question=f"question {i}?", reference_answer=f"answer {i}")
    for i in range(5)
]
dataset_path = workdir / "dataset.jsonl"
write_jsonl(dataset_path, records)

# --- first run: greedy pass plus n sampled generations per record -------------
job = SamplingJob(
    dataset_path=str(dataset_path),
    output_path=str(workdir / "samples.jsonl"),
    generation_config=GenerationConfig(
        n_samples=8,
        model_name="stub-model",
        endpoint_url=endpoint,
    ),
    retry=RetryPolicy(max_attempts=3, backoff_base=0.01),
)
summary = run_sampling(job)
print(
    f"\nfirst run: completed {summary.completed}/{summary.total_records}, "
    f"requests sent {summary.requests_sent} "
    f"(5 records x 2 calls, +1 retry for the planted 500)"
)
print(f"per-record attempts: {dict(sorted(summary.attempts.items()))}")

# --- second run: nothing to do, zero requests ---------------------------------
before = state["requests"]
summary2 = run_sampling(job)
print(
    f"\nsecond run: skipped {summary2.skipped}/{summary2.total_records}, "
    f"requests sent {summary2.requests_sent} "
    f"(stub saw {state['requests'] - before} new requests)"
)

# --- the output file holds one line per record, in dataset order ---------------
with open(job.output_path, encoding="utf-8") as fh:
    first = json.loads(fh.readline())
print(f"\nfirst output line: id={first['id']}, greedy={first['greedy_answer']!r},")
print(f"                   {len(first['samples'])} sampled generations")
server.shutdown()
