"""Batch generation collection from a chat-completions-style HTTP endpoint.

For every dataset record the sampler issues two requests: one greedy
answer at low temperature, then one request for n diverse samples at high
temperature (the endpoint's ``n`` parameter). Results stream to a samples
JSONL file in dataset order.

Operational contract:

* resumable - records already complete on disk (nonempty greedy answer and
  exactly n_samples samples) are kept byte-identical and cost zero
  requests on rerun;
* fault-tolerant - failed requests retry with exponential backoff; a
  record that still fails is recorded in the job summary and skipped, the
  job itself continues;
* bounded concurrency - up to ``concurrency`` records in flight; a single
  writer emits whole lines in input order, so the file is never
  interleaved mid-record.

Remote sampling is inherently nondeterministic; determinism claims apply
only to the client's own behavior (tests use a local stub endpoint).
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import requests

from .errors import BackendError, ValidationError
from .records import GenerationConfig, QARecord, load_dataset

logger = logging.getLogger(__name__)

DEFAULT_TOKEN_ENV = "SEMENTROPY_API_TOKEN"


@dataclass(frozen=True)
class RetryPolicy:
    """Exponential-backoff retry settings for endpoint requests."""

    max_attempts: int = 3
    backoff_base: float = 0.5

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValidationError("max_attempts must be >= 1")
        if self.backoff_base < 0:
            raise ValidationError("backoff_base must be >= 0")


@dataclass(frozen=True)
class SamplingJob:
    """One sampling run: where to read, how to generate, where to write."""

    dataset_path: str
    output_path: str
    generation_config: GenerationConfig
    concurrency: int = 4
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    token_env: str = DEFAULT_TOKEN_ENV

    def __post_init__(self) -> None:
        if self.concurrency < 1:
            raise ValidationError("concurrency must be >= 1")
        if not self.generation_config.endpoint_url:
            raise ValidationError("generation_config.endpoint_url must be set for sampling")


@dataclass
class JobSummary:
    """What a sampling run did: counts, per-record attempts, failures."""

    total_records: int = 0
    completed: int = 0
    skipped: int = 0
    requests_sent: int = 0
    attempts: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "total_records": self.total_records,
            "completed": self.completed,
            "skipped": self.skipped,
            "requests_sent": self.requests_sent,
            "attempts": dict(self.attempts),
            "failures": list(self.failures),
        }


class ChatCompletionsClient:
    """Minimal client for a chat-completions-compatible JSON endpoint.

    Request body: ``{model, messages, temperature, top_k, top_p, n}``;
    answers are read from ``choices[*].message.content``. An auth token is
    taken from the environment (Bearer header) when present.
    """

    def __init__(
        self,
        endpoint_url: str,
        model_name: str,
        retry: RetryPolicy = RetryPolicy(),
        timeout: float = 60.0,
        token_env: str = DEFAULT_TOKEN_ENV,
    ) -> None:
        self.endpoint_url = endpoint_url
        self.model_name = model_name
        self.retry = retry
        self.timeout = timeout
        self.token_env = token_env
        self.requests_sent = 0
        self._count_lock = threading.Lock()  # complete() runs on worker threads

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(
        self,
        question: str,
        prompt_template: str,
        temperature: float,
        n: int,
        top_k: int,
        top_p: float,
    ) -> tuple[list[str], int]:
        """Request n completions; returns (answers, attempts_used)."""
        messages = []
        if prompt_template:
            messages.append({"role": "system", "content": prompt_template})
        messages.append({"role": "user", "content": question})
        body = {
            "model": self.model_name,
            "messages": messages,
            "temperature": temperature,
            "top_k": top_k,
            "top_p": top_p,
            "n": n,
        }
        last_error = ""
        for attempt in range(1, self.retry.max_attempts + 1):
            with self._count_lock:
                self.requests_sent += 1
            try:
                resp = requests.post(
                    self.endpoint_url, json=body, headers=self._headers(), timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = f"connection error: {exc}"
            else:
                if resp.status_code == 200:
                    answers = self._parse(resp, n)
                    return answers, attempt
                last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
            if attempt < self.retry.max_attempts:
                time.sleep(self.retry.backoff_base * (2 ** (attempt - 1)))
        raise BackendError(
            f"endpoint failed after {self.retry.max_attempts} attempts: {last_error}"
        )

    @staticmethod
    def _parse(resp, n: int) -> list[str]:
        try:
            payload = resp.json()
        except ValueError:
            raise BackendError("malformed endpoint response: body is not JSON")
        choices = payload.get("choices")
        if not isinstance(choices, list) or len(choices) != n:
            got = len(choices) if isinstance(choices, list) else "none"
            raise BackendError(
                f"malformed endpoint response: expected {n} choices, got {got}"
            )
        answers = []
        for choice in choices:
            try:
                answers.append(str(choice["message"]["content"]))
            except (TypeError, KeyError):
                raise BackendError(
                    "malformed endpoint response: choice missing message.content"
                )
        return answers


def _read_completed_lines(output_path: str, n_samples: int) -> dict[str, str]:
    """Map id -> original output line for records already complete on disk.

    Incomplete or malformed trailing lines (an interrupted run) are dropped
    and their records re-sampled.
    """
    done: dict[str, str] = {}
    if not os.path.exists(output_path):
        return done
    with open(output_path, "r", encoding="utf-8") as fh:
        for line in fh:
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError:
                logger.warning("dropping malformed line in %s (interrupted run?)", output_path)
                continue
            rid = obj.get("id")
            samples = obj.get("samples")
            if (
                rid
                and obj.get("greedy_answer")
                and isinstance(samples, list)
                and len(samples) == n_samples
            ):
                done[str(rid)] = stripped
    return done


def _sample_record(
    record: QARecord, client: ChatCompletionsClient, gc: GenerationConfig
) -> tuple[str, list[str], int]:
    """Fetch 1 greedy + n_samples answers; returns (greedy, samples, attempts).

    ``attempts`` is the largest number of tries any single request needed.
    """
    greedy_answers, attempts_greedy = client.complete(
        question=record.question,
        prompt_template=gc.prompt_template,
        temperature=gc.greedy_temperature,
        n=1,
        top_k=gc.top_k,
        top_p=gc.top_p,
    )
    samples, attempts_samples = client.complete(
        question=record.question,
        prompt_template=gc.prompt_template,
        temperature=gc.sample_temperature,
        n=gc.n_samples,
        top_k=gc.top_k,
        top_p=gc.top_p,
    )
    return greedy_answers[0], samples, max(attempts_greedy, attempts_samples)


def run_sampling(job: SamplingJob) -> JobSummary:
    """Collect generations for every record in the job's dataset.

    The output file is rewritten each run in dataset order: kept lines for
    already-complete records verbatim, fresh lines for the rest. Failures
    leave no line (output count <= input count, equal iff zero failures).
    """
    gc = job.generation_config
    records = list(load_dataset(job.dataset_path, schema="dataset"))
    existing = _read_completed_lines(job.output_path, gc.n_samples)

    summary = JobSummary(total_records=len(records))
    client = ChatCompletionsClient(
        endpoint_url=gc.endpoint_url,
        model_name=gc.model_name,
        retry=job.retry,
        token_env=job.token_env,
    )

    pending = [r for r in records if r.id not in existing]
    summary.skipped = len(records) - len(pending)

    results: dict[str, str] = {}
    if pending:
        with ThreadPoolExecutor(max_workers=job.concurrency) as pool:
            futures = {r.id: pool.submit(_sample_record, r, client, gc) for r in pending}
        for rid, future in futures.items():
            try:
                greedy, samples, attempts = future.result()
            except BackendError as exc:
                attempts = job.retry.max_attempts
                logger.error("record %s failed: %s", rid, exc)
                summary.failures.append({"id": rid, "error": str(exc), "attempts": attempts})
                continue
            summary.attempts[rid] = attempts
            line = {
                "id": rid,
                "greedy_answer": greedy,
                "samples": samples,
                "generation_config": gc.to_json_dict(),
            }
            results[rid] = json.dumps(line, ensure_ascii=False, sort_keys=True)

    # Single writer, dataset order; completed-on-disk lines kept verbatim.
    with open(job.output_path, "w", encoding="utf-8") as fh:
        for record in records:
            line = existing.get(record.id) or results.get(record.id)
            if line is not None:
                fh.write(line)
                fh.write("\n")

    summary.completed = len(existing) + len(results)
    summary.requests_sent = client.requests_sent
    logger.info(
        "sampling done: %d/%d records complete (%d skipped, %d requests, %d failures)",
        summary.completed,
        summary.total_records,
        summary.skipped,
        summary.requests_sent,
        len(summary.failures),
    )
    return summary
