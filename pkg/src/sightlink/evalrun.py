"""Dataset evaluation runs against a provider or a live gateway.

Loads an LVSQA dataset, submits each (image, question) to the target,
collects model answers, and scores them into the per-category metric report.
Answers may be collected in parallel; scoring happens after the fact, so
reports are independent of completion order.
"""

from __future__ import annotations

import base64
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .dataset import QAEntry, load_dataset
from .metrics.report import MetricReport, score_corpus
from .providers import (
    AnswerProvider,
    MockProvider,
    OracleProvider,
    ProviderError,
    ProviderRegistry,
)

logger = logging.getLogger(__name__)


class TargetUnreachableError(Exception):
    pass


@dataclass
class EvalRunConfig:
    dataset_path: Path
    image_root: Path
    target: str  # "provider:<name>" or "gateway:<url>"
    session_mode: str = "fresh_per_question"  # or "per_image"
    parallel: int = 1
    seed: int = 0
    cider_scale: float = 1.0
    out_path: Path | None = None
    table: bool = False
    registry: ProviderRegistry | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.dataset_path = Path(self.dataset_path)
        self.image_root = Path(self.image_root)
        if self.session_mode not in ("fresh_per_question", "per_image"):
            raise ValueError(f"unknown session mode {self.session_mode!r}")
        kind, _, rest = self.target.partition(":")
        if kind not in ("provider", "gateway") or not rest:
            raise ValueError(
                f"target must be provider:<name> or gateway:<url>, got {self.target!r}"
            )


class _ProviderTarget:
    def __init__(self, provider: AnswerProvider):
        self._provider = provider

    def start(self) -> None:
        try:
            self._provider.load()
        except Exception as exc:
            raise TargetUnreachableError(f"provider failed to load: {exc}") from exc

    def finish(self) -> None:
        try:
            self._provider.close()
        except Exception:
            logger.exception("provider close failed")

    def ask(self, jpeg: bytes, question: str, session_key: str | None) -> str:
        try:
            return self._provider.answer(jpeg, question, [])
        except Exception as exc:
            raise ProviderError(str(exc)) from exc


class _GatewayTarget:
    def __init__(self, url: str, client: httpx.Client | None = None):
        self._client = client or httpx.Client(base_url=url, timeout=30.0)
        self._sessions: dict[str, str] = {}
        import threading

        self._lock = threading.Lock()

    def start(self) -> None:
        try:
            self._client.get("/frames/latest")
            response = self._client.post("/load_model", json={})
        except httpx.HTTPError as exc:
            raise TargetUnreachableError(f"gateway unreachable: {exc}") from exc
        if response.status_code >= 400:
            raise TargetUnreachableError(
                f"gateway /load_model returned {response.status_code}: {response.text}"
            )

    def finish(self) -> None:
        pass  # the gateway keeps its model loaded for other clients

    def ask(self, jpeg: bytes, question: str, session_key: str | None) -> str:
        payload = {
            "image": base64.b64encode(jpeg).decode("ascii"),
            "prompt": question,
        }
        if session_key is not None:
            with self._lock:
                session_id = self._sessions.get(session_key)
            if session_id is not None:
                payload["session_id"] = session_id
        response = self._client.post("/process_image", json=payload)
        if response.status_code >= 400:
            raise ProviderError(f"gateway returned {response.status_code}: {response.text}")
        body = response.json()
        if session_key is not None:
            with self._lock:
                self._sessions.setdefault(session_key, body["session_id"])
        return body["answer"]


def _make_target(config: EvalRunConfig, gateway_client: httpx.Client | None):
    kind, _, rest = config.target.partition(":")
    if kind == "gateway":
        return _GatewayTarget(rest, client=gateway_client)
    if rest == "oracle":
        provider = OracleProvider.from_dataset(config.dataset_path, config.image_root)
    elif rest == "mock":
        provider = MockProvider()
    elif config.registry is not None:
        provider = config.registry.create(rest)
    else:
        raise TargetUnreachableError(f"no provider named {rest!r} available to the runner")
    return _ProviderTarget(provider)


def run_eval(config: EvalRunConfig, gateway_client: httpx.Client | None = None) -> MetricReport:
    """Executes the run and returns (and optionally writes) the report.

    The dataset file is never mutated; per-item transport failures score an
    empty answer and are counted in the report metadata.
    """
    entries = load_dataset(config.dataset_path)
    target = _make_target(config, gateway_client)
    target.start()
    failures = 0

    def submit(batch: list[QAEntry]) -> int:
        failed = 0
        for entry in batch:
            session_key = (
                entry.image_file if config.session_mode == "per_image" else None
            )
            try:
                jpeg = (config.image_root / entry.image_file).read_bytes()
                entry.model_answer = target.ask(jpeg, entry.question, session_key)
            except (OSError, ProviderError, httpx.HTTPError) as exc:
                logger.warning("item %s/%s failed: %s", entry.image_file, entry.category.value, exc)
                entry.model_answer = ""
                failed += 1
        return failed

    # per_image keeps one image's questions in order on one session; batches
    # then parallelize across images rather than across questions
    if config.session_mode == "per_image":
        batches: dict[str, list[QAEntry]] = {}
        for entry in entries:
            batches.setdefault(entry.image_file, []).append(entry)
        work = list(batches.values())
    else:
        work = [[entry] for entry in entries]

    if config.parallel > 1:
        with ThreadPoolExecutor(max_workers=config.parallel) as pool:
            failures = sum(pool.map(submit, work))
    else:
        failures = sum(submit(batch) for batch in work)

    target.finish()
    report = score_corpus(entries, cider_scale=config.cider_scale)
    report.corpus_meta["run"] = {
        "dataset": config.dataset_path.name,
        "target": config.target,
        "session_mode": config.session_mode,
        "seed": config.seed,
        "parallel": config.parallel,
        "items_total": len(entries),
        "transport_failures": failures,
    }
    if config.out_path is not None:
        Path(config.out_path).write_text(report.to_json(), encoding="utf-8")
    return report
