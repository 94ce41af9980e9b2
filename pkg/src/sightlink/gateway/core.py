"""Thread-safe gateway state: model lifecycle, chat sessions, frame store.

The HTTP layer in app.py is a thin shell over GatewayCore so every invariant
here is testable without a server. All methods may be called from any thread;
the lifecycle serializes its transitions, answer calls run concurrently.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import logging
import queue
import threading
import time
import uuid
from collections import deque
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum

from .. import providers
from ..providers import Message, ProviderRegistry
from ..transport import (
    JPEG_EOI,
    JPEG_SOI,
    AssemblyState,
    FrameAssembly,
    TransportError,
    deserialize_chunk,
)

logger = logging.getLogger(__name__)

DEFAULT_PORT = 54345
DEFAULT_INGEST_PORT = DEFAULT_PORT + 1


class GatewayError(Exception):
    http_status = 500
    code = "gateway_error"


class ModelNotLoadedError(GatewayError):
    http_status = 409
    code = "model_not_loaded"


class BadBase64Error(GatewayError):
    http_status = 400
    code = "bad_base64"


class NotAJpegError(GatewayError):
    http_status = 400
    code = "not_a_jpeg"


class EmptyHistoryError(GatewayError):
    http_status = 400
    code = "empty_history"


class UnknownProviderError(GatewayError):
    http_status = 404
    code = "unknown_provider"


class ProviderFailureError(GatewayError):
    http_status = 502
    code = "provider_failure"


class LifecycleState(Enum):
    UNLOADED = "unloaded"
    LOADING = "loading"
    LOADED = "loaded"
    CLOSING = "closing"


VALID_TRANSITIONS = {
    (LifecycleState.UNLOADED, LifecycleState.LOADING),
    (LifecycleState.LOADING, LifecycleState.LOADED),
    (LifecycleState.LOADING, LifecycleState.UNLOADED),  # provider init failed
    (LifecycleState.LOADED, LifecycleState.CLOSING),
    (LifecycleState.CLOSING, LifecycleState.UNLOADED),
}


class ModelLifecycle:
    """Unloaded -> Loading -> Loaded -> Closing -> Unloaded, nothing else.

    close() drains: it waits for in-flight answer calls up to drain_timeout,
    after which the stragglers are marked abandoned and their requests fail
    with ProviderFailureError. The transition log exists for interleaving
    tests to audit.
    """

    def __init__(self, registry: ProviderRegistry, drain_timeout: float = 5.0):
        self._registry = registry
        self._drain_timeout = drain_timeout
        self._cond = threading.Condition()
        self._state = LifecycleState.UNLOADED
        self._provider = None
        self._provider_id: str | None = None
        self._inflight: set[int] = set()
        self._abandoned: set[int] = set()
        self._next_token = 0
        self.transitions: list[tuple[LifecycleState, LifecycleState]] = []

    @property
    def state(self) -> LifecycleState:
        with self._cond:
            return self._state

    @property
    def provider_id(self) -> str | None:
        with self._cond:
            return self._provider_id

    @property
    def inflight_count(self) -> int:
        with self._cond:
            return len(self._inflight)

    def _transition(self, new_state: LifecycleState) -> None:
        self.transitions.append((self._state, new_state))
        self._state = new_state

    def load(self, provider_id: str | None = None) -> dict:
        with self._cond:
            while self._state in (LifecycleState.LOADING, LifecycleState.CLOSING):
                self._cond.wait()
            if self._state is LifecycleState.LOADED:
                return {
                    "loaded": True,
                    "already_loaded": True,
                    "provider_id": self._provider_id,
                }
            name = provider_id or self._registry.default_name
            try:
                provider = self._registry.create(name)
            except providers.UnknownProviderError as exc:
                raise UnknownProviderError(str(exc)) from exc
            self._transition(LifecycleState.LOADING)
        try:
            provider.load()
        except Exception as exc:
            with self._cond:
                self._transition(LifecycleState.UNLOADED)
                self._cond.notify_all()
            raise ProviderFailureError(f"provider {name!r} failed to load: {exc}") from exc
        with self._cond:
            self._provider = provider
            self._provider_id = name
            self._transition(LifecycleState.LOADED)
            self._cond.notify_all()
        return {"loaded": True, "already_loaded": False, "provider_id": name}

    def acquire(self) -> tuple[int, object]:
        """Admits an answer call; only possible in Loaded."""
        with self._cond:
            if self._state is not LifecycleState.LOADED:
                raise ModelNotLoadedError(f"model is {self._state.value}")
            token = self._next_token
            self._next_token += 1
            self._inflight.add(token)
            return token, self._provider

    def release(self, token: int) -> bool:
        """Ends an answer call; True means close() already gave up on it."""
        with self._cond:
            self._inflight.discard(token)
            abandoned = token in self._abandoned
            self._abandoned.discard(token)
            self._cond.notify_all()
            return abandoned

    def close(self) -> dict:
        with self._cond:
            while self._state in (LifecycleState.LOADING, LifecycleState.CLOSING):
                self._cond.wait()
            if self._state is LifecycleState.UNLOADED:
                return {"status": "ok", "already_unloaded": True}
            self._transition(LifecycleState.CLOSING)
            deadline = time.monotonic() + self._drain_timeout
            while self._inflight:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    logger.warning(
                        "drain timeout: abandoning %d in-flight calls", len(self._inflight)
                    )
                    self._abandoned.update(self._inflight)
                    break
                self._cond.wait(timeout=remaining)
            provider = self._provider
        try:
            provider.close()
        except Exception:
            logger.exception("provider close failed; unloading anyway")
        with self._cond:
            self._provider = None
            self._provider_id = None
            self._transition(LifecycleState.UNLOADED)
            self._cond.notify_all()
        return {"status": "ok", "already_unloaded": False}


@dataclass(frozen=True)
class FrameRecord:
    frame_id: int
    received_at: str  # ISO 8601
    jpeg: bytes

    def to_event(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "received_at": self.received_at,
            "jpeg_base64": base64.b64encode(self.jpeg).decode("ascii"),
        }


class FrameStore:
    """Capacity-bounded ring of received frames, oldest evicted first."""

    def __init__(self, capacity: int = 16):
        self._frames: deque[FrameRecord] = deque(maxlen=capacity)
        self._lock = threading.Lock()
        self._next_id = 1

    def add(self, jpeg: bytes, received_at: str | None = None) -> FrameRecord:
        if received_at is None:
            received_at = datetime.now(timezone.utc).isoformat()
        with self._lock:
            record = FrameRecord(self._next_id, received_at, jpeg)
            self._next_id += 1
            self._frames.append(record)
            return record

    def latest(self) -> FrameRecord | None:
        with self._lock:
            return self._frames[-1] if self._frames else None

    def snapshot(self) -> list[FrameRecord]:
        with self._lock:
            return list(self._frames)

    def find_by_digest(self, digest: str) -> int | None:
        with self._lock:
            for record in reversed(self._frames):
                if hashlib.sha256(record.jpeg).hexdigest() == digest:
                    return record.frame_id
        return None

    def __len__(self) -> int:
        with self._lock:
            return len(self._frames)


class ChatSession:
    """Append-only message history; exchanges append atomically."""

    def __init__(self, session_id: str):
        self.id = session_id
        self.created_at = time.time()
        self._messages: list[Message] = []
        self._lock = threading.Lock()

    def snapshot(self) -> list[Message]:
        with self._lock:
            return list(self._messages)

    def _fits(self, message: Message) -> bool:
        if message.role not in ("user", "assistant"):
            return False
        if not self._messages:
            return message.role == "user"
        return self._messages[-1].role != message.role  # strict alternation

    def append_exchange(self, user: Message, assistant: Message) -> None:
        with self._lock:
            if self._fits(user):
                self._messages.append(user)
            self._messages.append(assistant)

    def extend_merged(self, new_messages: list[Message], answer: Message) -> None:
        # client-supplied turns that would break alternation are dropped
        with self._lock:
            for message in new_messages:
                if self._fits(message):
                    self._messages.append(message)
            self._messages.append(answer)

    def __len__(self) -> int:
        with self._lock:
            return len(self._messages)


class SessionStore:
    def __init__(self):
        self._sessions: dict[str, ChatSession] = {}
        self._lock = threading.Lock()

    def get_or_create(self, session_id: str | None = None) -> ChatSession:
        with self._lock:
            if session_id is None:
                session_id = uuid.uuid4().hex
            session = self._sessions.get(session_id)
            if session is None:
                session = ChatSession(session_id)
                self._sessions[session_id] = session
            return session

    def get(self, session_id: str) -> ChatSession | None:
        with self._lock:
            return self._sessions.get(session_id)

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)


class GatewayCore:
    """Everything behind the endpoints, HTTP-free and fully thread-safe."""

    def __init__(
        self,
        registry: ProviderRegistry | None = None,
        frame_capacity: int = 16,
        drain_timeout: float = 5.0,
        assembly_timeout: float = 10.0,
    ):
        self.registry = registry or ProviderRegistry.default()
        self.lifecycle = ModelLifecycle(self.registry, drain_timeout=drain_timeout)
        self.frames = FrameStore(frame_capacity)
        self.sessions = SessionStore()
        self.assembly_timeout = assembly_timeout
        self._assemblies: dict[str, FrameAssembly] = {}
        self._ingest_lock = threading.Lock()
        self._frame_queues: list[queue.SimpleQueue] = []
        self._subscribers_lock = threading.Lock()

    # -- endpoints ---------------------------------------------------------

    def load_model(self, provider_id: str | None = None) -> dict:
        result = self.lifecycle.load(provider_id)
        return {"status": "ok", **result}

    def close_model(self) -> dict:
        return self.lifecycle.close()

    def process_image(self, image_b64: str, prompt: str, session_id: str | None = None) -> dict:
        try:
            jpeg = base64.b64decode(image_b64, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise BadBase64Error(f"image is not valid base64: {exc}") from exc
        if not (jpeg.startswith(JPEG_SOI) and jpeg.endswith(JPEG_EOI)):
            raise NotAJpegError("decoded image lacks JPEG SOI/EOI markers")
        token, provider = self.lifecycle.acquire()
        try:
            session = self.sessions.get_or_create(session_id)
            history = session.snapshot()
            try:
                answer = provider.answer(jpeg, prompt, history)
            except Exception as exc:
                raise ProviderFailureError(str(exc)) from exc
        finally:
            abandoned = self.lifecycle.release(token)
        if abandoned:
            raise ProviderFailureError("request abandoned: model closed during answer")
        now = time.time()
        frame_ref = self.frames.find_by_digest(hashlib.sha256(jpeg).hexdigest())
        session.append_exchange(
            Message("user", prompt, frame_ref=frame_ref, at=now),
            Message("assistant", answer, at=now),
        )
        return {"answer": answer, "session_id": session.id}

    def chat_completion(self, messages: list[Message], session_id: str | None = None) -> dict:
        if not messages:
            raise EmptyHistoryError("messages must not be empty")
        if messages[-1].role != "user":
            raise EmptyHistoryError("last message must have role 'user'")
        token, provider = self.lifecycle.acquire()
        try:
            session = self.sessions.get_or_create(session_id) if session_id else None
            stored = session.snapshot() if session else []
            seen = {(m.role, m.content, m.at) for m in stored}
            new_messages = [m for m in messages if (m.role, m.content, m.at) not in seen]
            prompt = messages[-1].content
            history = stored + [m for m in new_messages if m is not messages[-1]]
            try:
                answer = provider.answer(None, prompt, history)
            except Exception as exc:
                raise ProviderFailureError(str(exc)) from exc
        finally:
            abandoned = self.lifecycle.release(token)
        if abandoned:
            raise ProviderFailureError("request abandoned: model closed during answer")
        if session:
            session.extend_merged(new_messages, Message("assistant", answer, at=time.time()))
        return {"answer": answer}

    # -- device ingestion ----------------------------------------------------

    def ingest_chunk(self, connection_id: str, raw: bytes, now: float | None = None):
        """Feeds one wire chunk; completes/fails/restarts assemblies as needed.

        Returns the assembly state after the chunk, or None when the chunk
        itself was malformed. Never raises for wire-level problems.
        """
        if now is None:
            now = time.monotonic()
        try:
            chunk = deserialize_chunk(raw)
        except TransportError as exc:
            logger.warning("connection %s: dropping malformed chunk: %s", connection_id, exc)
            return None
        with self._ingest_lock:
            assembly = self._assemblies.get(connection_id)
            if assembly is not None and not assembly.is_terminal:
                if assembly.check_timeout(now, self.assembly_timeout) is AssemblyState.FAILED:
                    logger.warning("connection %s: frame timed out, resetting", connection_id)
                    assembly = None
            if assembly is None or assembly.is_terminal:
                assembly = FrameAssembly(started_at=now)
                self._assemblies[connection_id] = assembly
            try:
                state = assembly.feed(chunk)
            except TransportError as exc:
                logger.warning("connection %s: %s; resetting frame", connection_id, exc)
                self._assemblies[connection_id] = FrameAssembly(started_at=now)
                return AssemblyState.FAILED
            if state is AssemblyState.COMPLETE:
                record = self.frames.add(assembly.image())
                self._publish_frame(record)
                logger.info(
                    "connection %s: frame %d stored (%d bytes)",
                    connection_id,
                    record.frame_id,
                    len(record.jpeg),
                )
            elif state is AssemblyState.FAILED:
                logger.warning(
                    "connection %s: frame failed: %s", connection_id, assembly.failure
                )
            return state

    def drop_connection(self, connection_id: str) -> None:
        with self._ingest_lock:
            self._assemblies.pop(connection_id, None)

    # -- frame push ----------------------------------------------------------

    def subscribe_frames(self) -> queue.SimpleQueue:
        q: queue.SimpleQueue = queue.SimpleQueue()
        with self._subscribers_lock:
            self._frame_queues.append(q)
        return q

    def unsubscribe_frames(self, q: queue.SimpleQueue) -> None:
        with self._subscribers_lock:
            if q in self._frame_queues:
                self._frame_queues.remove(q)

    def _publish_frame(self, record: FrameRecord) -> None:
        with self._subscribers_lock:
            for q in self._frame_queues:
                q.put(record)
