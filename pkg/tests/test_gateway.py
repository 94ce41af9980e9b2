from __future__ import annotations

import base64
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import pytest
from fastapi.testclient import TestClient

from sightlink.gateway import (
    GatewayCore,
    LifecycleState,
    ModelNotLoadedError,
    ProviderFailureError,
)
from sightlink.gateway.app import create_app
from sightlink.gateway.core import VALID_TRANSITIONS
from sightlink.providers import (
    AnswerProvider,
    Message,
    MockProvider,
    ProviderRegistry,
)
from sightlink.simulator import make_synthetic_frame
from sightlink.transport import AssemblyState, encode_frame, serialize_chunk

JPEG = make_synthetic_frame(64, 48, 0)
JPEG_B64 = base64.b64encode(JPEG).decode("ascii")


class BrokenLoadProvider(AnswerProvider):
    def load(self):
        raise RuntimeError("weights missing")


class BrokenAnswerProvider(AnswerProvider):
    def answer(self, image, prompt, history):
        raise RuntimeError("inference exploded")


class GatedProvider(AnswerProvider):
    """Blocks answer() until the gate opens; for drain tests."""

    def __init__(self):
        self.gate = threading.Event()
        self.started = threading.Event()

    def answer(self, image, prompt, history):
        self.started.set()
        self.gate.wait(timeout=10)
        return "slow answer"


def registry_with(**extra) -> ProviderRegistry:
    factories = {"mock": MockProvider}
    factories.update(extra)
    return ProviderRegistry(factories)


def make_core(**kwargs) -> GatewayCore:
    return GatewayCore(registry_with(
        broken_load=BrokenLoadProvider,
        broken_answer=BrokenAnswerProvider,
    ), **kwargs)


def ingest_frame(core, jpeg, connection_id="conn"):
    state = None
    for chunk in encode_frame(jpeg):
        state = core.ingest_chunk(connection_id, serialize_chunk(chunk))
    return state


# -- lifecycle ---------------------------------------------------------------


def test_load_and_close_happy_path():
    core = make_core()
    result = core.load_model("mock")
    assert result["loaded"] is True and result["already_loaded"] is False
    assert core.lifecycle.state is LifecycleState.LOADED
    again = core.load_model()
    assert again["already_loaded"] is True
    closed = core.close_model()
    assert closed == {"status": "ok", "already_unloaded": False}
    assert core.lifecycle.state is LifecycleState.UNLOADED
    assert core.close_model()["already_unloaded"] is True


def test_process_image_requires_loaded_model():
    core = make_core()
    with pytest.raises(ModelNotLoadedError):
        core.process_image(JPEG_B64, "How far is the desk from me?")


def test_broken_provider_load_returns_to_unloaded():
    core = make_core()
    with pytest.raises(ProviderFailureError):
        core.load_model("broken_load")
    assert core.lifecycle.state is LifecycleState.UNLOADED
    assert all(t in VALID_TRANSITIONS for t in core.lifecycle.transitions)


def test_mock_answer_shape_and_determinism():
    core = make_core()
    core.load_model("mock")
    first = core.process_image(JPEG_B64, "How far is the desk from me?")
    assert first["answer"].startswith("[mock#")
    assert "] distance:" in first["answer"]
    second = core.process_image(JPEG_B64, "How far is the desk from me?")
    assert second["answer"] == first["answer"]


def test_process_image_appends_exchange_to_session():
    core = make_core()
    core.load_model()
    result = core.process_image(JPEG_B64, "How can I reach the seat?")
    session = core.sessions.get(result["session_id"])
    assert len(session) == 2
    roles = [m.role for m in session.snapshot()]
    assert roles == ["user", "assistant"]
    core.process_image(JPEG_B64, "How far is the seat from me?", result["session_id"])
    assert len(session) == 4


def test_chat_completion_references_last_frame():
    core = make_core()
    core.load_model()
    assert ingest_frame(core, JPEG) is AssemblyState.COMPLETE
    result = core.process_image(JPEG_B64, "How far is the desk from me?")
    session_id = result["session_id"]
    follow_up = core.chat_completion(
        [Message("user", "what did you last see?")], session_id
    )
    assert "(seen in frame 1)" in follow_up["answer"]
    session = core.sessions.get(session_id)
    assert [m.role for m in session.snapshot()] == ["user", "assistant", "user", "assistant"]


def test_chat_completion_validation():
    core = make_core()
    core.load_model()
    from sightlink.gateway import EmptyHistoryError

    with pytest.raises(EmptyHistoryError):
        core.chat_completion([])
    with pytest.raises(EmptyHistoryError):
        core.chat_completion([Message("assistant", "hello")])


def test_chat_completion_merge_drops_duplicates():
    core = make_core()
    core.load_model()
    result = core.process_image(JPEG_B64, "How far is the desk from me?")
    session = core.sessions.get(result["session_id"])
    stored = session.snapshot()
    # replay the stored history verbatim plus a new question
    replay = list(stored) + [Message("user", "and the seat?")]
    core.chat_completion(replay, result["session_id"])
    # duplicates were not re-appended: old pair + new user + new answer
    assert len(session) == 4


def test_drain_waits_for_inflight_answer():
    gated = GatedProvider()
    core = GatewayCore(registry_with(gated=lambda: gated), drain_timeout=5.0)
    core.load_model("gated")
    results = {}

    def ask():
        results["answer"] = core.process_image(JPEG_B64, "q")["answer"]

    asker = threading.Thread(target=ask)
    asker.start()
    assert gated.started.wait(timeout=5)

    closer = threading.Thread(target=lambda: results.update(close=core.close_model()))
    closer.start()
    deadline = time.monotonic() + 5
    while core.lifecycle.state is not LifecycleState.CLOSING:
        assert time.monotonic() < deadline
        time.sleep(0.005)
    # new requests during Closing are refused
    with pytest.raises(ModelNotLoadedError):
        core.process_image(JPEG_B64, "q2")
    gated.gate.set()
    asker.join(timeout=5)
    closer.join(timeout=5)
    assert results["answer"] == "slow answer"
    assert results["close"]["already_unloaded"] is False
    assert core.lifecycle.state is LifecycleState.UNLOADED


def test_drain_timeout_abandons_stragglers():
    gated = GatedProvider()
    core = GatewayCore(registry_with(gated=lambda: gated), drain_timeout=0.05)
    core.load_model("gated")
    errors = []

    def ask():
        try:
            core.process_image(JPEG_B64, "q")
        except ProviderFailureError as exc:
            errors.append(exc)

    asker = threading.Thread(target=ask)
    asker.start()
    assert gated.started.wait(timeout=5)
    assert core.close_model()["already_unloaded"] is False
    assert core.lifecycle.state is LifecycleState.UNLOADED
    gated.gate.set()
    asker.join(timeout=5)
    assert len(errors) == 1


def test_sixteen_concurrent_requests_all_succeed():
    core = make_core()
    core.load_model()
    with ThreadPoolExecutor(max_workers=16) as pool:
        futures = [
            pool.submit(core.process_image, JPEG_B64, f"How far is the desk from me? #{i}")
            for i in range(16)
        ]
        answers = [f.result(timeout=10) for f in futures]
    assert len(answers) == 16
    assert all(a["answer"].startswith("[mock#") for a in answers)


def test_concurrent_session_appends_lose_nothing():
    core = make_core()
    core.load_model()
    session = core.sessions.get_or_create("shared")
    with ThreadPoolExecutor(max_workers=8) as pool:
        futures = [
            pool.submit(core.process_image, JPEG_B64, f"q{i}", "shared") for i in range(20)
        ]
        for f in futures:
            f.result(timeout=10)
    messages = session.snapshot()
    assert len(messages) == 40
    roles = [m.role for m in messages]
    assert roles == ["user", "assistant"] * 20


# -- ingestion ---------------------------------------------------------------


def test_ingest_stores_frame_and_publishes_event():
    core = make_core()
    q = core.subscribe_frames()
    assert ingest_frame(core, JPEG) is AssemblyState.COMPLETE
    assert len(core.frames) == 1
    record = q.get(timeout=1)
    assert record.frame_id == 1
    assert record.jpeg == JPEG


def test_ingest_gap_leaves_store_unchanged():
    core = make_core()
    chunks = encode_frame(JPEG)
    assert len(chunks) >= 4  # interior drop needs >= 3 data chunks
    for chunk in chunks[:-1]:
        if chunk.frame_index == 1:
            continue
        core.ingest_chunk("conn", serialize_chunk(chunk))
    state = core.ingest_chunk("conn", serialize_chunk(chunks[-1]))
    assert state is AssemblyState.FAILED
    assert len(core.frames) == 0


def test_ingest_back_to_back_frames_on_one_connection():
    core = make_core()
    a = make_synthetic_frame(64, 48, 1)
    b = make_synthetic_frame(64, 48, 2)
    assert ingest_frame(core, a) is AssemblyState.COMPLETE
    assert ingest_frame(core, b) is AssemblyState.COMPLETE
    stored = core.frames.snapshot()
    assert [r.frame_id for r in stored] == [1, 2]
    assert stored[0].jpeg == a and stored[1].jpeg == b


def test_ingest_recovers_after_failed_frame():
    core = make_core()
    chunks = encode_frame(JPEG)
    core.ingest_chunk("conn", serialize_chunk(chunks[1]))  # orphan mid-frame chunk
    core.ingest_chunk("conn", serialize_chunk(chunks[-1]))  # end flag -> failed
    assert ingest_frame(core, JPEG) is AssemblyState.COMPLETE
    assert len(core.frames) == 1


def test_ingest_malformed_chunk_is_dropped_not_fatal():
    core = make_core()
    assert core.ingest_chunk("conn", b"\x07") is None
    assert ingest_frame(core, JPEG) is AssemblyState.COMPLETE


def test_ingest_timeout_resets_assembly():
    core = GatewayCore(assembly_timeout=10.0)
    chunks = encode_frame(JPEG)
    core.ingest_chunk("conn", serialize_chunk(chunks[0]), now=0.0)
    # 11 virtual seconds later the unfinished frame is abandoned
    for chunk in chunks:
        core.ingest_chunk("conn", serialize_chunk(chunk), now=11.0)
    assert len(core.frames) == 1


def test_frame_store_eviction_keeps_last_capacity_in_order():
    core = GatewayCore(frame_capacity=3)
    frames = [make_synthetic_frame(64, 48, i) for i in range(5)]
    for jpeg in frames:
        assert ingest_frame(core, jpeg) is AssemblyState.COMPLETE
    stored = core.frames.snapshot()
    assert [r.frame_id for r in stored] == [3, 4, 5]
    assert [r.jpeg for r in stored] == frames[2:]
    assert core.frames.latest().frame_id == 5


# -- HTTP contract -------------------------------------------------------------


@pytest.fixture()
def client():
    app = create_app(core=make_core(), ingest_port=None)
    with TestClient(app) as test_client:
        yield test_client


def test_http_process_image_requires_load(client):
    response = client.post("/process_image", json={"image": JPEG_B64, "prompt": "hi"})
    assert response.status_code == 409
    assert response.json()["error"] == "model_not_loaded"


def test_http_bad_base64_is_400(client):
    client.post("/load_model", json={"provider": "mock"})
    response = client.post("/process_image", json={"image": "!!!", "prompt": "hi"})
    assert response.status_code == 400
    assert response.json()["error"] == "bad_base64"


def test_http_not_a_jpeg_is_400(client):
    client.post("/load_model", json={})
    payload = base64.b64encode(b"plain text").decode("ascii")
    response = client.post("/process_image", json={"image": payload, "prompt": "hi"})
    assert response.status_code == 400
    assert response.json()["error"] == "not_a_jpeg"


def test_http_unknown_provider_is_404(client):
    response = client.post("/load_model", json={"provider": "nope"})
    assert response.status_code == 404
    assert response.json()["error"] == "unknown_provider"


def test_http_provider_failure_is_502(client):
    client.post("/load_model", json={"provider": "broken_answer"})
    response = client.post("/process_image", json={"image": JPEG_B64, "prompt": "hi"})
    assert response.status_code == 502
    assert response.json()["error"] == "provider_failure"


def test_http_load_failure_is_502(client):
    response = client.post("/load_model", json={"provider": "broken_load"})
    assert response.status_code == 502


def test_http_empty_history_is_400(client):
    client.post("/load_model")
    response = client.post("/chat_completion", json={"messages": []})
    assert response.status_code == 400
    response = client.post(
        "/chat_completion", json={"messages": [{"role": "assistant", "content": "x"}]}
    )
    assert response.status_code == 400


def test_http_full_question_flow(client):
    load = client.post("/load_model", json={"provider": "mock"})
    assert load.status_code == 200
    assert load.json()["loaded"] is True
    ask = client.post(
        "/process_image",
        json={"image": JPEG_B64, "prompt": "How far is the desk from me?"},
    )
    assert ask.status_code == 200
    body = ask.json()
    assert body["answer"].startswith("[mock#")
    assert body["session_id"]
    chat = client.post(
        "/chat_completion",
        json={
            "messages": [{"role": "user", "content": "repeat that"}],
            "session_id": body["session_id"],
        },
    )
    assert chat.status_code == 200
    close = client.post("/close_model")
    assert close.status_code == 200
    assert close.json() == {"status": "ok", "already_unloaded": False}


def test_http_frames_latest_404_before_ingest(client):
    response = client.get("/frames/latest")
    assert response.status_code == 404
    assert response.json()["error"] == "no_frame"


def test_http_frames_latest_after_ingest(client):
    core = client.app.state.core
    ingest_frame(core, JPEG)
    response = client.get("/frames/latest")
    assert response.status_code == 200
    body = response.json()
    assert body["frame_id"] == 1
    assert base64.b64decode(body["jpeg_base64"]) == JPEG
    assert "T" in body["received_at"]  # ISO 8601


def test_websocket_streams_frame_events(client):
    core = client.app.state.core
    with client.websocket_connect("/frames") as ws:
        ingest_frame(core, JPEG)
        event = ws.receive_json()
        assert event["frame_id"] == 1
        assert base64.b64decode(event["jpeg_base64"]) == JPEG
        second = make_synthetic_frame(64, 48, 5)
        ingest_frame(core, second)
        event2 = ws.receive_json()
        assert event2["frame_id"] == 2


def test_tcp_ingest_end_to_end():
    from sightlink.simulator import TcpChunkSink

    app = create_app(core=make_core(), ingest_port=0)
    with TestClient(app) as test_client:
        port = app.state.ingest_port
        assert port
        sink = TcpChunkSink("127.0.0.1", port)
        for chunk in encode_frame(JPEG):
            sink.send(chunk)
        sink.close()
        deadline = time.monotonic() + 5
        while time.monotonic() < deadline:
            response = test_client.get("/frames/latest")
            if response.status_code == 200:
                break
            time.sleep(0.02)
        assert response.status_code == 200
        assert base64.b64decode(response.json()["jpeg_base64"]) == JPEG
