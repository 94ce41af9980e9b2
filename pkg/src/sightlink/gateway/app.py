"""FastAPI shell over GatewayCore: the four model endpoints plus frame push."""

from __future__ import annotations

import asyncio
import logging
import queue
from contextlib import asynccontextmanager

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.concurrency import run_in_threadpool
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..providers import Message, ProviderRegistry
from . import schemas
from .core import GatewayCore, GatewayError
from .ingest import start_ingest_server

logger = logging.getLogger(__name__)


def create_app(
    core: GatewayCore | None = None,
    registry: ProviderRegistry | None = None,
    ingest_host: str = "127.0.0.1",
    ingest_port: int | None = None,
) -> FastAPI:
    """Builds the service; ``ingest_port`` None disables the TCP listener,
    0 binds an ephemeral port (found on ``app.state.ingest_port``)."""
    gateway = core or GatewayCore(registry)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        server = None
        if ingest_port is not None:
            server, bound = await start_ingest_server(gateway, ingest_host, ingest_port)
            app.state.ingest_port = bound
        yield
        if server is not None:
            server.close()
            await server.wait_closed()

    app = FastAPI(title="sightlink gateway", lifespan=lifespan)
    app.state.core = gateway
    app.state.ingest_port = None
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(GatewayError)
    async def gateway_error_handler(request, exc: GatewayError):
        return JSONResponse(
            status_code=exc.http_status,
            content={"error": exc.code, "detail": str(exc)},
        )

    @app.post("/load_model", response_model=schemas.LoadModelResponse)
    def load_model(body: schemas.LoadModelRequest | None = None):
        provider = body.provider if body else None
        return gateway.load_model(provider)

    @app.post("/process_image", response_model=schemas.ProcessImageResponse)
    def process_image(body: schemas.ProcessImageRequest):
        return gateway.process_image(body.image, body.prompt, body.session_id)

    @app.post("/chat_completion", response_model=schemas.ChatCompletionResponse)
    def chat_completion(body: schemas.ChatCompletionRequest):
        messages = [
            Message(m.role, m.content, frame_ref=m.frame_ref, at=m.at)
            for m in body.messages
        ]
        return gateway.chat_completion(messages, body.session_id)

    @app.post("/close_model", response_model=schemas.CloseModelResponse)
    def close_model():
        return gateway.close_model()

    @app.get("/frames/latest", response_model=schemas.FrameEvent)
    def latest_frame():
        record = gateway.frames.latest()
        if record is None:
            return JSONResponse(
                status_code=404,
                content={"error": "no_frame", "detail": "no frame received yet"},
            )
        return record.to_event()

    @app.websocket("/frames")
    async def frames_ws(websocket: WebSocket):
        await websocket.accept()
        q = gateway.subscribe_frames()
        receiver = asyncio.create_task(websocket.receive())
        try:
            while not receiver.done():
                try:
                    record = await run_in_threadpool(q.get, True, 0.25)
                except queue.Empty:
                    continue
                await websocket.send_json(record.to_event())
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            gateway.unsubscribe_frames(q)
            receiver.cancel()

    return app
