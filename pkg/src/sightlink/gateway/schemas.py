"""Request/response models for the gateway endpoints."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel


class LoadModelRequest(BaseModel):
    provider: str | None = None


class LoadModelResponse(BaseModel):
    status: str
    loaded: bool
    already_loaded: bool
    provider_id: str


class ProcessImageRequest(BaseModel):
    image: str
    prompt: str
    session_id: str | None = None


class ProcessImageResponse(BaseModel):
    answer: str
    session_id: str


class ChatMessage(BaseModel):
    role: Literal["user", "assistant"]
    content: str
    frame_ref: int | None = None
    at: float | None = None


class ChatCompletionRequest(BaseModel):
    messages: list[ChatMessage]
    session_id: str | None = None


class ChatCompletionResponse(BaseModel):
    answer: str


class CloseModelResponse(BaseModel):
    status: str
    already_unloaded: bool


class FrameEvent(BaseModel):
    frame_id: int
    received_at: str
    jpeg_base64: str


class ErrorBody(BaseModel):
    error: str
    detail: str
