"""Gateway service: HTTP endpoints, chunk-stream ingestion, session state."""

from .core import (
    BadBase64Error,
    EmptyHistoryError,
    FrameStore,
    GatewayCore,
    GatewayError,
    LifecycleState,
    ModelLifecycle,
    ModelNotLoadedError,
    NotAJpegError,
    ProviderFailureError,
    UnknownProviderError,
)

__all__ = [
    "BadBase64Error",
    "EmptyHistoryError",
    "FrameStore",
    "GatewayCore",
    "GatewayError",
    "LifecycleState",
    "ModelLifecycle",
    "ModelNotLoadedError",
    "NotAJpegError",
    "ProviderFailureError",
    "UnknownProviderError",
]
