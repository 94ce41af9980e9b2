"""Chunked notification codec for streaming JPEG frames.

Wire format, one chunk per notification:

- Data chunk: ``[index_lo, index_hi, payload...]`` -- 2-byte frame index
  followed by 1..180 payload bytes, so a serialized chunk is at most 182
  bytes.
- End flag:   ``[0xFF, 0xFF]`` -- the reserved index with no payload, sent
  once after the last data chunk of a frame.

The frame index is little-endian by default; a big-endian codec can be
constructed for interoperability tests. Data indices run 0..0xFFFE, which
caps a single frame at 65535 * 180 = 11,796,300 bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum

PAYLOAD_MAX = 180
HEADER_SIZE = 2
CHUNK_MAX = HEADER_SIZE + PAYLOAD_MAX  # 182
END_FLAG_INDEX = 0xFFFF
DATA_INDEX_MAX = 0xFFFE
IMAGE_MAX_BYTES = (DATA_INDEX_MAX + 1) * PAYLOAD_MAX  # 11_796_300

JPEG_SOI = b"\xff\xd8"
JPEG_EOI = b"\xff\xd9"


class TransportError(Exception):
    """Base class for codec and reassembly errors."""


class EmptyImageError(TransportError):
    pass


class ImageTooLargeError(TransportError):
    pass


class TooShortError(TransportError):
    pass


class TooLongError(TransportError):
    pass


class EmptyDataPayloadError(TransportError):
    pass


class ProtocolViolationError(TransportError):
    pass


class FedAfterTerminalError(TransportError):
    pass


@dataclass(frozen=True)
class Chunk:
    """One transport notification: a data chunk or the end-flag marker."""

    frame_index: int
    payload: bytes = b""

    def __post_init__(self) -> None:
        if self.frame_index == END_FLAG_INDEX:
            if self.payload:
                raise ProtocolViolationError("end flag carries no payload")
        else:
            if not 0 <= self.frame_index <= DATA_INDEX_MAX:
                raise ProtocolViolationError(
                    f"frame index {self.frame_index} outside 0..{DATA_INDEX_MAX}"
                )
            if not 1 <= len(self.payload) <= PAYLOAD_MAX:
                raise ProtocolViolationError(
                    f"data payload must be 1..{PAYLOAD_MAX} bytes, got {len(self.payload)}"
                )

    @property
    def is_end_flag(self) -> bool:
        return self.frame_index == END_FLAG_INDEX

    @classmethod
    def end_flag(cls) -> "Chunk":
        return cls(END_FLAG_INDEX)


class ChunkCodec:
    """Serializes chunks with a fixed index byte order ("little" or "big")."""

    def __init__(self, byte_order: str = "little"):
        if byte_order not in ("little", "big"):
            raise ValueError(f"unknown byte order {byte_order!r}")
        self._fmt = "<H" if byte_order == "little" else ">H"
        self.byte_order = byte_order

    def serialize(self, chunk: Chunk) -> bytes:
        return struct.pack(self._fmt, chunk.frame_index) + chunk.payload

    def deserialize(self, raw: bytes) -> Chunk:
        if len(raw) < HEADER_SIZE:
            raise TooShortError(f"chunk needs at least {HEADER_SIZE} bytes, got {len(raw)}")
        if len(raw) > CHUNK_MAX:
            raise TooLongError(f"chunk exceeds {CHUNK_MAX} bytes: {len(raw)}")
        (index,) = struct.unpack(self._fmt, raw[:HEADER_SIZE])
        payload = raw[HEADER_SIZE:]
        if index == END_FLAG_INDEX:
            if payload:
                raise ProtocolViolationError("end flag must be exactly 2 bytes")
            return Chunk.end_flag()
        if not payload:
            raise EmptyDataPayloadError(f"zero-payload data chunk (index {index})")
        return Chunk(index, bytes(payload))


_DEFAULT_CODEC = ChunkCodec("little")


def serialize_chunk(chunk: Chunk) -> bytes:
    return _DEFAULT_CODEC.serialize(chunk)


def deserialize_chunk(raw: bytes) -> Chunk:
    return _DEFAULT_CODEC.deserialize(raw)


def encode_frame(image: bytes) -> list[Chunk]:
    """Splits an image into data chunks of up to 180 bytes plus the end flag.

    Concatenating the data payloads in index order reproduces the input.
    """
    if not image:
        raise EmptyImageError("cannot encode a zero-length image")
    if len(image) > IMAGE_MAX_BYTES:
        raise ImageTooLargeError(f"{len(image)} bytes exceeds {IMAGE_MAX_BYTES}")
    chunks = [
        Chunk(i, image[i * PAYLOAD_MAX : (i + 1) * PAYLOAD_MAX])
        for i in range((len(image) + PAYLOAD_MAX - 1) // PAYLOAD_MAX)
    ]
    chunks.append(Chunk.end_flag())
    return chunks


class AssemblyState(Enum):
    INCOMPLETE = "incomplete"
    COMPLETE = "complete"
    FAILED = "failed"


class FailureKind(Enum):
    MISSING_CHUNKS = "missing_chunks"
    TIMEOUT = "timeout"
    CORRUPT_IMAGE = "corrupt_image"


@dataclass(frozen=True)
class AssemblyFailure:
    kind: FailureKind
    missing: frozenset[int] = field(default_factory=frozenset)

    def __str__(self) -> str:
        if self.kind is FailureKind.MISSING_CHUNKS:
            return f"missing chunks {sorted(self.missing)}"
        return self.kind.value


class FrameAssembly:
    """Per-transfer reassembly state machine.

    Accepts data chunks in any order, deduplicates idempotent retransmissions,
    and decides completeness when the end flag arrives: the received index set
    must be exactly {0..max_index} with no gaps. A conflicting duplicate (same
    index, different payload) is a protocol violation. The status is monotone:
    once Complete or Failed, further feeds raise.

    With ``verify_jpeg`` the reassembled bytes must carry JPEG SOI/EOI markers,
    which catches an otherwise invisible loss of the final data chunk. Off by
    default so the codec stays payload-agnostic.
    """

    def __init__(self, started_at: float = 0.0, verify_jpeg: bool = False):
        self.started_at = started_at
        self._verify_jpeg = verify_jpeg
        self._chunks: dict[int, bytes] = {}
        self._end_seen = False
        self._state = AssemblyState.INCOMPLETE
        self._failure: AssemblyFailure | None = None
        self._image: bytes | None = None

    @property
    def state(self) -> AssemblyState:
        return self._state

    @property
    def failure(self) -> AssemblyFailure | None:
        return self._failure

    @property
    def end_seen(self) -> bool:
        return self._end_seen

    @property
    def chunk_count(self) -> int:
        return len(self._chunks)

    @property
    def is_terminal(self) -> bool:
        return self._state is not AssemblyState.INCOMPLETE

    def feed(self, chunk: Chunk) -> AssemblyState:
        if self.is_terminal:
            raise FedAfterTerminalError(f"feed on {self._state.value} assembly")
        if chunk.is_end_flag:
            self._end_seen = True
            return self._finish()
        existing = self._chunks.get(chunk.frame_index)
        if existing is not None:
            if existing != chunk.payload:
                raise ProtocolViolationError(
                    f"conflicting duplicate for index {chunk.frame_index}"
                )
            return self._state  # idempotent retransmission
        self._chunks[chunk.frame_index] = chunk.payload
        return self._state

    def check_timeout(self, now: float, limit: float) -> AssemblyState:
        if self.is_terminal:
            return self._state
        if now - self.started_at > limit:
            self._state = AssemblyState.FAILED
            self._failure = AssemblyFailure(FailureKind.TIMEOUT)
        return self._state

    def image(self) -> bytes:
        if self._state is not AssemblyState.COMPLETE or self._image is None:
            raise TransportError("no reassembled image: assembly is not complete")
        return self._image

    def _finish(self) -> AssemblyState:
        if not self._chunks:
            self._state = AssemblyState.FAILED
            self._failure = AssemblyFailure(FailureKind.MISSING_CHUNKS, frozenset({0}))
            return self._state
        top = max(self._chunks)
        missing = frozenset(range(top + 1)) - self._chunks.keys()
        if missing:
            self._state = AssemblyState.FAILED
            self._failure = AssemblyFailure(FailureKind.MISSING_CHUNKS, missing)
            return self._state
        image = b"".join(self._chunks[i] for i in range(top + 1))
        if self._verify_jpeg and not (
            image.startswith(JPEG_SOI) and image.endswith(JPEG_EOI)
        ):
            self._state = AssemblyState.FAILED
            self._failure = AssemblyFailure(FailureKind.CORRUPT_IMAGE)
            return self._state
        self._image = image
        self._state = AssemblyState.COMPLETE
        return self._state
